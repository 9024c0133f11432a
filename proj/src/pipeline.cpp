#include "voxgan/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "voxgan/augment.hpp"
#include "voxgan/checkpoint.hpp"
#include "voxgan/log.hpp"
#include "voxgan/nifti.hpp"
#include "voxgan/slices.hpp"
#include "voxgan/synth.hpp"
#include "voxgan/tape.hpp"

namespace voxgan {
namespace {

constexpr std::uint64_t kSynthSalt = 0x5E17DA7AULL;
constexpr std::uint64_t kGenerateSalt = 0x6E4E5A7EULL;

std::string numbered(const char* prefix, std::int64_t i, int width,
                     const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*lld%s", prefix, width,
                static_cast<long long>(i), suffix);
  return buf;
}

bool is_nifti_name(const std::string& name) {
  auto ends = [&](const std::string& s) {
    return name.size() > s.size() &&
           name.compare(name.size() - s.size(), s.size(), s) == 0;
  };
  return ends(".nii") || ends(".nii.gz");
}

std::string stem_of(const std::string& name) {
  for (const std::string s : {".nii.gz", ".nii"}) {
    if (name.size() > s.size() &&
        name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return name.substr(0, name.size() - s.size());
    }
  }
  return name;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t require_seed(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError({"seed is mandatory"});
  return *cfg.seed;
}

// Cubic volume reduced by 2x mean pooling to `resolution`.
std::vector<float> reduce_to(const Volume& v, std::int64_t resolution,
                             const std::string& name) {
  if (v.dims[0] != v.dims[1] || v.dims[1] != v.dims[2]) {
    throw DataError(name + ": training volumes must be cubic");
  }
  Volume cur = v;
  while (cur.dims[0] > resolution) {
    if (cur.dims[0] % 2 != 0) break;
    cur = downsample_by_2(cur);
  }
  if (cur.dims[0] != resolution) {
    throw DataError(name + ": extent " + std::to_string(v.dims[0]) +
                    " is not a power-of-two multiple of " +
                    std::to_string(resolution));
  }
  return cur.data;
}

}  // namespace

void write_config_echo(const RunConfig& cfg, const fs::path& dir) {
  write_file_bytes(dir / kConfigEcho, render_config(cfg));
}

std::vector<fs::path> cmd_synthdata(const RunConfig& cfg,
                                    const fs::path& out_dir) {
  const std::uint64_t seed = require_seed(cfg);
  fs::create_directories(out_dir);
  std::vector<fs::path> paths(static_cast<std::size_t>(cfg.synth_count));
  for (int i = 0; i < cfg.synth_count; ++i) {
    Rng rng(mix_seed(mix_seed(seed ^ kSynthSalt) ^ static_cast<std::uint64_t>(i)));
    const Volume v = make_synthetic_brain(cfg.synth_dims, rng);
    paths[static_cast<std::size_t>(i)] =
        out_dir / numbered("synth_", i, 3, ".nii.gz");
    write_nifti(v, paths[static_cast<std::size_t>(i)]);
  }
  write_config_echo(cfg, out_dir);
  return paths;
}

fs::path cmd_preprocess(const fs::path& in_dir, const fs::path& out_dir,
                        const RunConfig& cfg) {
  if (!fs::is_directory(in_dir)) {
    throw DataError("input directory " + in_dir.string() + " does not exist");
  }
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && is_nifti_name(name)) names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) {
    throw DataError("no NIfTI files in " + in_dir.string());
  }
  fs::create_directories(out_dir);

  const auto n = static_cast<std::int64_t>(names.size());
  std::vector<std::string> outputs(names.size());
  std::vector<std::string> failures(names.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      Volume v = read_nifti(in_dir / names[idx]);
      v = downsample_by_2(v);
      v = center_crop(v, cfg.crop);
      v = normalize_intensity(v);
      const std::string out = stem_of(names[idx]) + ".nii.gz";
      write_nifti(v, out_dir / out);
      outputs[idx] = out;
    } catch (const Error& e) {
      failures[idx] = e.what();
    }
  }

  std::vector<std::string> processed;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!failures[i].empty()) {
      log_warning("skipping " + names[i] + ": " + failures[i]);
    } else {
      processed.push_back(outputs[i]);
    }
  }
  const auto kept = static_cast<std::int64_t>(processed.size());
  if (kept <= cfg.eval_count) {
    throw DataError(std::to_string(kept) +
                    " readable volumes cannot cover eval_count " +
                    std::to_string(cfg.eval_count) + " plus training data");
  }
  std::string manifest = "# path\tsplit\n";
  for (std::int64_t i = 0; i < kept; ++i) {
    manifest += processed[static_cast<std::size_t>(i)] +
                (i < kept - cfg.eval_count ? "\ttrain\n" : "\teval\n");
  }
  const fs::path path = out_dir / kPreprocessManifest;
  write_file_bytes(path, manifest);
  write_config_echo(cfg, out_dir);
  return path;
}

std::vector<ManifestEntry> read_preprocess_manifest(const fs::path& manifest) {
  std::vector<ManifestEntry> entries;
  std::istringstream in(read_text(manifest));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(manifest.string() + ": malformed line '" + line + "'");
    }
    entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return entries;
}

fs::path cmd_augment(const fs::path& manifest, const fs::path& out_dir,
                     const RunConfig& cfg) {
  const std::uint64_t seed = require_seed(cfg);
  const fs::path base = manifest.parent_path();
  std::vector<std::string> sources;
  for (const auto& e : read_preprocess_manifest(manifest)) {
    if (e.split == "train") sources.push_back(e.path);
  }
  if (sources.empty()) {
    throw DataError(manifest.string() + " lists no training volumes");
  }
  fs::create_directories(out_dir);
  AugmentOptions opt;
  opt.k = cfg.augment_k;
  opt.sigma_deg = cfg.augment_sigma;
  opt.seed = seed;
  // Background of normalized data is its minimum, not 0.
  opt.fill_with_minimum = true;
  const auto records = build_augmented_dataset(
      sources,
      [&](std::size_t i) {
        const fs::path p = base / sources[i];
        if (!fs::exists(p)) {
          throw DataError("missing source volume " + p.string());
        }
        return read_nifti(p);
      },
      opt,
      [&](const AugmentRecord& r, const Volume& v) {
        write_nifti(v, out_dir / r.output);
      });
  const fs::path path = out_dir / kAugmentManifest;
  write_file_bytes(path, format_augment_manifest(records));
  write_config_echo(cfg, out_dir);
  return path;
}

Tensor load_training_set(const fs::path& manifest, int target_stage) {
  const fs::path base = manifest.parent_path();
  const std::string text = read_text(manifest);
  std::vector<std::string> files;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = std::count(line.begin(), line.end(), '\t') + 1;
    if (fields == 6) {
      files.push_back(parse_manifest_line(line).output);
    } else if (fields == 2) {
      const auto tab = line.find('\t');
      if (line.substr(tab + 1) == "train") files.push_back(line.substr(0, tab));
    } else {
      throw DataError(manifest.string() + ": malformed line '" + line + "'");
    }
  }
  if (files.empty()) {
    throw DataError(manifest.string() + " lists no training volumes");
  }
  const std::int64_t r = std::int64_t{4} << target_stage;
  const std::int64_t per = r * r * r;
  const auto n = static_cast<std::int64_t>(files.size());
  std::vector<float> data(static_cast<std::size_t>(n * per));
  std::vector<std::string> errors(files.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      const fs::path p = base / files[idx];
      const auto v = reduce_to(read_nifti(p), r, p.string());
      std::copy(v.begin(), v.end(), data.begin() + i * per);
    } catch (const Error& e) {
      errors[idx] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DataError(e);
  }
  return Tensor::from_vector({n, 1, r, r, r}, data);
}

std::string describe_schedule(const TrainConfig& cfg) {
  std::ostringstream out;
  TrainSchedule s = cfg.schedule;
  s.validate();
  std::int64_t total = 0;
  for (int stage = 0; stage <= s.target_stage; ++stage) {
    TrainSchedule probe = s;
    probe.stage = stage;
    const int batch = probe.batch_size();
    const std::int64_t steps = steps_per_phase(s.reals_per_phase, batch);
    const int phases = stage == 0 ? 1 : 2;
    const int res = probe.resolution();
    out << "stage " << stage << ": " << res << "^3, batch " << batch
        << ", lr " << s.lr_table[std::min<std::size_t>(
                          static_cast<std::size_t>(stage),
                          s.lr_table.size() - 1)]
        << ", " << phases << " phase(s) x " << steps << " steps\n";
    total += phases * steps;
  }
  if (s.late_lr) {
    out << "late rate " << s.late_lr->rate << " for the last "
        << s.late_lr->fraction * 100.0 << "% of stage " << s.target_stage
        << "\n";
  }
  out << "total steps: " << total << "\n";
  return out.str();
}

TrainResult cmd_train(const fs::path& manifest, const fs::path& out_dir,
                      const RunConfig& cfg, const TrainOptions& options) {
  validate_config(cfg);
  const TrainConfig tc = to_train_config(cfg);
  TrainResult result;
  if (options.dry_run) {
    if (!manifest.empty() && !fs::exists(manifest)) {
      throw DataError("manifest " + manifest.string() + " does not exist");
    }
    result.plan = describe_schedule(tc);
    return result;
  }

  const Tensor dataset = load_training_set(manifest, cfg.target_stage);
  fs::create_directories(out_dir / "checkpoints");
  write_config_echo(cfg, out_dir);

  std::optional<TrainState> resume;
  if (options.resume) resume = load_checkpoint(*options.resume);

  // A resumed run rewrites the log up to its checkpoint so the file matches
  // an uninterrupted run.
  const fs::path log_path = out_dir / kTrainLog;
  std::string log_text = "step\tstage\talpha\tloss_d\tloss_g\n";
  if (resume && fs::exists(log_path)) {
    std::istringstream in(read_text(log_path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (std::stoll(line.substr(0, line.find('\t'))) < resume->step) {
        log_text += line + '\n';
      }
    }
  }
  {
    std::ofstream log(log_path, std::ios::trunc);
    log << log_text;
  }
  std::ofstream log(log_path, std::ios::app);

  RunHooks hooks;
  hooks.max_steps = options.max_steps;
  hooks.log = [&](const StepReport& r) {
    log << format_log_line(r) << '\n';
  };
  hooks.checkpoint = [&](const TrainState& st) {
    log.flush();
    const fs::path p =
        out_dir / "checkpoints" / numbered("step_", st.step, 8, ".vgan");
    save_checkpoint(st, p);
    return p.string();
  };
  const TrainState st = run_schedule(dataset, tc, hooks, std::move(resume));
  log.flush();
  result.steps = st.step;
  result.finished = st.schedule.finished;
  if (st.schedule.finished) {
    result.final_checkpoint = out_dir / kFinalCheckpoint;
    save_checkpoint(st, *result.final_checkpoint);
  }
  return result;
}

std::vector<fs::path> cmd_generate(const fs::path& checkpoint,
                                   const fs::path& out_dir,
                                   const RunConfig& cfg) {
  const std::uint64_t seed = require_seed(cfg);
  const TrainState st = load_checkpoint(checkpoint);
  const int stage = st.generator.max_stage();
  const float alpha = st.schedule.stage == stage ? st.schedule.alpha() : 1.0f;
  const int latent_dim =
      static_cast<int>(st.generator.at("g.base.dense.weight").dim(1));
  Rng rng(mix_seed(seed ^ kGenerateSalt));
  const Tensor z = sample_latents(rng, cfg.generate_count, latent_dim);
  Tensor out;
  {
    NoGradGuard no_grad;
    out = generator_forward(st.generator, z, stage, alpha);
  }
  fs::create_directories(out_dir);
  const std::int64_t r = out.dim(2);
  const std::int64_t per = r * r * r;
  const auto values = out.to_vector();
  std::vector<fs::path> written;
  for (int i = 0; i < cfg.generate_count; ++i) {
    Volume v = Volume::zeros({r, r, r});
    std::copy(values.begin() + i * per, values.begin() + (i + 1) * per,
              v.data.begin());
    if (cfg.upsample > 0) {
      v = upsample_to(v, {cfg.upsample, cfg.upsample, cfg.upsample});
    }
    v.refresh_range();
    const std::string stem = numbered("sample_", i, 3, "");
    const fs::path nii = out_dir / (stem + ".nii.gz");
    write_nifti(v, nii);
    written.push_back(nii);
    for (const auto& p : export_slices(v, out_dir / stem)) written.push_back(p);
  }
  write_config_echo(cfg, out_dir);
  return written;
}

}  // namespace voxgan
