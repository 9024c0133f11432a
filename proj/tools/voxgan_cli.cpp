// Command-line entry point: synthdata, preprocess, augment, train, generate,
// selftest. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric failure.
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "voxgan/checkpoint.hpp"
#include "voxgan/config.hpp"
#include "voxgan/error.hpp"
#include "voxgan/log.hpp"
#include "voxgan/pipeline.hpp"
#include "voxgan_oracle/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool dry_run = false;
  bool verbose = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key=value configuration file");
  cmd->add_option("--seed", f.seed, "random seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory (overrides out_dir)");
  cmd->add_flag("--dry-run", f.dry_run, "validate and describe, write nothing");
  cmd->add_option("--set", f.overrides, "extra key=value overrides")
      ->take_all();
  cmd->add_flag("-v,--verbose", f.verbose, "log progress");
}

voxgan::RunConfig resolve(const CommonFlags& f) {
  voxgan::RunConfig cfg;
  if (!f.config.empty()) cfg = voxgan::load_config(f.config);
  std::vector<std::string> problems;
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      problems.push_back("--set " + kv + ": expected key=value");
      continue;
    }
    try {
      voxgan::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const voxgan::ConfigError& e) {
      for (const auto& p : e.problems()) problems.push_back("--set " + p);
    }
  }
  if (!problems.empty()) throw voxgan::ConfigError(problems);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  voxgan::set_log_level(f.verbose ? voxgan::LogLevel::info
                                  : voxgan::LogLevel::warning);
  return cfg;
}

voxgan::fs::path require_out(const voxgan::RunConfig& cfg) {
  if (cfg.out_dir.empty()) {
    throw voxgan::ConfigError({"an output directory is required (--out or out_dir)"});
  }
  return cfg.out_dir;
}

void validate_or_throw(const voxgan::RunConfig& cfg) {
  voxgan::validate_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive-growing 3D GAN for volumetric data"};
  app.require_subcommand(1);

  CommonFlags synth_f, pre_f, aug_f, train_f, gen_f;
  std::string in_dir, aug_manifest, train_manifest, resume, checkpoint;
  std::int64_t max_steps = -1;
  std::optional<int> count;
  std::optional<std::int64_t> upsample;
  voxgan::oracle::SelftestOptions st_opt;

  auto* synth = app.add_subcommand("synthdata", "write synthetic phantom volumes");
  add_common(synth, synth_f);
  synth->add_option("--count", count, "number of volumes (synth_count)");

  auto* pre = app.add_subcommand("preprocess", "downsample, crop and normalize volumes");
  add_common(pre, pre_f);
  pre->add_option("--in", in_dir, "directory of .nii/.nii.gz files");

  auto* aug = app.add_subcommand("augment", "write rotated copies of training volumes");
  add_common(aug, aug_f);
  aug->add_option("--manifest", aug_manifest, "preprocess manifest")->required();

  auto* train = app.add_subcommand("train", "run the progressive training schedule");
  add_common(train, train_f);
  train->add_option("--manifest", train_manifest,
                    "augment or preprocess manifest (optional with --dry-run)");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--max-steps", max_steps, "stop after this many steps");

  auto* gen = app.add_subcommand("generate", "sample volumes from a checkpoint");
  add_common(gen, gen_f);
  gen->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  gen->add_option("--count", count, "number of volumes (generate_count)");
  gen->add_option("--upsample", upsample, "cubic nearest-neighbour target extent");

  auto* selftest = app.add_subcommand("selftest", "run gradient and oracle suites");
  selftest->add_option("--seed", st_opt.seed, "suite seed");
  selftest->add_option("--grad-cases", st_opt.grad_cases, "grad_check cases per layer");
  selftest->add_option("--conv-cases", st_opt.conv_cases, "conv oracle cases");
  selftest->add_option("--inject-pad-fault", st_opt.conv_pad_fault,
                       "shift the kernel padding (mutation check)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) {
      auto cfg = resolve(synth_f);
      if (count) cfg.synth_count = *count;
      validate_or_throw(cfg);
      const auto out = require_out(cfg);
      if (synth_f.dry_run) {
        std::cout << "would write " << cfg.synth_count << " volumes to " << out
                  << "\n";
        return kExitOk;
      }
      for (const auto& p : voxgan::cmd_synthdata(cfg, out)) {
        std::cout << p.string() << "\n";
      }
    } else if (*pre) {
      auto cfg = resolve(pre_f);
      if (!in_dir.empty()) cfg.data_dir = in_dir;
      if (cfg.data_dir.empty()) {
        throw voxgan::ConfigError({"an input directory is required (--in or data_dir)"});
      }
      validate_or_throw(cfg);
      const auto out = require_out(cfg);
      if (pre_f.dry_run) {
        std::cout << voxgan::render_config(cfg);
        return kExitOk;
      }
      std::cout << voxgan::cmd_preprocess(cfg.data_dir, out, cfg).string() << "\n";
    } else if (*aug) {
      auto cfg = resolve(aug_f);
      validate_or_throw(cfg);
      const auto out = require_out(cfg);
      if (aug_f.dry_run) {
        std::cout << voxgan::render_config(cfg);
        return kExitOk;
      }
      std::cout << voxgan::cmd_augment(aug_manifest, out, cfg).string() << "\n";
    } else if (*train) {
      auto cfg = resolve(train_f);
      validate_or_throw(cfg);
      voxgan::TrainOptions opt;
      opt.dry_run = train_f.dry_run;
      if (train_manifest.empty() && !opt.dry_run) {
        std::cerr << "train: --manifest is required\n";
        return kExitUsage;
      }
      opt.max_steps = max_steps;
      if (!resume.empty()) opt.resume = resume;
      const auto out = opt.dry_run && cfg.out_dir.empty()
                           ? voxgan::fs::path()
                           : require_out(cfg);
      const auto result = voxgan::cmd_train(train_manifest, out, cfg, opt);
      if (opt.dry_run) {
        std::cout << result.plan;
      } else {
        std::cout << "steps: " << result.steps
                  << (result.finished ? " (finished)" : " (stopped)") << "\n";
        if (result.final_checkpoint) {
          std::cout << result.final_checkpoint->string() << "\n";
        }
      }
    } else if (*gen) {
      auto cfg = resolve(gen_f);
      if (count) cfg.generate_count = *count;
      if (upsample) cfg.upsample = *upsample;
      validate_or_throw(cfg);
      const auto out = require_out(cfg);
      if (gen_f.dry_run) {
        const auto st = voxgan::load_checkpoint(checkpoint);
        std::cout << "checkpoint at step " << st.step << ", stage "
                  << st.generator.max_stage() << "\n";
        return kExitOk;
      }
      for (const auto& p : voxgan::cmd_generate(checkpoint, out, cfg)) {
        std::cout << p.string() << "\n";
      }
    } else if (*selftest) {
      const auto reports = voxgan::oracle::run_selftest(st_opt);
      voxgan::oracle::print_report(std::cout, reports);
      for (const auto& r : reports) {
        if (!r.passed) return kExitNumeric;
      }
    }
  } catch (const voxgan::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const voxgan::ValueError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const voxgan::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
