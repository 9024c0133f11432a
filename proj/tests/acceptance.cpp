// Acceptance runner: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "voxgan/augment.hpp"
#include "voxgan/checkpoint.hpp"
#include "voxgan/log.hpp"
#include "voxgan/nets.hpp"
#include "voxgan/nifti.hpp"
#include "voxgan/ops.hpp"
#include "voxgan/synth.hpp"
#include "voxgan/tape.hpp"
#include "voxgan/trainer.hpp"
#include "voxgan_oracle/grad_suite.hpp"
#include "voxgan_oracle/selftest.hpp"

using namespace voxgan;
namespace ref = voxgan::oracle;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_rel(const std::vector<float>& got, const std::vector<float>& want) {
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    scale = std::max(scale, std::abs(static_cast<double>(want[i])));
    err = std::max(err, std::abs(static_cast<double>(got[i]) - want[i]));
  }
  return err / std::max(scale, 1e-30);
}

Tensor latents(std::int64_t b, int dim, std::uint64_t seed) {
  Rng rng(seed);
  return sample_latents(rng, b, dim);
}

struct SmokeSettings {
  int n_filters = 8;
  int latent_dim = 32;
  std::int64_t steps = 2000;
  std::int64_t dataset = 64;
  std::uint64_t seed = 2024;
};

TrainConfig smoke_config(const SmokeSettings& s) {
  TrainConfig cfg;
  cfg.n_filters = s.n_filters;
  cfg.latent_dim = s.latent_dim;
  cfg.seed = s.seed;
  cfg.schedule.target_stage = 2;
  cfg.schedule.batch_sizes = {4};
  // stage 0 stabilizes, stages 1 and 2 fade in and stabilize: 5 phases.
  cfg.schedule.reals_per_phase = s.steps * 4 / 5;
  return cfg;
}

// Shared by criteria 6 and 9.
struct SmokeRun {
  bool ran = false;
  TrainState state;
  std::string bytes;
  double seconds = 0.0;
};

Outcome criterion1() {
  Outcome o;
  const auto t0 = Clock::now();
  const int cases = 20;
  double layer = 0.0, network = 0.0;
  int min_cases = cases;
  for (const auto& r : ref::layer_grad_suite(cases, 1)) {
    layer = std::max(layer, r.max_rel_error);
    min_cases = std::min(min_cases, r.cases);
  }
  for (const auto& r : ref::network_grad_suite(cases, 2)) {
    network = std::max(network, r.max_rel_error);
    min_cases = std::min(min_cases, r.cases);
  }
  const auto gp = ref::gradient_penalty_grad_suite(cases, 3);
  network = std::max(network, gp.max_rel_error);
  min_cases = std::min(min_cases, gp.cases);
  const double secs = seconds_since(t0);
  o.require(min_cases >= 20, "cases per suite " + std::to_string(min_cases));
  o.require(layer < 1e-3, fmt("layers max rel %.3g < 1e-3", layer));
  o.require(network < 1e-2, fmt("networks max rel %.3g < 1e-2", network));
  o.require(secs < 600.0, fmt("%.1f s < 600 s", secs));
  return o;
}

Outcome criterion2() {
  Outcome o;
  ref::SelftestOptions opt;
  opt.conv_cases = 60;
  const auto r = ref::conv_oracle_suite(opt);
  o.require(r.passed && r.max_error <= 1e-5,
            fmt("60 cases, max rel %.3g <= 1e-5", r.max_error));
  opt.conv_pad_fault = 1;
  o.require(!ref::conv_oracle_suite(opt).passed, "off-by-one padding caught");
  return o;
}

Outcome criterion3() {
  Outcome o;
  Rng rng(3);
  const StageConfig cfg{3, 8, 16};
  const NetworkWeights g = build_generator(cfg, rng);
  const NetworkWeights d = build_discriminator(cfg, rng);
  NoGradGuard guard;
  int checked = 0;
  bool ok = true;
  for (int s = 0; s <= 3; ++s) {
    const std::int64_t r = 4 << s;
    for (std::int64_t b : {1, 2, 4}) {
      const Tensor x = generator_forward(g, latents(b, 16, 1), s, 1.0f);
      ok = ok && x.shape() == Shape{b, 1, r, r, r};
      ok = ok && discriminator_forward(d, x, s, 1.0f).shape() == Shape{b, 1};
      ++checked;
    }
  }
  o.require(ok, std::to_string(checked) + " (stage, batch) pairs, 4^3 .. 32^3");
  return o;
}

Outcome criterion4() {
  Outcome o;
  Rng rng(4);
  const StageConfig cfg{3, 8, 16};
  const NetworkWeights g = build_generator(cfg, rng);
  const NetworkWeights d = build_discriminator(cfg, rng);
  NoGradGuard guard;
  const Tensor z = latents(2, 16, 5);
  double worst_g = 0.0, worst_d = 0.0;
  for (int s = 1; s <= 3; ++s) {
    worst_g = std::max(worst_g, max_rel(generator_forward(g, z, s, 0.0f).to_vector(),
                                        upsample_nearest_2x(generator_forward(g, z, s - 1, 1.0f))
                                            .to_vector()));
    const Tensor x = generator_forward(g, z, s, 1.0f);
    worst_d = std::max(worst_d,
                       max_rel(discriminator_forward(d, x, s, 0.0f).to_vector(),
                               discriminator_forward(d, downsample_avg_2x(x), s - 1, 1.0f)
                                   .to_vector()));
  }
  o.require(worst_g <= 1e-6, fmt("generator rel %.3g <= 1e-6", worst_g));
  o.require(worst_d <= 1e-6, fmt("discriminator rel %.3g <= 1e-6", worst_d));
  return o;
}

Outcome criterion5() {
  Outcome o;
  TrainConfig cfg;
  cfg.n_filters = 4;
  cfg.latent_dim = 8;
  cfg.seed = 5;
  cfg.schedule.target_stage = 2;
  cfg.schedule.reals_per_phase = 64;
  cfg.schedule.batch_sizes = {4};
  std::vector<StepReport> log;
  RunHooks hooks;
  hooks.log = [&](const StepReport& r) { log.push_back(r); };
  const TrainState st = run_schedule(make_blob_dataset(8, 16, 5), cfg, hooks);
  // ceil(64 / 4) steps per phase; one phase at stage 0, two at each later stage.
  const std::int64_t closed_form = (64 + 3) / 4 * (1 + 2 * 2);
  o.require(st.step == 80 && closed_form == 80 && st.schedule.finished,
            std::to_string(st.step) + " steps, closed form " + std::to_string(closed_form));
  bool linear = true;
  for (int stage = 1; stage <= 2; ++stage) {
    int i = 0;
    for (const auto& r : log) {
      if (r.stage != stage) continue;
      const float want = i < 16 ? static_cast<float>(i) * 4.0f / 64.0f : 1.0f;
      linear = linear && std::abs(r.alpha - want) <= 1e-7f;
      ++i;
    }
    linear = linear && i == 32;
  }
  o.require(linear, "alpha = 0, 1/16, ..., 15/16 in each fade, 1 when stable");
  return o;
}

SmokeRun run_smoke(const SmokeSettings& s, const RunHooks& hooks,
                   std::optional<TrainState> resume = std::nullopt) {
  SmokeRun run;
  const auto t0 = Clock::now();
  run.state = run_schedule(make_blob_dataset(s.dataset, 16, s.seed), smoke_config(s), hooks,
                           std::move(resume));
  run.seconds = seconds_since(t0);
  run.bytes = serialize_checkpoint(run.state);
  run.ran = true;
  return run;
}

Outcome criterion6(const SmokeSettings& s, SmokeRun& first) {
  Outcome o;
  first = run_smoke(s, {});
  o.require(first.state.step == s.steps && first.state.schedule.finished,
            std::to_string(first.state.step) + " steps, f=" + std::to_string(s.n_filters) +
                ", latent " + std::to_string(s.latent_dim));
  o.require(first.seconds < 1800.0, fmt("%.0f s on this host < 1800 s", first.seconds));
  const Tensor data = make_blob_dataset(s.dataset, 16, s.seed);
  const ValueRange range = value_range(data.to_vector());
  NoGradGuard guard;
  const auto v = generator_forward(first.state.generator, latents(16, s.latent_dim, 99), 2, 1.0f)
                     .to_vector();
  const std::size_t n = 16 * 16 * 16;
  double std_sum = 0.0;
  float lo = v[0], hi = v[0];
  for (std::size_t j = 0; j < n; ++j) {
    double m = 0.0, q = 0.0;
    for (std::size_t b = 0; b < 16; ++b) {
      const double x = v[b * n + j];
      m += x;
      q += x * x;
    }
    m /= 16.0;
    std_sum += std::sqrt(std::max(0.0, q / 16.0 - m * m));
  }
  for (float x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double mean_std = std_sum / static_cast<double>(n);
  const double floor = 0.01 * (range.max - range.min);
  o.require(mean_std > floor, fmt("per-voxel std %.4g", mean_std) + fmt(" > %.4g", floor));
  o.require(lo >= -1.5f && hi <= 1.5f,
            fmt("outputs in [%.3f", lo) + fmt(", %.3f] within [-1.5, 1.5]", hi));
  return o;
}

Outcome criterion7() {
  Outcome o;
  Rng rng(7);
  double sum[3] = {}, sq[3] = {};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Rotation r = sample_rotation(rng);
    const double v[3] = {r.x_deg, r.y_deg, r.z_deg};
    for (int k = 0; k < 3; ++k) {
      sum[k] += v[k];
      sq[k] += v[k] * v[k];
    }
  }
  std::string sds;
  bool in_band = true;
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / n;
    const double sd = std::sqrt((sq[k] - n * mean * mean) / (n - 1));
    in_band = in_band && sd >= 9.5 && sd <= 10.5;
    sds += fmt(k == 0 ? "%.3f" : "/%.3f", sd);
  }
  o.require(in_band, "stddev x/y/z " + sds + " deg in [9.5, 10.5]");
  std::vector<std::string> sources;
  for (int i = 0; i < 900; ++i) sources.push_back("subject_" + std::to_string(i) + ".nii.gz");
  std::set<std::string> outputs;
  AugmentOptions opt;
  opt.seed = 7;
  const auto recs = build_augmented_dataset(
      sources,
      [](std::size_t) {
        Volume v = Volume::zeros({2, 2, 2});
        v.data = {0, 1, 2, 3, 4, 5, 6, 7};
        return v;
      },
      opt, [&](const AugmentRecord& r, const Volume&) { outputs.insert(r.output); });
  o.require(recs.size() == 9000 && outputs.size() == 9000,
            "900 inputs -> " + std::to_string(outputs.size()) + " distinct outputs");
  return o;
}

template <typename T>
void poke(std::string& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

Outcome criterion8() {
  Outcome o;
  ScratchDir dir("acceptance_io");
  Volume v = Volume::zeros({13, 17, 11});
  Rng rng(8);
  for (auto& x : v.data) x = static_cast<float>(rng.normal(0.0, 1000.0));
  v.data[0] = -0.0f;
  v.data[1] = 1e-42f;
  bool exact = true;
  for (const char* name : {"rt.nii", "rt.nii.gz"}) {
    write_nifti(v, dir / name);
    const Volume back = read_nifti(dir / name);
    exact = exact && back.dims == v.dims &&
            std::memcmp(back.data.data(), v.data.data(), v.data.size() * 4) == 0;
  }
  o.require(exact, "plain and gzip round trips bit-identical");

  // Hand-built 2x2x2 float32 file.
  std::string g(352 + 32, '\0');
  poke<std::int32_t>(g, 0, 348);
  const std::int16_t dim[8] = {3, 2, 2, 2, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) poke(g, 40 + 2 * i, dim[i]);
  poke<std::int16_t>(g, 70, 16);
  poke<std::int16_t>(g, 72, 32);
  for (int i = 0; i < 4; ++i) poke(g, 76 + 4 * i, i == 0 ? 1.0f : 0.7f);
  poke(g, 108, 352.0f);
  std::memcpy(g.data() + 344, "n+1\0", 4);
  for (int i = 0; i < 8; ++i) poke(g, 352 + 4 * i, static_cast<float>(i * i));
  const Volume gv = decode_nifti(g);
  bool golden = gv.dims == Dims3{2, 2, 2} && std::abs(gv.voxel_size_mm[1] - 0.7) < 1e-6;
  for (int i = 0; i < 8; ++i) golden = golden && gv.at(i >> 2, (i >> 1) & 1, i & 1) == i * i;
  o.require(golden, "golden 2x2x2 file parses");

  const std::int64_t n = 7;
  Volume cube = Volume::zeros({n, n, n});
  for (auto& x : cube.data) x = static_cast<float>(rng.uniform());
  const Volume r = resample_trilinear(cube, Rotation{0, 0, 90});
  double worst = 0.0;
  for (std::int64_t d = 0; d < n; ++d)
    for (std::int64_t h = 0; h < n; ++h)
      for (std::int64_t w = 0; w < n; ++w) {
        worst = std::max(worst, static_cast<double>(std::abs(r.at(d, h, w) - cube.at(d, n - 1 - w, h))));
      }
  o.require(worst <= 1e-5, fmt("90 deg rotation max abs %.3g <= 1e-5", worst));
  return o;
}

Outcome criterion9(const SmokeSettings& s, SmokeRun& first) {
  Outcome o;
  if (!first.ran) first = run_smoke(s, {});
  const SmokeRun again = run_smoke(s, {});
  o.require(again.bytes == first.bytes,
            "two uninterrupted runs give identical " + std::to_string(first.bytes.size()) +
                "-byte checkpoints");
  // Interrupted run: stop halfway, round-trip through the checkpoint format,
  // resume.
  const std::int64_t cut = s.steps / 2;
  RunHooks stop;
  stop.max_steps = cut;
  const SmokeRun part = run_smoke(s, stop);
  const SmokeRun resumed = run_smoke(s, {}, deserialize_checkpoint(part.bytes));
  o.require(resumed.bytes == first.bytes,
            "interrupt at step " + std::to_string(cut) + " + resume identical");
  return o;
}

Outcome criterion10() {
  Outcome o;
  const double grads[] = {1.0, -2.0, 0.5};
  const double lr = 0.01, beta2 = 0.99, eps = 1e-8;
  NetworkWeights p;
  p.add("g.base.dense.bias", Tensor::from_vector({1}, {0.0f}));
  OptimizerState st;
  double w = 0.0, v = 0.0, worst = 0.0;
  for (int t = 1; t <= 3; ++t) {
    Tensor& param = p.at("g.base.dense.bias");
    param.zero_grad();
    param.accumulate_grad(Tensor::full({1}, static_cast<float>(grads[t - 1])));
    adam_step(p, st, lr);
    v = beta2 * v + (1 - beta2) * grads[t - 1] * grads[t - 1];
    w -= lr * grads[t - 1] / (std::sqrt(v / (1 - std::pow(beta2, t))) + eps);
    worst = std::max(worst, std::abs(param.item() - w));
  }
  o.require(worst <= 1e-7, fmt("t=1..3 max abs %.3g <= 1e-7", worst));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxgan acceptance criteria"};
  std::vector<int> only;
  SmokeSettings smoke;
  app.add_option("--only", only, "Criteria to run (default: all)");
  app.add_option("--smoke-filters", smoke.n_filters, "Filters for the smoke runs");
  app.add_option("--smoke-latent", smoke.latent_dim, "Latent size for the smoke runs");
  app.add_option("--smoke-steps", smoke.steps, "Steps per smoke run (multiple of 5)");
  CLI11_PARSE(app, argc, argv);
  set_log_level(LogLevel::warning);

  SmokeRun first;
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1},
      {2, criterion2},
      {3, criterion3},
      {4, criterion4},
      {5, criterion5},
      {6, [&] { return criterion6(smoke, first); }},
      {7, criterion7},
      {8, criterion8},
      {9, [&] { return criterion9(smoke, first); }},
      {10, criterion10},
  };
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s  %s  (%.1f s)\n", id, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
