#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voxgan/error.hpp"
#include "voxgan/schedule.hpp"
#include "voxgan/trainer.hpp"
#include "voxgan/volume.hpp"

namespace voxgan {

// Invalid configuration; what() lists every problem, one per line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct RunConfig {
  std::string data_dir;
  std::string out_dir;

  int target_stage = 3;
  std::int64_t reals_per_phase = 1'000'000;
  std::vector<int> batch_sizes{16, 16, 8, 4};
  std::vector<double> lr_table{3e-4, 3e-4, 6e-4, 6e-4};
  std::optional<LateLearningRate> late_lr = LateLearningRate{};
  int latent_dim = 128;
  int n_filters = 128;
  // No default: runs must name their seed.
  std::optional<std::uint64_t> seed;
  std::int64_t checkpoint_every = 0;

  double gp_lambda = 10.0;
  double drift = 0.001;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  double adam_epsilon = 1e-8;

  int augment_k = 10;
  double augment_sigma = 10.0;

  Dims3 crop{128, 128, 128};
  // Volumes held out for evaluation, taken from the end of the sorted list.
  int eval_count = 0;

  int synth_count = 8;
  Dims3 synth_dims{260, 311, 260};

  int generate_count = 3;
  // Cubic upsampling target for generated volumes; 0 keeps native size.
  std::int64_t upsample = 0;
};

// Applies one key=value assignment; throws ConfigError for unknown keys or
// malformed values.
void set_config_value(RunConfig& cfg, std::string_view key,
                      std::string_view value);

// Flat "key = value" lines; '#' starts a comment. All problems are reported
// together.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::string& path, RunConfig base = {});

// Every key with its resolved value, in a form parse_config accepts.
std::string render_config(const RunConfig& cfg);

std::vector<std::string> config_problems(const RunConfig& cfg);
void validate_config(const RunConfig& cfg);

TrainConfig to_train_config(const RunConfig& cfg);

}  // namespace voxgan
