#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "voxgan/nets.hpp"
#include "voxgan/rng.hpp"
#include "voxgan/schedule.hpp"
#include "voxgan/tensor.hpp"

namespace voxgan {

struct LossConfig {
  double gp_lambda = 10.0;
  double drift = 0.001;
};

struct AdamConfig {
  double beta1 = 0.0;
  double beta2 = 0.99;
  double epsilon = 1e-8;
};

// Adam moments keyed by parameter name, created lazily on the first step.
struct OptimizerState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::int64_t t = 0;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double epsilon = 1e-8;

  static OptimizerState with(const AdamConfig& cfg);
  void reset();
};

struct GanLosses {
  Tensor loss_d;
  Tensor loss_g;
};

// loss_d = mean(d_fake) - mean(d_real) + lambda * gp + drift * mean(d_real^2)
// loss_g = -mean(d_fake)
// Throws NumericError naming the first non-finite term.
GanLosses wgan_gp_losses(const Tensor& d_real, const Tensor& d_fake,
                         const Tensor& gp, double lambda, double drift);

using Critic = std::function<Tensor(const Tensor&)>;

// mean_b (||grad_x critic(x_hat)||_2 - 1)^2 with x_hat = u*real + (1-u)*fake,
// u ~ U(0,1) drawn per sample. Must run under an active tape; the result is
// differentiable with respect to the critic's parameters.
Tensor gradient_penalty(const Critic& critic, const Tensor& real,
                        const Tensor& fake, Rng& rng);
Tensor gradient_penalty(const NetworkWeights& discriminator,
                        const Tensor& real, const Tensor& fake, int stage,
                        float alpha, Rng& rng);

// Bias-corrected Adam update of every parameter from its grad() (a missing
// gradient counts as zero). Increments state.t once.
void adam_step(NetworkWeights& params, OptimizerState& state, double lr);

// [batch, latent_dim] of i.i.d. standard normal draws.
Tensor sample_latents(Rng& rng, std::int64_t batch, int latent_dim);

struct StepReport {
  std::int64_t step = 0;
  int stage = 0;
  float alpha = 1.0f;
  double learning_rate = 0.0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double d_real_mean = 0.0;
  double d_fake_mean = 0.0;
};

// "step\tstage\talpha\tloss_d\tloss_g"
std::string format_log_line(const StepReport& report);

// Position in the shuffled stream of training volumes. The order within an
// epoch is a pure function of (data_seed, epoch).
struct DataCursor {
  std::uint64_t epoch = 0;
  std::uint64_t position = 0;
};

struct TrainState {
  NetworkWeights generator;
  NetworkWeights discriminator;
  OptimizerState opt_g;
  OptimizerState opt_d;
  TrainSchedule schedule;
  Rng rng;
  std::uint64_t data_seed = 0;
  DataCursor cursor;
  std::int64_t step = 0;
};

struct TrainConfig {
  int n_filters = 128;
  int latent_dim = 128;
  LossConfig loss;
  AdamConfig adam;
  // Initial schedule (target stage, reals per phase, rates, batch sizes).
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  // Emit a checkpoint every N steps in addition to phase ends; 0 disables.
  std::int64_t checkpoint_every = 0;
};

TrainState init_train_state(const TrainConfig& cfg);

// The two halves of train_step at the current schedule stage/alpha/rate.
// Each touches only its own network's weights and optimizer state; both
// consume draws from state.rng and fill their fields of `report`.
void discriminator_update(const Tensor& batch_real, TrainState& state,
                          const LossConfig& loss, StepReport& report);
void generator_update(TrainState& state, std::int64_t batch,
                      StepReport& report);

// One discriminator update followed by one generator update at the current
// schedule stage/alpha/rate, then advances the schedule by the batch size.
StepReport train_step(const Tensor& batch_real, TrainState& state,
                      const LossConfig& loss);

// Writes the state somewhere durable and returns a reference to it (a path).
using CheckpointSink = std::function<std::string(const TrainState&)>;
using StepLogger = std::function<void(const StepReport&)>;

struct RunHooks {
  CheckpointSink checkpoint;
  StepLogger log;
  // Stop (without finishing) once state.step reaches this value; < 0 runs
  // to completion.
  std::int64_t max_steps = -1;
};

// Number of optimization steps one phase takes at the given batch size.
std::int64_t steps_per_phase(std::int64_t reals_per_phase, int batch);

// Per-stage real data, coarsest first: pyramid[s] holds [N,1,R_s,R_s,R_s].
std::vector<Tensor> build_pyramid(const Tensor& dataset, int target_stage);

// Draws the next batch of dataset indices, advancing the cursor.
std::vector<std::int64_t> next_batch_indices(DataCursor& cursor,
                                             std::uint64_t data_seed,
                                             std::int64_t dataset_size,
                                             int batch);

// Trains stages 0..target on `dataset` ([N,1,R,R,R] at or above the target
// resolution). Starts from `resume` when given. Emits checkpoints at every
// phase end and every cfg.checkpoint_every steps.
TrainState run_schedule(const Tensor& dataset, const TrainConfig& cfg,
                        const RunHooks& hooks,
                        std::optional<TrainState> resume = std::nullopt);

}  // namespace voxgan
