#include "voxgan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "voxgan/error.hpp"
#include "voxgan/layers.hpp"
#include "voxgan/ops.hpp"
#include "voxgan/tape.hpp"

namespace voxgan {
namespace {

void require_finite(const Tensor& t, const char* term) {
  if (!all_finite(t)) {
    throw NumericError(std::string("non-finite ") + term);
  }
}

std::vector<std::int64_t> epoch_permutation(std::uint64_t data_seed,
                                            std::uint64_t epoch,
                                            std::int64_t n) {
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(data_seed ^ mix_seed(epoch)));
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(
        rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

Tensor gather(const Tensor& data, const std::vector<std::int64_t>& indices) {
  Shape shape = data.shape();
  const std::int64_t item = data.numel() / shape[0];
  shape[0] = static_cast<std::int64_t>(indices.size());
  std::vector<float> out(static_cast<std::size_t>(numel(shape)));
  auto src = data.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy(src.begin() + indices[i] * item,
              src.begin() + (indices[i] + 1) * item,
              out.begin() + static_cast<std::int64_t>(i) * item);
  }
  return Tensor::from_vector(shape, std::move(out));
}

}  // namespace

OptimizerState OptimizerState::with(const AdamConfig& cfg) {
  OptimizerState s;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.epsilon = cfg.epsilon;
  return s;
}

void OptimizerState::reset() {
  m.clear();
  v.clear();
  t = 0;
}

GanLosses wgan_gp_losses(const Tensor& d_real, const Tensor& d_fake,
                         const Tensor& gp, double lambda, double drift) {
  require_finite(d_real, "d_real score");
  require_finite(d_fake, "d_fake score");
  require_finite(gp, "gradient penalty");
  Tensor real_mean = mean(d_real);
  Tensor fake_mean = mean(d_fake);
  Tensor drift_term = scale(mean(square(d_real)), static_cast<float>(drift));
  require_finite(drift_term, "drift term");
  Tensor penalty = scale(reshape(gp, {}), static_cast<float>(lambda));
  require_finite(penalty, "lambda * gradient penalty");
  GanLosses out;
  out.loss_d = add(add(sub(fake_mean, real_mean), penalty), drift_term);
  out.loss_g = neg(fake_mean);
  require_finite(out.loss_d, "loss_d");
  require_finite(out.loss_g, "loss_g");
  return out;
}

Tensor gradient_penalty(const Critic& critic, const Tensor& real,
                        const Tensor& fake, Rng& rng) {
  if (real.shape() != fake.shape()) {
    throw ShapeError("gradient_penalty: real " + to_string(real.shape()) +
                     " vs fake " + to_string(fake.shape()));
  }
  Tape* tape = active_tape();
  if (!tape || !recording()) {
    throw Error("gradient_penalty: requires an active recording tape");
  }
  const std::int64_t batch = real.dim(0);
  const std::int64_t item = real.numel() / batch;
  const auto r = real.to_vector();
  const auto f = fake.to_vector();
  std::vector<float> mixed(r.size());
  for (std::int64_t b = 0; b < batch; ++b) {
    const float u = static_cast<float>(rng.uniform());
    for (std::int64_t i = b * item; i < (b + 1) * item; ++i) {
      const auto k = static_cast<std::size_t>(i);
      mixed[k] = u * r[k] + (1.0f - u) * f[k];
    }
  }
  Tensor x_hat = Tensor::from_vector(real.shape(), std::move(mixed));
  x_hat.set_requires_grad(true);
  Tensor score = sum(critic(x_hat));
  const Tensor wrt[] = {x_hat};
  Tensor grad = gradients(score, wrt, *tape, /*create_graph=*/true)[0];
  std::vector<int> axes;
  for (int a = 1; a < grad.ndim(); ++a) axes.push_back(a);
  Tensor norm = sqrt(sum(square(grad), axes));
  require_finite(norm, "critic gradient norm");
  return mean(square(add_scalar(norm, -1.0f)));
}

Tensor gradient_penalty(const NetworkWeights& discriminator,
                        const Tensor& real, const Tensor& fake, int stage,
                        float alpha, Rng& rng) {
  return gradient_penalty(
      [&](const Tensor& x) {
        return discriminator_forward(discriminator, x, stage, alpha);
      },
      real, fake, rng);
}

void adam_step(NetworkWeights& params, OptimizerState& state, double lr) {
  if (!(lr > 0.0)) {
    throw ValueError("adam_step: learning rate must be positive, got " +
                     std::to_string(lr));
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, param] : params.entries()) {
    Tensor p = param;
    const Tensor g = p.grad();
    if (g.defined() && !all_finite(g)) {
      throw NumericError("adam_step: non-finite gradient for " + name);
    }
    auto [mit, m_new] = state.m.try_emplace(name, Tensor::zeros(p.shape()));
    auto [vit, v_new] = state.v.try_emplace(name, Tensor::zeros(p.shape()));
    if (mit->second.shape() != p.shape() || vit->second.shape() != p.shape()) {
      throw ShapeError("adam_step: moment shape mismatch for " + name);
    }
    auto w = p.mutable_data();
    auto m = mit->second.mutable_data();
    auto v = vit->second.mutable_data();
    const std::vector<float> grad =
        g.defined() ? g.to_vector() : std::vector<float>(w.size(), 0.0f);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = grad[i];
      const double mi = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      const double vi = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double m_hat = mi / c1;
      const double v_hat = vi / c2;
      w[i] = static_cast<float>(w[i] -
                                lr * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
  }
}

Tensor sample_latents(Rng& rng, std::int64_t batch, int latent_dim) {
  if (batch < 1 || latent_dim < 1) {
    throw ValueError("sample_latents: batch and latent_dim must be >= 1");
  }
  std::vector<float> z(static_cast<std::size_t>(batch * latent_dim));
  for (auto& v : z) v = static_cast<float>(rng.normal());
  return Tensor::from_vector({batch, latent_dim}, std::move(z));
}

std::string format_log_line(const StepReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld\t%d\t%.6f\t%.9g\t%.9g",
                static_cast<long long>(r.step), r.stage,
                static_cast<double>(r.alpha), r.loss_d, r.loss_g);
  return buf;
}

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.schedule.validate();
  StageConfig arch{0, cfg.n_filters, cfg.latent_dim};
  arch.validate();
  TrainState st;
  st.rng = Rng(cfg.seed);
  st.data_seed = mix_seed(cfg.seed ^ 0xDA7A5EEDULL);
  st.generator = build_generator(arch, st.rng);
  st.discriminator = build_discriminator(arch, st.rng);
  st.opt_g = OptimizerState::with(cfg.adam);
  st.opt_d = OptimizerState::with(cfg.adam);
  st.schedule = cfg.schedule;
  return st;
}

void discriminator_update(const Tensor& batch_real, TrainState& st,
                          const LossConfig& loss, StepReport& report) {
  const int stage = st.schedule.stage;
  const float alpha = st.schedule.alpha();
  const std::int64_t batch = batch_real.dim(0);
  const int latent_dim =
      static_cast<int>(st.generator.at("g.base.dense.weight").dim(1));
  Tensor fake;
  {
    NoGradGuard no_grad;
    fake = generator_forward(st.generator,
                             sample_latents(st.rng, batch, latent_dim), stage,
                             alpha);
  }
  st.generator.set_requires_grad(false);
  st.discriminator.set_requires_grad(true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor d_real = discriminator_forward(st.discriminator, batch_real, stage,
                                          alpha);
    Tensor d_fake = discriminator_forward(st.discriminator, fake, stage, alpha);
    Tensor gp = gradient_penalty(st.discriminator, batch_real, fake, stage,
                                 alpha, st.rng);
    GanLosses losses =
        wgan_gp_losses(d_real, d_fake, gp, loss.gp_lambda, loss.drift);
    backward(losses.loss_d, tape);
    report.loss_d = losses.loss_d.item();
    report.d_real_mean = mean(d_real).item();
    report.d_fake_mean = mean(d_fake).item();
  }
  adam_step(st.discriminator, st.opt_d, st.schedule.learning_rate());
  st.discriminator.zero_grad();
  st.discriminator.set_requires_grad(false);
}

void generator_update(TrainState& st, std::int64_t batch, StepReport& report) {
  const int stage = st.schedule.stage;
  const float alpha = st.schedule.alpha();
  const int latent_dim =
      static_cast<int>(st.generator.at("g.base.dense.weight").dim(1));
  st.generator.set_requires_grad(true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor z = sample_latents(st.rng, batch, latent_dim);
    Tensor score = discriminator_forward(
        st.discriminator, generator_forward(st.generator, z, stage, alpha),
        stage, alpha);
    require_finite(score, "generator-step critic score");
    Tensor loss_g = neg(mean(score));
    backward(loss_g, tape);
    report.loss_g = loss_g.item();
  }
  adam_step(st.generator, st.opt_g, st.schedule.learning_rate());
  st.generator.zero_grad();
  st.generator.set_requires_grad(false);
}

StepReport train_step(const Tensor& batch_real, TrainState& st,
                      const LossConfig& loss) {
  TrainSchedule& sched = st.schedule;
  if (sched.finished) throw ValueError("train_step: schedule finished");
  const std::int64_t r = sched.resolution();
  if (batch_real.ndim() != 5 || batch_real.dim(1) != 1 ||
      batch_real.dim(2) != r || batch_real.dim(3) != r ||
      batch_real.dim(4) != r) {
    throw ShapeError("train_step: stage " + std::to_string(sched.stage) +
                     " expects [B,1," + std::to_string(r) + "^3] reals, got " +
                     to_string(batch_real.shape()));
  }
  const std::int64_t batch = batch_real.dim(0);

  StepReport report;
  report.step = st.step;
  report.stage = sched.stage;
  report.alpha = sched.alpha();
  report.learning_rate = sched.learning_rate();
  discriminator_update(batch_real, st, loss, report);
  generator_update(st, batch, report);
  sched.advance(batch);
  ++st.step;
  return report;
}

std::int64_t steps_per_phase(std::int64_t reals_per_phase, int batch) {
  return (reals_per_phase + batch - 1) / batch;
}

std::vector<Tensor> build_pyramid(const Tensor& dataset, int target_stage) {
  const std::int64_t target = StageConfig::resolution_of(target_stage);
  if (dataset.ndim() != 5 || dataset.dim(1) != 1 ||
      dataset.dim(2) != dataset.dim(3) || dataset.dim(2) != dataset.dim(4)) {
    throw DataError("dataset must be [N,1,R,R,R], got " +
                    to_string(dataset.shape()));
  }
  std::int64_t res = dataset.dim(2);
  if (res < target) {
    throw DataError("dataset resolution " + std::to_string(res) +
                    " is below the target resolution " +
                    std::to_string(target));
  }
  std::int64_t multiple = res / target;
  if (res % target != 0 || (multiple & (multiple - 1)) != 0) {
    throw DataError("dataset resolution " + std::to_string(res) +
                    " is not a power-of-two multiple of " +
                    std::to_string(target));
  }
  Tensor level = dataset.contiguous();
  NoGradGuard no_grad;
  for (; multiple > 1; multiple /= 2) level = downsample_avg_2x(level);
  std::vector<Tensor> pyramid(static_cast<std::size_t>(target_stage + 1));
  pyramid[static_cast<std::size_t>(target_stage)] = level;
  for (int s = target_stage - 1; s >= 0; --s) {
    pyramid[static_cast<std::size_t>(s)] =
        downsample_avg_2x(pyramid[static_cast<std::size_t>(s + 1)]);
  }
  return pyramid;
}

std::vector<std::int64_t> next_batch_indices(DataCursor& cursor,
                                             std::uint64_t data_seed,
                                             std::int64_t dataset_size,
                                             int batch) {
  if (dataset_size < 1) throw DataError("empty dataset");
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(batch));
  auto perm = epoch_permutation(data_seed, cursor.epoch, dataset_size);
  for (int i = 0; i < batch; ++i) {
    if (cursor.position >= static_cast<std::uint64_t>(dataset_size)) {
      ++cursor.epoch;
      cursor.position = 0;
      perm = epoch_permutation(data_seed, cursor.epoch, dataset_size);
    }
    out.push_back(perm[cursor.position++]);
  }
  return out;
}

TrainState run_schedule(const Tensor& dataset, const TrainConfig& cfg,
                        const RunHooks& hooks,
                        std::optional<TrainState> resume) {
  const int target = cfg.schedule.target_stage;
  const std::vector<Tensor> pyramid = build_pyramid(dataset, target);
  TrainState st = resume ? std::move(*resume) : init_train_state(cfg);
  if (st.schedule.target_stage != target) {
    throw ValueError("resumed state targets stage " +
                     std::to_string(st.schedule.target_stage) +
                     " but the configuration targets " +
                     std::to_string(target));
  }
  const std::int64_t n = dataset.dim(0);
  std::string last_checkpoint;

  while (!st.schedule.finished) {
    if (hooks.max_steps >= 0 && st.step >= hooks.max_steps) break;
    const int stage = st.schedule.stage;
    if (st.generator.max_stage() < stage) {
      // Growth draws from the training generator, so a resumed run grows
      // identically.
      grow_generator(st.generator, stage, cfg.n_filters, st.rng);
      grow_discriminator(st.discriminator, stage, cfg.n_filters, st.rng);
      st.opt_g.reset();
      st.opt_d.reset();
    }
    const int batch = st.schedule.batch_size();
    const auto indices = next_batch_indices(st.cursor, st.data_seed, n, batch);
    const Tensor reals =
        gather(pyramid[static_cast<std::size_t>(stage)], indices);

    StepReport report;
    const Phase phase_before = st.schedule.phase;
    try {
      report = train_step(reals, st, cfg.loss);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " +
                         std::to_string(st.step) + "; last good checkpoint: " +
                         (last_checkpoint.empty() ? "<none>" : last_checkpoint));
    }
    if (hooks.log) hooks.log(report);

    const bool phase_end = st.schedule.finished ||
                           st.schedule.stage != stage ||
                           st.schedule.phase != phase_before;
    const bool periodic =
        cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0;
    if (hooks.checkpoint && (phase_end || periodic)) {
      last_checkpoint = hooks.checkpoint(st);
    }
  }
  return st;
}

}  // namespace voxgan
