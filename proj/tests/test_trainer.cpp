#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <set>
#include <string_view>

#include "voxgan/checkpoint.hpp"
#include "voxgan/error.hpp"
#include "voxgan/ops.hpp"
#include "voxgan/synth.hpp"
#include "voxgan/tape.hpp"
#include "voxgan/trainer.hpp"

using namespace voxgan;

namespace {

NetworkWeights single(float w) {
  NetworkWeights p;
  p.add("g.base.dense.bias", Tensor::from_vector({1}, {w}));
  return p;
}

TrainConfig tiny_config(int target, std::int64_t reals_per_phase) {
  TrainConfig cfg;
  cfg.n_filters = 4;
  cfg.latent_dim = 8;
  cfg.seed = 21;
  cfg.schedule.target_stage = target;
  cfg.schedule.reals_per_phase = reals_per_phase;
  cfg.schedule.batch_sizes = {4};
  return cfg;
}

void expect_same_weights(const NetworkWeights& a, const NetworkWeights& b) {
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, t] : a.entries()) {
    EXPECT_EQ(t.to_vector(), b.at(name).to_vector()) << name;
  }
}

std::size_t weights_hash(const NetworkWeights& w) {
  std::string bytes;
  for (const auto& [name, t] : w.entries()) {
    const auto v = t.to_vector();
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
  }
  return std::hash<std::string_view>{}(bytes);
}

}  // namespace

TEST(Losses, WganGpClosedForm) {
  const Tensor real = Tensor::from_vector({2, 1}, {1, 3});
  const Tensor fake = Tensor::from_vector({2, 1}, {0, 2});
  const GanLosses l = wgan_gp_losses(real, fake, Tensor::scalar(0.5f), 10.0, 0.001);
  // (1 - 2) + 10 * 0.5 + 0.001 * (1 + 9) / 2
  EXPECT_NEAR(l.loss_d.item(), 4.005, 1e-6);
  EXPECT_FLOAT_EQ(l.loss_g.item(), -1.0f);
}

TEST(Losses, NonFiniteTermIsNamed) {
  const Tensor ok = Tensor::from_vector({1, 1}, {1});
  const Tensor bad = Tensor::from_vector({1, 1}, {std::nanf("")});
  try {
    wgan_gp_losses(ok, bad, Tensor::scalar(0.0f), 10.0, 0.001);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("d_fake"), std::string::npos);
  }
}

TEST(GradientPenalty, LinearCriticHasClosedForm) {
  // critic(x)_b = <w, x_b>, so grad_x is w for every interpolate.
  Tensor w = Tensor::from_vector({1, 1, 1, 1, 3}, {0.6f, 1.2f, -0.4f});
  w.set_requires_grad(true);
  const Tensor real = Tensor::full({2, 1, 1, 1, 3}, 1.0f);
  const Tensor fake = Tensor::full({2, 1, 1, 1, 3}, -1.0f);
  Rng rng(5);
  Tape tape;
  TapeScope scope(tape);
  const Critic critic = [&](const Tensor& x) {
    return sum(mul(x, expand(w, x.shape())), {1, 2, 3, 4});
  };
  const Tensor gp = gradient_penalty(critic, real, fake, rng);
  const double norm = std::sqrt(0.36 + 1.44 + 0.16);
  EXPECT_NEAR(gp.item(), (norm - 1) * (norm - 1), 1e-6);
  backward(gp, tape);
  const auto g = w.grad().to_vector();
  const double wv[] = {0.6, 1.2, -0.4};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], 2 * (norm - 1) * wv[i] / norm, 1e-5);
}

TEST(GradientPenalty, RequiresTapeAndMatchingShapes) {
  Rng rng(1);
  const Critic critic = [](const Tensor& x) { return sum(x, {1}); };
  EXPECT_THROW(gradient_penalty(critic, Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), rng),
               Error);
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(gradient_penalty(critic, Tensor::zeros({1, 2}), Tensor::zeros({1, 3}), rng),
               ShapeError);
}

TEST(Adam, FirstStepClosedForm) {
  NetworkWeights p = single(0.0f);
  OptimizerState st;
  p.at("g.base.dense.bias").accumulate_grad(Tensor::full({1}, 1.0f));
  adam_step(p, st, 0.01);
  EXPECT_NEAR(p.at("g.base.dense.bias").item(), -0.01, 1e-9);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, ThreeStepsMatchHandComputation) {
  const double beta2 = 0.99, eps = 1e-8, lr = 0.01;
  const double grads[] = {1.0, -2.0, 0.5};
  NetworkWeights p = single(0.25f);
  OptimizerState st;
  double w = 0.25, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    Tensor& param = p.at("g.base.dense.bias");
    param.zero_grad();
    param.accumulate_grad(Tensor::full({1}, static_cast<float>(grads[t - 1])));
    adam_step(p, st, lr);
    // beta1 = 0: the first moment is the current gradient.
    v = beta2 * v + (1 - beta2) * grads[t - 1] * grads[t - 1];
    const double v_hat = v / (1 - std::pow(beta2, t));
    w -= lr * grads[t - 1] / (std::sqrt(v_hat) + eps);
    EXPECT_NEAR(param.item(), w, 1e-7) << "t=" << t;
  }
}

TEST(Adam, ZeroGradientKeepsParametersAndDecaysMoments) {
  NetworkWeights p = single(1.0f);
  OptimizerState st;
  p.at("g.base.dense.bias").accumulate_grad(Tensor::full({1}, 2.0f));
  adam_step(p, st, 0.01);
  const float after_first = p.at("g.base.dense.bias").item();
  const float v1 = st.v.at("g.base.dense.bias").item();
  p.zero_grad();
  adam_step(p, st, 0.01);
  EXPECT_EQ(p.at("g.base.dense.bias").item(), after_first);
  EXPECT_FLOAT_EQ(st.v.at("g.base.dense.bias").item(), 0.99f * v1);
}

TEST(Adam, RejectsNonPositiveRate) {
  NetworkWeights p = single(0.0f);
  OptimizerState st;
  EXPECT_THROW(adam_step(p, st, 0.0), ValueError);
  EXPECT_THROW(adam_step(p, st, -1.0), ValueError);
  EXPECT_THROW(adam_step(p, st, std::nan("")), ValueError);
}

TEST(Schedule, EightyStepsToSixteenCubed) {
  TrainSchedule s;
  s.target_stage = 2;
  s.reals_per_phase = 64;
  s.batch_sizes = {4};
  int steps = 0;
  while (!s.finished) {
    s.advance(s.batch_size());
    ++steps;
  }
  // stage 0 stabilizes only; stages 1 and 2 fade in and stabilize.
  EXPECT_EQ(steps, (1 + 2 * 2) * 64 / 4);
  EXPECT_EQ(steps_per_phase(64, 4), 16);
  EXPECT_EQ(steps_per_phase(65, 4), 17);
}

TEST(Schedule, AlphaIsLinearInFadeAndOneWhenStable) {
  TrainSchedule s;
  s.target_stage = 1;
  s.reals_per_phase = 10;
  s.batch_sizes = {2};
  EXPECT_EQ(s.alpha(), 1.0f);
  while (s.stage == 0) s.advance(2);
  ASSERT_EQ(s.phase, Phase::fade_in);
  for (int i = 0; i < 5; ++i) {
    EXPECT_FLOAT_EQ(s.alpha(), 0.2f * static_cast<float>(i));
    s.advance(2);
  }
  EXPECT_EQ(s.phase, Phase::stabilize);
  EXPECT_EQ(s.alpha(), 1.0f);
}

TEST(Schedule, EventsFollowPhaseOrder) {
  TrainSchedule s;
  s.target_stage = 1;
  s.reals_per_phase = 4;
  EXPECT_EQ(s.advance(4), ScheduleEvent::stage_started);
  EXPECT_EQ(s.advance(3), ScheduleEvent::none);
  EXPECT_EQ(s.advance(3), ScheduleEvent::phase_completed);
  EXPECT_EQ(s.reals_shown_in_phase, 0);
  EXPECT_EQ(s.advance(4), ScheduleEvent::finished);
  EXPECT_THROW(s.advance(1), ValueError);
}

TEST(Schedule, LearningRatesPerStageAndLateOverride) {
  TrainSchedule s;
  s.target_stage = 3;
  s.reals_per_phase = 100;
  const double want[] = {3e-4, 3e-4, 6e-4, 6e-4};
  while (s.stage < 3 || s.phase != Phase::stabilize) {
    EXPECT_DOUBLE_EQ(s.learning_rate(), want[s.stage]);
    s.advance(25);
  }
  EXPECT_DOUBLE_EQ(s.learning_rate(), 6e-4);
  s.advance(74);
  EXPECT_DOUBLE_EQ(s.learning_rate(), 6e-4);
  s.advance(1);
  EXPECT_DOUBLE_EQ(s.learning_rate(), 1e-4);
  s.late_lr.reset();
  EXPECT_DOUBLE_EQ(s.learning_rate(), 6e-4);
}

TEST(Schedule, ProblemsAreListed) {
  TrainSchedule s;
  s.reals_per_phase = 0;
  s.lr_table = {};
  s.batch_sizes = {0};
  EXPECT_GE(s.problems().size(), 3u);
  EXPECT_THROW(s.validate(), Error);
  EXPECT_TRUE(TrainSchedule{}.problems().empty());
}

TEST(DataOrder, EpochsArePermutationsAndReproducible) {
  DataCursor a, b;
  std::vector<std::int64_t> first, second;
  for (int i = 0; i < 4; ++i) {
    auto x = next_batch_indices(a, 77, 6, 3);
    auto y = next_batch_indices(b, 77, 6, 3);
    EXPECT_EQ(x, y);
    first.insert(first.end(), x.begin(), x.end());
  }
  EXPECT_EQ(std::set<std::int64_t>(first.begin(), first.begin() + 6).size(), 6u);
  EXPECT_EQ(std::set<std::int64_t>(first.begin() + 6, first.end()).size(), 6u);
  EXPECT_EQ(a.epoch, 1u);
  DataCursor c;
  EXPECT_NE(next_batch_indices(c, 78, 1000, 8), std::vector<std::int64_t>(first.begin(), first.begin() + 8));
  EXPECT_THROW(next_batch_indices(c, 1, 0, 1), DataError);
}

TEST(Pyramid, LevelsAreBlockMeans) {
  const Tensor data = make_blob_dataset(3, 16, 4);
  const auto p = build_pyramid(data, 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1].shape(), (Shape{3, 1, 8, 8, 8}));
  EXPECT_EQ(p[0].shape(), (Shape{3, 1, 4, 4, 4}));
  double total = 0.0, coarse = 0.0;
  for (float v : data.to_vector()) total += v;
  for (float v : p[0].to_vector()) coarse += v;
  EXPECT_NEAR(total / 4096.0, coarse / 64.0, 1e-3);
  EXPECT_THROW(build_pyramid(Tensor::zeros({1, 1, 4, 4, 4}), 1), DataError);
  EXPECT_THROW(build_pyramid(Tensor::zeros({1, 1, 12, 12, 12}), 1), DataError);
  EXPECT_THROW(build_pyramid(Tensor::zeros({1, 1, 8, 8, 4}), 0), DataError);
}

TEST(TrainStep, CriticStepLeavesGeneratorGradientsEmpty) {
  TrainState st = init_train_state(tiny_config(0, 8));
  const Tensor reals = make_blob_dataset(2, 4, 1);
  Rng rng(3);
  st.discriminator.set_requires_grad(true);
  Tape tape;
  TapeScope scope(tape);
  Tensor fake;
  {
    NoGradGuard guard;
    fake = generator_forward(st.generator, sample_latents(rng, 2, 8), 0, 1.0f);
  }
  const Tensor gp = gradient_penalty(st.discriminator, reals, fake, 0, 1.0f, rng);
  backward(wgan_gp_losses(discriminator_forward(st.discriminator, reals, 0, 1.0f),
                          discriminator_forward(st.discriminator, fake, 0, 1.0f), gp,
                          10.0, 0.001)
               .loss_d,
           tape);
  for (const auto& [name, t] : st.generator.entries()) EXPECT_FALSE(t.grad().defined()) << name;
  for (const auto& [name, t] : st.discriminator.entries()) EXPECT_TRUE(t.grad().defined()) << name;
}

TEST(TrainStep, EachUpdateTouchesOnlyItsOwnNetwork) {
  TrainState st = init_train_state(tiny_config(0, 8));
  const Tensor reals = make_blob_dataset(4, 4, 2);
  StepReport report;
  const std::size_t g0 = weights_hash(st.generator), d0 = weights_hash(st.discriminator);
  discriminator_update(reals, st, LossConfig{}, report);
  const std::size_t d1 = weights_hash(st.discriminator);
  EXPECT_EQ(weights_hash(st.generator), g0);
  EXPECT_NE(d1, d0);
  EXPECT_EQ(st.opt_g.t, 0);
  generator_update(st, 4, report);
  EXPECT_EQ(weights_hash(st.discriminator), d1);
  EXPECT_NE(weights_hash(st.generator), g0);
  EXPECT_EQ(st.opt_d.t, 1);
  EXPECT_EQ(st.opt_g.t, 1);
}

TEST(TrainStep, BackwardGivesBitIdenticalGradientsAcrossRuns) {
  Rng init(11);
  const NetworkWeights g0 = build_generator({1, 4, 8}, init);
  const NetworkWeights d0 = build_discriminator({1, 4, 8}, init);
  const Tensor reals = make_blob_dataset(3, 8, 4);
  auto gradients = [&] {
    NetworkWeights d = d0.clone();
    NetworkWeights g = g0.clone();
    Rng rng(12);
    g.set_requires_grad(true);
    d.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    const Tensor fake = generator_forward(g, sample_latents(rng, 3, 8), 1, 0.4f);
    const Tensor gp = gradient_penalty(d, reals, fake, 1, 0.4f, rng);
    backward(wgan_gp_losses(discriminator_forward(d, reals, 1, 0.4f),
                            discriminator_forward(d, fake, 1, 0.4f), gp, 10.0, 0.001)
                 .loss_d,
             tape);
    std::vector<std::vector<float>> out;
    for (const auto* w : {&g, &d}) {
      for (const auto& [name, t] : w->entries()) out.push_back(t.grad().to_vector());
    }
    return out;
  };
  EXPECT_EQ(gradients(), gradients());
}

TEST(TrainStep, ReportsAndAdvances) {
  TrainState st = init_train_state(tiny_config(0, 8));
  const StepReport r = train_step(make_blob_dataset(4, 4, 2), st, LossConfig{});
  EXPECT_EQ(r.step, 0);
  EXPECT_EQ(st.step, 1);
  EXPECT_EQ(st.schedule.reals_shown_in_phase, 4);
  EXPECT_TRUE(std::isfinite(r.loss_d));
  EXPECT_EQ(st.opt_d.t, 1);
  EXPECT_EQ(st.opt_g.t, 1);
  EXPECT_THROW(train_step(make_blob_dataset(4, 8, 2), st, LossConfig{}), ShapeError);
  const std::string line = format_log_line(r);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 4);
}

TEST(RunSchedule, GrowsAndResetsOptimizers) {
  const TrainConfig cfg = tiny_config(1, 8);
  std::vector<StepReport> log;
  RunHooks hooks;
  hooks.log = [&](const StepReport& r) { log.push_back(r); };
  int checkpoints = 0;
  hooks.checkpoint = [&](const TrainState&) {
    ++checkpoints;
    return std::string("mem");
  };
  const TrainState st = run_schedule(make_blob_dataset(4, 8, 3), cfg, hooks);
  EXPECT_TRUE(st.schedule.finished);
  EXPECT_EQ(st.step, 6);
  ASSERT_EQ(log.size(), 6u);
  EXPECT_EQ(log[2].stage, 1);
  EXPECT_FLOAT_EQ(log[2].alpha, 0.0f);
  EXPECT_FLOAT_EQ(log[3].alpha, 0.5f);
  EXPECT_EQ(checkpoints, 3);
  EXPECT_EQ(st.opt_g.t, 4);
  EXPECT_EQ(st.generator.max_stage(), 1);
}

TEST(RunSchedule, SameSeedSameWeightsAndResumeIsExact) {
  const TrainConfig cfg = tiny_config(1, 12);
  const Tensor data = make_blob_dataset(5, 8, 9);
  const TrainState a = run_schedule(data, cfg, {});
  const TrainState b = run_schedule(data, cfg, {});
  expect_same_weights(a.generator, b.generator);
  expect_same_weights(a.discriminator, b.discriminator);

  RunHooks stop;
  stop.max_steps = 4;
  const TrainState partial = run_schedule(data, cfg, stop);
  EXPECT_FALSE(partial.schedule.finished);
  TrainState restored = deserialize_checkpoint(serialize_checkpoint(partial));
  const TrainState c = run_schedule(data, cfg, {}, std::move(restored));
  expect_same_weights(a.generator, c.generator);
  expect_same_weights(a.discriminator, c.discriminator);
  EXPECT_EQ(a.step, c.step);
}

TEST(RunSchedule, ResumeWithOtherTargetFails) {
  TrainState st = init_train_state(tiny_config(1, 8));
  EXPECT_THROW(run_schedule(make_blob_dataset(2, 8, 1), tiny_config(0, 8), {}, st), ValueError);
}

TEST(Checkpoint, RoundTripIsByteStable) {
  const TrainConfig cfg = tiny_config(1, 8);
  RunHooks stop;
  stop.max_steps = 3;
  const TrainState st = run_schedule(make_blob_dataset(4, 8, 3), cfg, stop);
  const std::string bytes = serialize_checkpoint(st);
  const TrainState back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  expect_same_weights(st.generator, back.generator);
  EXPECT_EQ(back.rng, st.rng);
  EXPECT_EQ(back.cursor.position, st.cursor.position);
  EXPECT_EQ(back.schedule.stage, st.schedule.stage);
  EXPECT_EQ(back.opt_d.t, st.opt_d.t);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  const std::string bytes = serialize_checkpoint(init_train_state(tiny_config(0, 8)));
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), DataError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(deserialize_checkpoint(bad), DataError);
  for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{7}, bytes.size() / 2,
                        bytes.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, n)), DataError) << n;
  }
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), DataError);
}
