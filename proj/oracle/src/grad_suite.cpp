#include "voxgan_oracle/grad_suite.hpp"

#include <algorithm>
#include <functional>

#include "voxgan/grad_check.hpp"
#include "voxgan/layers.hpp"
#include "voxgan/nets.hpp"
#include "voxgan/rng.hpp"
#include "voxgan/tape.hpp"
#include "voxgan/trainer.hpp"
#include "voxgan_oracle/reference.hpp"
#include "voxgan_oracle/reference_nets.hpp"

namespace voxgan::oracle {
namespace {

constexpr double kStep = 1e-5;
constexpr double kSlope = 0.2;
constexpr double kEpsilon = 1e-8;

Tensor random_tensor(const Shape& shape, Rng& rng, double sd = 1.0) {
  std::vector<float> v(static_cast<std::size_t>(numel(shape)));
  for (auto& x : v) x = static_cast<float>(sd * rng.normal());
  return Tensor::from_vector(shape, std::move(v));
}

Array view(std::span<const double> p, const Shape& shape) {
  return {shape, std::vector<double>(p.begin(), p.end())};
}

double dot(const Array& a, const Array& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Tensor weighted_sum(const Tensor& y, const Tensor& r) { return sum(mul(y, r)); }

GradSuiteResult named(const std::string& name) {
  GradSuiteResult r;
  r.name = name;
  return r;
}

void merge(GradSuiteResult& acc, const GradCheckResult& r) {
  acc.cases += 1;
  acc.max_rel_error = std::max(acc.max_rel_error, r.max_rel_error);
  acc.checked += r.checked;
  acc.skipped += r.skipped;
}

// One layer case: f32 function, its float64 replay and the input.
struct Case {
  ScalarFn f;
  ReplayFn replay;
  Tensor input;
};

using CaseFactory = std::function<Case(Rng&)>;

std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

Case conv_input_case(Rng& rng) {
  const std::int64_t b = pick(rng, 1, 2), c = pick(rng, 1, 3),
                     o = pick(rng, 1, 3), d = pick(rng, 1, 4);
  const std::int64_t k = rng.below(2) ? 3 : 1;
  const Tensor w = random_tensor({o, c, k, k, k}, rng);
  const Tensor bias = random_tensor({o}, rng);
  const Tensor x = random_tensor({b, c, d, d, d}, rng);
  const Tensor r = random_tensor({b, o, d, d, d}, rng);
  const Array wa = Array::from(w), ba = Array::from(bias), ra = Array::from(r);
  const double cs = equalized_scale(c * k * k * k);
  return {[=](const Tensor& in) {
            return weighted_sum(conv3d_forward(in, {w, bias}, true), r);
          },
          [=](std::span<const double> p) {
            const Array y = add_channel_bias(
                conv3d(view(p, x.shape()), scale(wa, cs), static_cast<int>(k / 2)), ba);
            return ReplayResult{dot(y, ra), {}};
          },
          x};
}

Case conv_weight_case(Rng& rng) {
  const std::int64_t b = pick(rng, 1, 2), c = pick(rng, 1, 3),
                     o = pick(rng, 1, 3), d = pick(rng, 1, 4);
  const std::int64_t k = rng.below(2) ? 3 : 1;
  const Tensor w = random_tensor({o, c, k, k, k}, rng);
  const Tensor bias = random_tensor({o}, rng);
  const Tensor x = random_tensor({b, c, d, d, d}, rng);
  const Tensor r = random_tensor({b, o, d, d, d}, rng);
  const Array xa = Array::from(x), ba = Array::from(bias), ra = Array::from(r);
  const double cs = equalized_scale(c * k * k * k);
  return {[=](const Tensor& wt) {
            return weighted_sum(conv3d_forward(x, {wt, bias}, true), r);
          },
          [=](std::span<const double> p) {
            const Array y = add_channel_bias(
                conv3d(xa, scale(view(p, w.shape()), cs), static_cast<int>(k / 2)), ba);
            return ReplayResult{dot(y, ra), {}};
          },
          w};
}

Case leaky_case(Rng& rng) {
  const Shape s{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 5)};
  const Tensor r = random_tensor(s, rng);
  const Array ra = Array::from(r);
  return {[=](const Tensor& x) {
            return weighted_sum(leaky_relu(x, kLeakySlope), r);
          },
          [=](std::span<const double> p) {
            ReplayResult out;
            out.value = dot(leaky_relu(view(p, s), kSlope, &out.branches), ra);
            return out;
          },
          random_tensor(s, rng)};
}

// At one channel the map is x / sqrt(x^2 + eps), whose derivative is of order
// eps and vanishes entirely in float32; cases start at two channels.
Case pixelnorm_case(Rng& rng) {
  const Shape s{pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 1, 3),
                pick(rng, 1, 3), pick(rng, 1, 3)};
  const Tensor r = random_tensor(s, rng);
  const Array ra = Array::from(r);
  return {[=](const Tensor& x) { return weighted_sum(pixelwise_norm(x), r); },
          [=](std::span<const double> p) {
            return ReplayResult{dot(pixelwise_norm(view(p, s), kEpsilon), ra), {}};
          },
          random_tensor(s, rng)};
}

Case stddev_case(Rng& rng) {
  const Shape s{pick(rng, 2, 4), pick(rng, 1, 3), pick(rng, 1, 3),
                pick(rng, 1, 3), pick(rng, 1, 3)};
  const Shape so{s[0], s[1] + 1, s[2], s[3], s[4]};
  const Tensor r = random_tensor(so, rng);
  const Array ra = Array::from(r);
  return {[=](const Tensor& x) { return weighted_sum(minibatch_stddev(x), r); },
          [=](std::span<const double> p) {
            return ReplayResult{dot(minibatch_stddev(view(p, s)), ra), {}};
          },
          random_tensor(s, rng)};
}

Case dense_case(Rng& rng, bool wrt_weight) {
  const std::int64_t b = pick(rng, 1, 4), n = pick(rng, 1, 12),
                     m = pick(rng, 1, 6);
  const Tensor x = random_tensor({b, n}, rng);
  const Tensor w = random_tensor({m, n}, rng);
  const Tensor bias = random_tensor({m}, rng);
  const Tensor r = random_tensor({b, m}, rng);
  const Array xa = Array::from(x), wa = Array::from(w), ba = Array::from(bias),
              ra = Array::from(r);
  const double cs = equalized_scale(n);
  if (wrt_weight) {
    return {[=](const Tensor& wt) {
              return weighted_sum(dense_forward(x, wt, bias, true), r);
            },
            [=](std::span<const double> p) {
              return ReplayResult{
                  dot(dense(xa, scale(view(p, w.shape()), cs), ba), ra), {}};
            },
            w};
  }
  return {[=](const Tensor& in) {
            return weighted_sum(dense_forward(in, w, bias, true), r);
          },
          [=](std::span<const double> p) {
            return ReplayResult{
                dot(dense(view(p, x.shape()), scale(wa, cs), ba), ra), {}};
          },
          x};
}

Case resample_case(Rng& rng, bool up) {
  const std::int64_t e = up ? pick(rng, 1, 3) : 2 * pick(rng, 1, 2);
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), e, e, e};
  const std::int64_t oe = up ? 2 * e : e / 2;
  const Tensor r = random_tensor({s[0], s[1], oe, oe, oe}, rng);
  const Array ra = Array::from(r);
  return {[=](const Tensor& x) {
            return weighted_sum(up ? upsample_nearest_2x(x) : downsample_avg_2x(x), r);
          },
          [=](std::span<const double> p) {
            const Array a = view(p, s);
            return ReplayResult{
                dot(up ? upsample_nearest_2x(a) : downsample_avg_2x(a), ra), {}};
          },
          random_tensor(s, rng)};
}

Case fade_case(Rng& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), 2, 2, 2};
  const float alpha = static_cast<float>(rng.uniform());
  const Tensor fine = random_tensor(s, rng);
  const Tensor r = random_tensor(s, rng);
  const Array fa = Array::from(fine), ra = Array::from(r);
  return {[=](const Tensor& coarse) {
            return weighted_sum(fade_blend(alpha, coarse, fine), r);
          },
          [=](std::span<const double> p) {
            const Array y = add(scale(view(p, s), 1.0 - alpha), scale(fa, alpha));
            return ReplayResult{dot(y, ra), {}};
          },
          random_tensor(s, rng)};
}

GradSuiteResult run(const std::string& name, const CaseFactory& make,
                    int cases, std::uint64_t seed) {
  GradSuiteResult acc;
  acc.name = name;
  Rng rng(mix_seed(seed ^ std::hash<std::string>{}(name)));
  for (int i = 0; i < cases; ++i) {
    const Case c = make(rng);
    merge(acc, grad_check(c.f, c.replay, c.input, kStep));
  }
  return acc;
}

constexpr int kNetFilters = 4;
constexpr int kNetLatent = 8;

}  // namespace

std::vector<GradSuiteResult> layer_grad_suite(int cases, std::uint64_t seed) {
  const std::vector<std::pair<std::string, CaseFactory>> layers = {
      {"conv3d.input", conv_input_case},
      {"conv3d.weight", conv_weight_case},
      {"leaky_relu", leaky_case},
      {"pixelwise_norm", pixelnorm_case},
      {"minibatch_stddev", stddev_case},
      {"dense.input", [](Rng& r) { return dense_case(r, false); }},
      {"dense.weight", [](Rng& r) { return dense_case(r, true); }},
      {"upsample_nearest_2x", [](Rng& r) { return resample_case(r, true); }},
      {"downsample_avg_2x", [](Rng& r) { return resample_case(r, false); }},
      {"fade_blend", fade_case},
  };
  std::vector<GradSuiteResult> out;
  for (const auto& [name, make] : layers) out.push_back(run(name, make, cases, seed));
  return out;
}

std::vector<GradSuiteResult> network_grad_suite(int cases, std::uint64_t seed) {
  GradSuiteResult g_z = named("generator.latent"), g_w = named("generator.weight");
  GradSuiteResult d_x = named("discriminator.input"),
                  d_w = named("discriminator.weight");
  Rng rng(mix_seed(seed ^ 0x4E7));
  const StageConfig cfg{0, kNetFilters, kNetLatent};
  GradCheckOptions opt;
  opt.max_elements = 64;
  for (int i = 0; i < cases; ++i) {
    const std::int64_t batch = pick(rng, 1, 3);
    const NetworkWeights gen = build_generator(cfg, rng);
    const NetworkWeights dis = build_discriminator(cfg, rng);
    const RefWeights gref = to_reference(gen), dref = to_reference(dis);
    const Tensor z = random_tensor({batch, kNetLatent}, rng);
    const Tensor x = random_tensor({batch, 1, 4, 4, 4}, rng);
    const Tensor rg = random_tensor({batch, 1, 4, 4, 4}, rng);
    const Tensor rd = random_tensor({batch, 1}, rng);
    const Array rga = Array::from(rg), rda = Array::from(rd);

    merge(g_z, grad_check(
                   [&](const Tensor& in) {
                     return weighted_sum(generator_forward(gen, in, 0, 1.0f), rg);
                   },
                   [&](std::span<const double> p) {
                     ReplayResult out;
                     out.value = dot(generator(gref, view(p, z.shape()), 0, 1.0,
                                               &out.branches),
                                     rga);
                     return out;
                   },
                   z, kStep, opt));

    const std::string gname = "g.base.conv1.weight";
    merge(g_w, grad_check(
                   [&](const Tensor& wt) {
                     NetworkWeights w = gen.clone();
                     w.set(gname, wt);
                     return weighted_sum(generator_forward(w, z, 0, 1.0f), rg);
                   },
                   [&](std::span<const double> p) {
                     RefWeights w = gref;
                     w[gname] = view(p, gen.at(gname).shape());
                     ReplayResult out;
                     out.value = dot(generator(w, Array::from(z), 0, 1.0,
                                               &out.branches),
                                     rga);
                     return out;
                   },
                   gen.at(gname), kStep, opt));

    merge(d_x, grad_check(
                   [&](const Tensor& in) {
                     return weighted_sum(discriminator_forward(dis, in, 0, 1.0f), rd);
                   },
                   [&](std::span<const double> p) {
                     ReplayResult out;
                     out.value = dot(discriminator(dref, view(p, x.shape()), 0,
                                                   1.0, &out.branches),
                                     rda);
                     return out;
                   },
                   x, kStep, opt));

    const std::string dname = "d.final.conv1.weight";
    merge(d_w, grad_check(
                   [&](const Tensor& wt) {
                     NetworkWeights w = dis.clone();
                     w.set(dname, wt);
                     return weighted_sum(discriminator_forward(w, x, 0, 1.0f), rd);
                   },
                   [&](std::span<const double> p) {
                     RefWeights w = dref;
                     w[dname] = view(p, dis.at(dname).shape());
                     ReplayResult out;
                     out.value = dot(discriminator(w, Array::from(x), 0, 1.0,
                                                   &out.branches),
                                     rda);
                     return out;
                   },
                   dis.at(dname), kStep, opt));
  }
  return {g_z, g_w, d_x, d_w};
}

GradSuiteResult gradient_penalty_grad_suite(int cases, std::uint64_t seed) {
  GradSuiteResult acc = named("gradient_penalty.weight");
  Rng rng(mix_seed(seed ^ 0x69F));
  const StageConfig cfg{0, kNetFilters, kNetLatent};
  GradCheckOptions opt;
  opt.max_elements = 48;
  for (int i = 0; i < cases; ++i) {
    const std::int64_t batch = pick(rng, 1, 3);
    const NetworkWeights dis = build_discriminator(cfg, rng);
    const RefWeights dref = to_reference(dis);
    const Tensor real = random_tensor({batch, 1, 4, 4, 4}, rng);
    const Tensor fake = random_tensor({batch, 1, 4, 4, 4}, rng);
    const Rng draw = rng;
    std::vector<float> u;
    {
      Rng copy = draw;
      for (std::int64_t b = 0; b < batch; ++b) {
        u.push_back(static_cast<float>(copy.uniform()));
      }
    }
    const Array x_hat = interpolate(real, fake, u);
    const std::string name = i % 2 ? "d.from_voxel0.conv1.weight"
                                    : "d.final.conv1.weight";
    merge(acc, grad_check(
                   [&](const Tensor& wt) {
                     NetworkWeights w = dis.clone();
                     w.set(name, wt);
                     Rng local = draw;
                     return voxgan::gradient_penalty(w, real, fake, 0, 1.0f, local);
                   },
                   [&](std::span<const double> p) {
                     RefWeights w = dref;
                     w[name] = view(p, dis.at(name).shape());
                     ReplayResult out;
                     out.value = gradient_penalty(w, x_hat, 0, 1.0, &out.branches);
                     return out;
                   },
                   dis.at(name), kStep, opt));
  }
  return acc;
}

}  // namespace voxgan::oracle
