#include "voxgan_oracle/reference_nets.hpp"

#include <cmath>

namespace voxgan::oracle {
namespace {

constexpr double kSlope = 0.2;
constexpr double kEpsilon = 1e-8;

struct ConvCache {
  Array input;
  Array pre;
  std::string prefix;
};

Array scaled_weight(const RefWeights& w, const std::string& prefix) {
  const Array& raw = w.at(prefix + ".weight");
  std::int64_t fan_in = 1;
  for (std::size_t i = 1; i < raw.shape.size(); ++i) fan_in *= raw.shape[i];
  return scale(raw, equalized_scale(fan_in));
}

int pad_of(const Array& weight) {
  return static_cast<int>((weight.dim(2) - 1) / 2);
}

Array conv(const RefWeights& w, const std::string& prefix, const Array& x,
           bool act, Branches* br, ConvCache* cache = nullptr) {
  const Array ws = scaled_weight(w, prefix);
  Array pre = add_channel_bias(conv3d(x, ws, pad_of(ws)), w.at(prefix + ".bias"));
  if (cache) *cache = {x, pre, prefix};
  return act ? leaky_relu(pre, kSlope, br) : pre;
}

Array conv_vjp(const RefWeights& w, const ConvCache& c, const Array& g,
               bool act) {
  const Array gp = act ? leaky_relu_vjp(g, c.pre, kSlope) : g;
  const Array ws = scaled_weight(w, c.prefix);
  return conv3d_input_vjp(gp, ws, c.input.shape, pad_of(ws));
}

Array dense_layer(const RefWeights& w, const std::string& prefix,
                  const Array& x) {
  return dense(x, scaled_weight(w, prefix), w.at(prefix + ".bias"));
}

Array reshape(Array a, const Shape& s) {
  a.shape = s;
  return a;
}

std::string block(int s) { return "block" + std::to_string(s); }

struct BlockCache {
  ConvCache c1, c2;
};

Array d_block(const RefWeights& w, int s, const Array& h, Branches* br,
              BlockCache* cache) {
  Array y = conv(w, "d." + block(s) + ".conv1", h, true, br, &cache->c1);
  y = conv(w, "d." + block(s) + ".conv2", y, true, br, &cache->c2);
  return downsample_avg_2x(y);
}

Array d_block_vjp(const RefWeights& w, const BlockCache& c, const Array& g) {
  Array gy = scale(upsample_nearest_2x(g), 1.0 / 8.0);
  gy = conv_vjp(w, c.c2, gy, true);
  return conv_vjp(w, c.c1, gy, true);
}

struct DTrace {
  bool use_fine = false;
  bool use_coarse = false;
  ConvCache from_fine, from_coarse;
  BlockCache top;
  std::vector<BlockCache> lower;  // stages s-1 .. 1
  Array stddev_input;
  ConvCache final_conv;
  Shape final_shape;
};

Array d_forward(const RefWeights& w, const Array& x, int stage, double alpha,
                Branches* br, DTrace& t) {
  auto from = [&](int s) { return "d.from_voxel" + std::to_string(s) + ".conv1"; };
  Array h;
  if (stage == 0) {
    t.use_fine = true;
    h = conv(w, from(0), x, true, br, &t.from_fine);
  } else {
    t.use_fine = alpha > 0.0;
    t.use_coarse = alpha < 1.0;
    Array fine, coarse;
    if (t.use_fine) {
      fine = d_block(w, stage, conv(w, from(stage), x, true, br, &t.from_fine),
                     br, &t.top);
    }
    if (t.use_coarse) {
      coarse = conv(w, from(stage - 1), downsample_avg_2x(x), true, br,
                    &t.from_coarse);
    }
    if (t.use_fine && t.use_coarse) {
      h = add(scale(coarse, 1.0 - alpha), scale(fine, alpha));
    } else {
      h = t.use_fine ? fine : coarse;
    }
    for (int s = stage - 1; s >= 1; --s) {
      t.lower.emplace_back();
      h = d_block(w, s, h, br, &t.lower.back());
    }
  }
  t.stddev_input = h;
  h = conv(w, "d.final.conv1", minibatch_stddev(h), true, br, &t.final_conv);
  t.final_shape = h.shape;
  h = reshape(h, {h.dim(0), h.numel() / h.dim(0)});
  return dense_layer(w, "d.final.dense", h);
}

}  // namespace

RefWeights to_reference(const NetworkWeights& weights) {
  RefWeights out;
  for (const auto& [name, t] : weights.entries()) out[name] = Array::from(t);
  return out;
}

Array generator(const RefWeights& w, const Array& z, int stage, double alpha,
                Branches* br) {
  const std::int64_t batch = z.dim(0);
  const std::int64_t f = w.at("g.base.conv1.weight").dim(0);
  auto to_voxel = [&](const Array& h, int s) {
    return conv(w, "g.to_voxel" + std::to_string(s) + ".conv1", h, false, br);
  };
  Array h = dense_layer(w, "g.base.dense", pixelwise_norm(z, kEpsilon));
  h = reshape(h, {batch, f, 4, 4, 4});
  h = pixelwise_norm(leaky_relu(h, kSlope, br), kEpsilon);
  h = pixelwise_norm(conv(w, "g.base.conv1", h, true, br), kEpsilon);
  Array previous;
  for (int s = 1; s <= stage; ++s) {
    previous = h;
    h = upsample_nearest_2x(h);
    h = pixelwise_norm(conv(w, "g." + block(s) + ".conv1", h, true, br),
                       kEpsilon);
    h = pixelwise_norm(conv(w, "g." + block(s) + ".conv2", h, true, br),
                       kEpsilon);
  }
  if (stage == 0 || alpha >= 1.0) return to_voxel(h, stage);
  const Array coarse = upsample_nearest_2x(to_voxel(previous, stage - 1));
  if (alpha <= 0.0) return coarse;
  return add(scale(coarse, 1.0 - alpha), scale(to_voxel(h, stage), alpha));
}

Array discriminator(const RefWeights& w, const Array& x, int stage,
                    double alpha, Branches* br) {
  DTrace t;
  return d_forward(w, x, stage, alpha, br, t);
}

Array discriminator_input_grad(const RefWeights& w, const Array& x, int stage,
                               double alpha, Branches* br) {
  DTrace t;
  const Array out = d_forward(w, x, stage, alpha, br, t);
  Array g = Array::zeros(out.shape);
  for (auto& v : g.data) v = 1.0;
  g = dense_input_vjp(g, scaled_weight(w, "d.final.dense"));
  g = reshape(g, t.final_shape);
  g = conv_vjp(w, t.final_conv, g, true);
  g = minibatch_stddev_vjp(g, t.stddev_input);
  for (auto it = t.lower.rbegin(); it != t.lower.rend(); ++it) {
    g = d_block_vjp(w, *it, g);
  }
  if (stage == 0) return conv_vjp(w, t.from_fine, g, true);

  Array gx = Array::zeros(x.shape);
  if (t.use_fine) {
    const double a = t.use_coarse ? alpha : 1.0;
    const Array gf = conv_vjp(w, t.from_fine, d_block_vjp(w, t.top, scale(g, a)),
                              true);
    gx = add(gx, gf);
  }
  if (t.use_coarse) {
    const double a = t.use_fine ? 1.0 - alpha : 1.0;
    const Array gc = conv_vjp(w, t.from_coarse, scale(g, a), true);
    gx = add(gx, scale(upsample_nearest_2x(gc), 1.0 / 8.0));
  }
  return gx;
}

Array interpolate(const Tensor& real, const Tensor& fake,
                  const std::vector<float>& u) {
  const auto r = real.to_vector();
  const auto f = fake.to_vector();
  const std::int64_t batch = real.dim(0);
  const std::int64_t item = real.numel() / batch;
  Array x = Array::zeros(real.shape());
  for (std::int64_t b = 0; b < batch; ++b) {
    const float ub = u[static_cast<std::size_t>(b)];
    for (std::int64_t i = b * item; i < (b + 1) * item; ++i) {
      const auto k = static_cast<std::size_t>(i);
      x.data[k] = ub * r[k] + (1.0f - ub) * f[k];
    }
  }
  return x;
}

double gradient_penalty(const RefWeights& w, const Array& x_hat, int stage,
                        double alpha, Branches* br) {
  const Array g = discriminator_input_grad(w, x_hat, stage, alpha, br);
  const std::int64_t batch = g.dim(0);
  const std::int64_t item = g.numel() / batch;
  double total = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    double sq = 0.0;
    for (std::int64_t i = b * item; i < (b + 1) * item; ++i) {
      sq += g.data[static_cast<std::size_t>(i)] * g.data[static_cast<std::size_t>(i)];
    }
    const double n = std::sqrt(sq) - 1.0;
    total += n * n;
  }
  return total / static_cast<double>(batch);
}

}  // namespace voxgan::oracle
