#include "voxgan/nets.hpp"

#include "voxgan/error.hpp"
#include "voxgan/layers.hpp"

namespace voxgan {
namespace {

constexpr int kBaseVoxels = kBaseResolution * kBaseResolution * kBaseResolution;

Tensor normal_tensor(const Shape& shape, Rng& rng) {
  std::vector<float> values(static_cast<std::size_t>(numel(shape)));
  for (auto& v : values) v = static_cast<float>(rng.normal());
  return Tensor::from_vector(shape, std::move(values));
}

void add_conv(NetworkWeights& w, char net, const std::string& block,
              const char* layer, std::int64_t out_ch, std::int64_t in_ch,
              std::int64_t k, Rng& rng) {
  w.add(param_name(net, block, layer, "weight"),
        normal_tensor({out_ch, in_ch, k, k, k}, rng));
  w.add(param_name(net, block, layer, "bias"), Tensor::zeros({out_ch}));
}

void add_dense(NetworkWeights& w, char net, const std::string& block,
               std::int64_t out_dim, std::int64_t in_dim, Rng& rng) {
  w.add(param_name(net, block, "dense", "weight"),
        normal_tensor({out_dim, in_dim}, rng));
  w.add(param_name(net, block, "dense", "bias"), Tensor::zeros({out_dim}));
}

std::string indexed(const char* block, int stage) {
  return block + std::to_string(stage);
}

Conv3dParams conv_params(const NetworkWeights& w, char net,
                         const std::string& block, const char* layer) {
  return {w.at(param_name(net, block, layer, "weight")),
          w.at(param_name(net, block, layer, "bias"))};
}

Tensor conv_act(const Tensor& h, const NetworkWeights& w, char net,
                const std::string& block, const char* layer) {
  return leaky_relu(conv3d_forward(h, conv_params(w, net, block, layer), true),
                    kLeakySlope);
}

void check_stage(const NetworkWeights& w, int stage, float alpha,
                 const char* who) {
  if (stage < 0 || stage > w.max_stage()) {
    throw ValueError(std::string(who) + ": stage " + std::to_string(stage) +
                     " not built (weights cover stages 0.." +
                     std::to_string(w.max_stage()) + ")");
  }
  if (!(alpha >= 0.0f && alpha <= 1.0f)) {
    throw ValueError(std::string(who) + ": alpha " + std::to_string(alpha) +
                     " outside [0, 1]");
  }
}

// Generator trunk: base block followed by growth blocks 1..stage.
Tensor generator_features(const NetworkWeights& w, const Tensor& z, int stage,
                          Tensor* previous) {
  const std::int64_t batch = z.dim(0);
  const std::int64_t f = w.n_filters();
  Tensor h = dense_forward(pixelwise_norm(z), w.at("g.base.dense.weight"),
                           w.at("g.base.dense.bias"), true);
  h = reshape(h, {batch, f, kBaseResolution, kBaseResolution,
                  kBaseResolution});
  h = pixelwise_norm(leaky_relu(h, kLeakySlope));
  h = pixelwise_norm(conv_act(h, w, 'g', "base", "conv1"));
  for (int s = 1; s <= stage; ++s) {
    if (previous && s == stage) *previous = h;
    const std::string block = indexed("block", s);
    h = upsample_nearest_2x(h);
    h = pixelwise_norm(conv_act(h, w, 'g', block, "conv1"));
    h = pixelwise_norm(conv_act(h, w, 'g', block, "conv2"));
  }
  return h;
}

Tensor to_voxel(const NetworkWeights& w, const Tensor& h, int stage) {
  return conv3d_forward(h, conv_params(w, 'g', indexed("to_voxel", stage),
                                       "conv1"),
                        true);
}

Tensor from_voxel(const NetworkWeights& w, const Tensor& x, int stage) {
  return conv_act(x, w, 'd', indexed("from_voxel", stage), "conv1");
}

Tensor discriminator_block(const NetworkWeights& w, const Tensor& h,
                           int stage) {
  const std::string block = indexed("block", stage);
  Tensor y = conv_act(h, w, 'd', block, "conv1");
  y = conv_act(y, w, 'd', block, "conv2");
  return downsample_avg_2x(y);
}

}  // namespace

void StageConfig::validate() const {
  if (stage < 0) throw ValueError("stage must be >= 0");
  if (n_filters < 1 || n_filters > kMaxFilters) {
    throw ValueError("n_filters must be in [1, " +
                     std::to_string(kMaxFilters) + "], got " +
                     std::to_string(n_filters));
  }
  if (latent_dim < 1) throw ValueError("latent_dim must be >= 1");
}

void NetworkWeights::add(const std::string& name, Tensor value) {
  if (!params_.emplace(name, std::move(value)).second) {
    throw ValueError("duplicate parameter name " + name);
  }
}

void NetworkWeights::set(const std::string& name, Tensor value) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("unknown parameter " + name);
  if (it->second.shape() != value.shape()) {
    throw ShapeError("parameter " + name + " is " +
                     to_string(it->second.shape()) + ", got " +
                     to_string(value.shape()));
  }
  it->second = std::move(value);
}

bool NetworkWeights::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

const Tensor& NetworkWeights::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("missing parameter " + name);
  return it->second;
}

Tensor& NetworkWeights::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ValueError("missing parameter " + name);
  return it->second;
}

std::int64_t NetworkWeights::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void NetworkWeights::set_requires_grad(bool flag) {
  for (auto& [name, t] : params_) t.set_requires_grad(flag);
}

void NetworkWeights::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

NetworkWeights NetworkWeights::clone() const {
  NetworkWeights copy;
  for (const auto& [name, t] : params_) copy.add(name, t.clone());
  return copy;
}

int NetworkWeights::max_stage() const {
  int best = -1;
  for (int s = 0;; ++s) {
    if (contains(param_name('g', indexed("to_voxel", s), "conv1", "weight")) ||
        contains(
            param_name('d', indexed("from_voxel", s), "conv1", "weight"))) {
      best = s;
    } else {
      return best;
    }
  }
}

int NetworkWeights::n_filters() const {
  if (contains("g.base.conv1.weight")) {
    return static_cast<int>(at("g.base.conv1.weight").dim(0));
  }
  if (contains("d.final.conv1.weight")) {
    return static_cast<int>(at("d.final.conv1.weight").dim(0));
  }
  throw ValueError("weights hold neither a generator nor a discriminator");
}

std::string param_name(char net, std::string_view block,
                       std::string_view layer, std::string_view kind) {
  std::string name(1, net);
  name += '.';
  name += block;
  name += '.';
  name += layer;
  name += '.';
  name += kind;
  return name;
}

NetworkWeights build_generator(const StageConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::int64_t f = cfg.n_filters;
  NetworkWeights w;
  add_dense(w, 'g', "base", f * kBaseVoxels, cfg.latent_dim, rng);
  add_conv(w, 'g', "base", "conv1", f, f, 3, rng);
  add_conv(w, 'g', indexed("to_voxel", 0), "conv1", 1, f, 1, rng);
  for (int s = 1; s <= cfg.stage; ++s) grow_generator(w, s, cfg.n_filters, rng);
  return w;
}

void grow_generator(NetworkWeights& w, int stage, int n_filters, Rng& rng) {
  if (stage != w.max_stage() + 1) {
    throw ValueError("grow_generator: cannot add stage " +
                     std::to_string(stage) + " on top of stage " +
                     std::to_string(w.max_stage()));
  }
  const std::string block = indexed("block", stage);
  add_conv(w, 'g', block, "conv1", n_filters, n_filters, 3, rng);
  add_conv(w, 'g', block, "conv2", n_filters, n_filters, 3, rng);
  add_conv(w, 'g', indexed("to_voxel", stage), "conv1", 1, n_filters, 1, rng);
}

NetworkWeights build_discriminator(const StageConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::int64_t f = cfg.n_filters;
  NetworkWeights w;
  add_conv(w, 'd', indexed("from_voxel", 0), "conv1", f, 1, 1, rng);
  add_conv(w, 'd', "final", "conv1", f, f + 1, 3, rng);
  add_dense(w, 'd', "final", 1, f * kBaseVoxels, rng);
  for (int s = 1; s <= cfg.stage; ++s) {
    grow_discriminator(w, s, cfg.n_filters, rng);
  }
  return w;
}

void grow_discriminator(NetworkWeights& w, int stage, int n_filters,
                        Rng& rng) {
  if (stage != w.max_stage() + 1) {
    throw ValueError("grow_discriminator: cannot add stage " +
                     std::to_string(stage) + " on top of stage " +
                     std::to_string(w.max_stage()));
  }
  add_conv(w, 'd', indexed("from_voxel", stage), "conv1", n_filters, 1, 1,
           rng);
  const std::string block = indexed("block", stage);
  add_conv(w, 'd', block, "conv1", n_filters, n_filters, 3, rng);
  add_conv(w, 'd', block, "conv2", n_filters, n_filters, 3, rng);
}

Tensor generator_forward(const NetworkWeights& w, const Tensor& z, int stage,
                         float alpha) {
  check_stage(w, stage, alpha, "generator_forward");
  const auto& dense = w.at("g.base.dense.weight");
  if (z.ndim() != 2 || z.dim(1) != dense.dim(1)) {
    throw ShapeError("generator_forward: latent " + to_string(z.shape()) +
                     " does not match latent_dim " +
                     std::to_string(dense.dim(1)));
  }
  if (!all_finite(z)) throw NumericError("generator_forward: non-finite z");

  const bool fading = stage > 0 && alpha < 1.0f;
  Tensor previous;
  Tensor h = generator_features(w, z, stage, fading ? &previous : nullptr);
  if (!fading) return to_voxel(w, h, stage);
  Tensor coarse = upsample_nearest_2x(to_voxel(w, previous, stage - 1));
  if (alpha == 0.0f) return coarse;
  return fade_blend(alpha, coarse, to_voxel(w, h, stage));
}

Tensor discriminator_forward(const NetworkWeights& w, const Tensor& x,
                             int stage, float alpha) {
  check_stage(w, stage, alpha, "discriminator_forward");
  const std::int64_t r = StageConfig::resolution_of(stage);
  if (x.ndim() != 5 || x.dim(1) != 1 || x.dim(2) != r || x.dim(3) != r ||
      x.dim(4) != r) {
    throw ShapeError("discriminator_forward: stage " + std::to_string(stage) +
                     " expects [B,1," + std::to_string(r) + "," +
                     std::to_string(r) + "," + std::to_string(r) + "], got " +
                     to_string(x.shape()));
  }
  Tensor h;
  if (stage == 0) {
    h = from_voxel(w, x, 0);
  } else {
    const bool fading = alpha < 1.0f;
    if (fading && alpha == 0.0f) {
      h = from_voxel(w, downsample_avg_2x(x), stage - 1);
    } else {
      h = discriminator_block(w, from_voxel(w, x, stage), stage);
      if (fading) {
        Tensor coarse = from_voxel(w, downsample_avg_2x(x), stage - 1);
        h = fade_blend(alpha, coarse, h);
      }
    }
    for (int s = stage - 1; s >= 1; --s) h = discriminator_block(w, h, s);
  }
  const std::int64_t batch = x.dim(0);
  h = minibatch_stddev(h);
  h = conv_act(h, w, 'd', "final", "conv1");
  h = reshape(h, {batch, h.numel() / batch});
  return dense_forward(h, w.at("d.final.dense.weight"),
                       w.at("d.final.dense.bias"), true);
}

}  // namespace voxgan
