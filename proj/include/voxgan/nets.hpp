#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "voxgan/rng.hpp"
#include "voxgan/tensor.hpp"

namespace voxgan {

inline constexpr int kMaxFilters = 128;
inline constexpr int kBaseResolution = 4;

// Architecture plan for one progressive stage. Stage s works on cubes of
// 4 * 2^s voxels per side.
struct StageConfig {
  int stage = 0;
  int n_filters = 128;
  int latent_dim = 128;

  static int resolution_of(int stage) { return kBaseResolution << stage; }
  int resolution() const { return resolution_of(stage); }
  void validate() const;
};

// Named parameter collection. Names follow
//   {g|d}.{base|block<s>|to_voxel<s>|from_voxel<s>|final}.{dense|conv1|conv2}.{weight|bias}
// and iterate in lexicographic order.
class NetworkWeights {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  const std::map<std::string, Tensor>& entries() const { return params_; }
  // Replaces an existing parameter; the shape must match.
  void set(const std::string& name, Tensor value);
  std::size_t size() const { return params_.size(); }
  std::int64_t parameter_count() const;

  void set_requires_grad(bool flag);
  void zero_grad();
  NetworkWeights clone() const;

  // Highest stage with a to_voxel/from_voxel projection; -1 when empty.
  int max_stage() const;
  int n_filters() const;

 private:
  std::map<std::string, Tensor> params_;
};

std::string param_name(char net, std::string_view block,
                       std::string_view layer, std::string_view kind);

// Builds stages 0..cfg.stage. Weights ~ N(0, 1) (equalized scaling is applied
// at runtime), biases zero.
NetworkWeights build_generator(const StageConfig& cfg, Rng& rng);
NetworkWeights build_discriminator(const StageConfig& cfg, Rng& rng);

// Adds the parameters of `stage` (block + projection) to networks already
// holding stages below it. build_*(s) equals build_*(s - 1) followed by
// grow_*(s) with the same generator.
void grow_generator(NetworkWeights& weights, int stage, int n_filters,
                    Rng& rng);
void grow_discriminator(NetworkWeights& weights, int stage, int n_filters,
                        Rng& rng);

// z [B, latent_dim] -> [B, 1, R, R, R] with R = 4 * 2^stage. For stage > 0
// the output blends the upsampled stage - 1 projection (weight 1 - alpha)
// with the stage projection (weight alpha).
Tensor generator_forward(const NetworkWeights& weights, const Tensor& z,
                         int stage, float alpha);

// x [B, 1, R, R, R] -> [B, 1] unbounded critic score.
Tensor discriminator_forward(const NetworkWeights& weights, const Tensor& x,
                             int stage, float alpha);

}  // namespace voxgan
