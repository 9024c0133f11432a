#pragma once

#include <cstdint>

#include "voxgan/ops.hpp"
#include "voxgan/tensor.hpp"

namespace voxgan {

inline constexpr float kLeakySlope = 0.2f;
inline constexpr float kPixelNormEpsilon = 1e-8f;

// weight [out_ch, in_ch, k, k, k], bias [out_ch]; k odd, stride 1, "same"
// zero padding.
struct Conv3dParams {
  Tensor weight;
  Tensor bias;

  int kernel() const { return static_cast<int>(weight.dim(2)); }
  std::int64_t fan_in() const;
};

// He-style runtime scale sqrt(2 / fan_in) for equalized learning rate.
float equalized_scale(std::int64_t fan_in);

// With use_equalized the effective weight is equalized_scale(fan_in) * weight.
Tensor conv3d_forward(const Tensor& input, const Conv3dParams& params,
                      bool use_equalized);

struct Conv3dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

// Gradients of conv3d_forward(input, params, false) for the given grad_out.
Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& input,
                            const Conv3dParams& params);

// a / sqrt(mean over axis 1 of a^2 + epsilon), per voxel.
Tensor pixelwise_norm(const Tensor& a, float epsilon = kPixelNormEpsilon);

// Appends one channel holding the mean (over c, d, h, w) of the across-batch
// population standard deviation. [B,C,D,H,W] -> [B,C+1,D,H,W].
Tensor minibatch_stddev(const Tensor& a);

// (1 - alpha) * coarse + alpha * fine; alpha must lie in [0, 1].
Tensor fade_blend(float alpha, const Tensor& coarse, const Tensor& fine);

// x [B,N], weight [M,N], bias [M] -> [B,M]; equalized scale sqrt(2 / N).
Tensor dense_forward(const Tensor& x, const Tensor& weight,
                     const Tensor& bias, bool use_equalized);

}  // namespace voxgan
