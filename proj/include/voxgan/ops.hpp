#pragma once

#include <vector>

#include "voxgan/tensor.hpp"

// Differentiable tensor operations. Each op computes eagerly and, when a tape
// is recording and an input requires grad, records a backward rule built from
// these same ops (so rules are themselves differentiable).
namespace voxgan {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a / b with the convention x / 0 == 0.
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
// Derivative at 0 is taken as 0 (see div).
Tensor sqrt(const Tensor& a);

Tensor leaky_relu(const Tensor& x, float slope);
// grad * (x > 0 ? 1 : slope); the derivative rule of leaky_relu.
Tensor leaky_relu_backward(const Tensor& grad, const Tensor& x, float slope);

// Reductions. Empty `axes` reduces every axis.
Tensor sum(const Tensor& a, std::vector<int> axes = {}, bool keepdim = false);
Tensor mean(const Tensor& a, std::vector<int> axes = {}, bool keepdim = false);

// Replicates extent-1 axes of `a` up to `shape` (same rank required).
Tensor expand(const Tensor& a, const Shape& shape);

// Views: share storage with `a`.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor narrow(const Tensor& a, int axis, std::int64_t start,
              std::int64_t length);
// Zero tensor of `shape` with `a` written at [start, start + a.dim(axis)).
Tensor embed(const Tensor& a, const Shape& shape, int axis,
             std::int64_t start);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// op(a) @ op(b) for 2-D tensors, op = transpose when the flag is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false,
              bool transpose_b = false);

// Adds bias[C] along axis 1 of x[B, C, ...].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Stride-1 "same" 3-D convolution without bias.
// x [B,C,D,H,W], weight [O,C,k,k,k] -> [B,O,D,H,W].
Tensor conv3d(const Tensor& x, const Tensor& weight);
// Gradient of conv3d w.r.t. its input.
Tensor conv3d_backward_data(const Tensor& grad_out, const Tensor& weight);
// Gradient of conv3d w.r.t. its weight, for kernel size k.
Tensor conv3d_backward_weight(const Tensor& x, const Tensor& grad_out, int k);

Tensor upsample_nearest_2x(const Tensor& a);
Tensor downsample_avg_2x(const Tensor& a);

bool all_finite(const Tensor& a);

}  // namespace voxgan
