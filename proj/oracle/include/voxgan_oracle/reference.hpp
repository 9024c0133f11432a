#pragma once

#include <cstdint>
#include <vector>

#include "voxgan/tensor.hpp"

// Straightforward float64 implementations, written independently of the
// optimized kernels and used only as test oracles.
namespace voxgan::oracle {

struct Array {
  Shape shape;
  std::vector<double> data;

  static Array zeros(const Shape& shape);
  static Array from(const Tensor& t);
  Tensor to_tensor() const;
  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
};

// Sign record of every non-smooth point visited; null disables recording.
using Branches = std::vector<std::uint8_t>;

// x [B,C,D,H,W], w [O,C,k,k,k], zero padding `pad`, stride 1; the output
// extent is D + 2*pad - k + 1.
Array conv3d(const Array& x, const Array& w, int pad);
// Vector-Jacobian products of conv3d for an output gradient gy.
Array conv3d_input_vjp(const Array& gy, const Array& w, const Shape& x_shape,
                       int pad);
Array conv3d_weight_vjp(const Array& x, const Array& gy, int k, int pad);

Array add_channel_bias(const Array& x, const Array& bias);
Array scale(const Array& x, double c);
Array add(const Array& a, const Array& b);
Array leaky_relu(const Array& x, double slope, Branches* branches);
// Multiplies gy by the leaky-ReLU derivative at x (slope where x <= 0).
Array leaky_relu_vjp(const Array& gy, const Array& x, double slope);
Array pixelwise_norm(const Array& x, double epsilon);
Array minibatch_stddev(const Array& x);
Array minibatch_stddev_vjp(const Array& gy, const Array& x);
Array upsample_nearest_2x(const Array& x);
Array downsample_avg_2x(const Array& x);
// x [B,N], w [M,N] -> [B,M]
Array dense(const Array& x, const Array& w, const Array& bias);
Array dense_input_vjp(const Array& gy, const Array& w);
double sum(const Array& x);
double equalized_scale(std::int64_t fan_in);

}  // namespace voxgan::oracle
