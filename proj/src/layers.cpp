#include "voxgan/layers.hpp"

#include <cmath>

#include "voxgan/error.hpp"
#include "voxgan/tape.hpp"

namespace voxgan {

std::int64_t Conv3dParams::fan_in() const {
  return weight.dim(1) * weight.dim(2) * weight.dim(3) * weight.dim(4);
}

float equalized_scale(std::int64_t fan_in) {
  return static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in)));
}

Tensor conv3d_forward(const Tensor& input, const Conv3dParams& params,
                      bool use_equalized) {
  if (params.bias.ndim() != 1 || params.bias.dim(0) != params.weight.dim(0)) {
    throw ShapeError("conv3d_forward: bias " + to_string(params.bias.shape()) +
                     " does not match weight " +
                     to_string(params.weight.shape()));
  }
  const Tensor w = use_equalized
                       ? scale(params.weight, equalized_scale(params.fan_in()))
                       : params.weight;
  return add_channel_bias(conv3d(input, w), params.bias);
}

Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& input,
                            const Conv3dParams& params) {
  if (grad_out.ndim() != 5 || input.ndim() != 5 ||
      grad_out.dim(0) != input.dim(0) ||
      grad_out.dim(1) != params.weight.dim(0) ||
      grad_out.dim(2) != input.dim(2) || grad_out.dim(3) != input.dim(3) ||
      grad_out.dim(4) != input.dim(4)) {
    throw ShapeError("conv3d_backward: grad_out " +
                     to_string(grad_out.shape()) + " inconsistent with input " +
                     to_string(input.shape()) + " and weight " +
                     to_string(params.weight.shape()));
  }
  Conv3dGrads g;
  g.input = conv3d_backward_data(grad_out, params.weight);
  g.weight = conv3d_backward_weight(input, grad_out, params.kernel());
  g.bias = sum(grad_out, {0, 2, 3, 4});
  return g;
}

Tensor pixelwise_norm(const Tensor& a, float epsilon) {
  if (a.ndim() < 2 || a.dim(1) < 1) {
    throw ShapeError("pixelwise_norm: needs a channel axis, got " +
                     to_string(a.shape()));
  }
  Tensor ms = mean(square(a), {1}, true);
  Tensor rms = sqrt(add_scalar(ms, epsilon));
  return div(a, expand(rms, a.shape()));
}

Tensor minibatch_stddev(const Tensor& a) {
  if (a.ndim() != 5 || a.dim(0) < 1) {
    throw ShapeError("minibatch_stddev: expected [B,C,D,H,W], got " +
                     to_string(a.shape()));
  }
  Tensor centred = sub(a, expand(mean(a, {0}, true), a.shape()));
  Tensor stddev = sqrt(mean(square(centred), {0}, true));
  Tensor summary = mean(stddev, {}, true);
  const auto& s = a.shape();
  Tensor feature = expand(summary, {s[0], 1, s[2], s[3], s[4]});
  return concat({a, feature}, 1);
}

Tensor fade_blend(float alpha, const Tensor& coarse, const Tensor& fine) {
  if (!(alpha >= 0.0f && alpha <= 1.0f)) {
    throw ValueError("fade_blend: alpha " + std::to_string(alpha) +
                     " outside [0, 1]");
  }
  if (coarse.shape() != fine.shape()) {
    throw ShapeError("fade_blend: shape mismatch " + to_string(coarse.shape()) +
                     " vs " + to_string(fine.shape()));
  }
  return add(scale(coarse, 1.0f - alpha), scale(fine, alpha));
}

Tensor dense_forward(const Tensor& x, const Tensor& weight,
                     const Tensor& bias, bool use_equalized) {
  if (x.ndim() != 2 || weight.ndim() != 2 || weight.dim(1) != x.dim(1)) {
    throw ShapeError("dense_forward: input " + to_string(x.shape()) +
                     " incompatible with weight " + to_string(weight.shape()));
  }
  const Tensor w =
      use_equalized ? scale(weight, equalized_scale(weight.dim(1))) : weight;
  return add_channel_bias(matmul(x, w, false, true), bias);
}

}  // namespace voxgan
