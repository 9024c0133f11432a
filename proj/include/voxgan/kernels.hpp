#pragma once

#include <cstdint>
#include <span>

// Raw compute kernels over contiguous row-major float buffers. No allocation,
// no autodiff; the op layer and the volume preprocessing both call these.
namespace voxgan::kernels {

struct ConvGeometry {
  std::int64_t batch = 1;
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t depth = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;
  int kernel = 3;
  // Zero padding on every side. "Same" convolution uses (kernel - 1) / 2.
  int pad = 1;

  std::int64_t volume() const { return depth * height * width; }
  std::int64_t taps() const {
    return static_cast<std::int64_t>(kernel) * kernel * kernel;
  }
};

// out[b,o,p] = sum_{c,kd,kh,kw} w[o,c,kd,kh,kw] * in[b,c,p + k - pad].
// Each output voxel accumulates in the fixed order (c, kd, kh, kw).
void conv3d_forward(std::span<const float> in, std::span<const float> weight,
                    std::span<float> out, const ConvGeometry& g);

// grad_in = conv3d_forward(grad_out, flipped/transposed weight).
void conv3d_backward_data(std::span<const float> grad_out,
                          std::span<const float> weight,
                          std::span<float> grad_in, const ConvGeometry& g);

// grad_w[o,c,k] = sum_{b,p} grad_out[b,o,p] * in[b,c,p + k - pad].
void conv3d_backward_weight(std::span<const float> in,
                            std::span<const float> grad_out,
                            std::span<float> grad_weight,
                            const ConvGeometry& g);

// Mean of each 2x2x2 block. `planes` counts independent D*H*W volumes.
void downsample_avg_2x(std::span<const float> in, std::span<float> out,
                       std::int64_t planes, std::int64_t depth,
                       std::int64_t height, std::int64_t width);

// Replicates each voxel into a 2x2x2 block. Extents are the input's.
void upsample_nearest_2x(std::span<const float> in, std::span<float> out,
                         std::int64_t planes, std::int64_t depth,
                         std::int64_t height, std::int64_t width);

}  // namespace voxgan::kernels
