#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "voxgan/tensor.hpp"

namespace voxgan {

// (D, H, W): slowest to fastest axis. NIfTI's (x, y, z) map to (W, H, D).
using Dims3 = std::array<std::int64_t, 3>;

inline constexpr std::size_t kNiftiHeaderSize = 348;
using RawNiftiHeader = std::array<char, kNiftiHeaderSize>;

struct ValueRange {
  float min = 0.0f;
  float max = 0.0f;
};

// Scalar voxel grid with spacing and intensity metadata.
struct Volume {
  Dims3 dims{0, 0, 0};
  // Millimetres along (x, y, z), i.e. (W, H, D).
  std::array<double, 3> voxel_size_mm{1.0, 1.0, 1.0};
  std::vector<float> data;
  // Range of the data as loaded or created.
  ValueRange intensity_range;
  // Original range when the data has been mapped to [-1, 1].
  std::optional<ValueRange> normalized_from;
  // Header of the file this volume came from; orientation fields are written
  // back verbatim.
  std::optional<RawNiftiHeader> source_header;

  static Volume zeros(const Dims3& dims);
  std::int64_t numel() const { return dims[0] * dims[1] * dims[2]; }
  std::int64_t index(std::int64_t d, std::int64_t h, std::int64_t w) const {
    return (d * dims[1] + h) * dims[2] + w;
  }
  float at(std::int64_t d, std::int64_t h, std::int64_t w) const {
    return data[static_cast<std::size_t>(index(d, h, w))];
  }
  void validate() const;
  void refresh_range();

  // [1, 1, D, H, W] copy.
  Tensor to_tensor() const;
  // Accepts [D,H,W], [1,D,H,W] or [1,1,D,H,W].
  static Volume from_tensor(const Tensor& t,
                            std::array<double, 3> voxel_size_mm = {1, 1, 1});
};

ValueRange value_range(const std::vector<float>& values);

// 2x2x2 mean pooling; odd extents drop their last slice first. Voxel size
// doubles.
Volume downsample_by_2(const Volume& v);

// Centred crop; when the margin is odd the extra voxel is removed from the
// high-index side.
Volume center_crop(const Volume& v, const Dims3& target);

// Linear map of [min, max] to [-1, 1]; remembers the original range.
Volume normalize_intensity(const Volume& v);
Volume invert_normalization(const Volume& v);

// Nearest-neighbour replication by an integer factor per axis.
Volume upsample_to(const Volume& v, const Dims3& target);

}  // namespace voxgan
