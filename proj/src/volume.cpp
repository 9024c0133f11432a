#include "voxgan/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voxgan/error.hpp"
#include "voxgan/kernels.hpp"
#include "voxgan/log.hpp"

namespace voxgan {
namespace {

std::string dims_string(const Dims3& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" +
         std::to_string(d[2]);
}

}  // namespace

Volume Volume::zeros(const Dims3& dims) {
  Volume v;
  v.dims = dims;
  v.data.assign(static_cast<std::size_t>(v.numel()), 0.0f);
  return v;
}

void Volume::validate() const {
  for (auto d : dims) {
    if (d < 1) throw ShapeError("volume extents must be positive");
  }
  if (static_cast<std::int64_t>(data.size()) != numel()) {
    throw ShapeError("volume " + dims_string(dims) + " holds " +
                     std::to_string(data.size()) + " values");
  }
  for (double s : voxel_size_mm) {
    if (!(s > 0.0)) throw ValueError("voxel size must be positive");
  }
}

void Volume::refresh_range() { intensity_range = value_range(data); }

Tensor Volume::to_tensor() const {
  return Tensor::from_vector({1, 1, dims[0], dims[1], dims[2]}, data);
}

Volume Volume::from_tensor(const Tensor& t,
                           std::array<double, 3> voxel_size_mm) {
  const auto& s = t.shape();
  const bool ok = s.size() == 3 || (s.size() == 4 && s[0] == 1) ||
                  (s.size() == 5 && s[0] == 1 && s[1] == 1);
  if (!ok) {
    throw ShapeError("Volume::from_tensor: cannot view " + to_string(s) +
                     " as a single volume");
  }
  Volume v;
  v.dims = {s[s.size() - 3], s[s.size() - 2], s[s.size() - 1]};
  v.voxel_size_mm = voxel_size_mm;
  v.data = t.to_vector();
  v.refresh_range();
  return v;
}

ValueRange value_range(const std::vector<float>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

Volume downsample_by_2(const Volume& v) {
  v.validate();
  Dims3 even{v.dims[0] & ~std::int64_t{1}, v.dims[1] & ~std::int64_t{1},
             v.dims[2] & ~std::int64_t{1}};
  for (auto e : even) {
    if (e < 2) throw ShapeError("downsample_by_2: extent below 2");
  }
  Volume src = v;
  if (even != v.dims) {
    log_warning("downsample_by_2: truncating " + dims_string(v.dims) + " to " +
                dims_string(even) + " (odd extent)");
    // Truncation keeps the low indices.
    src = Volume::zeros(even);
    for (std::int64_t d = 0; d < even[0]; ++d) {
      for (std::int64_t h = 0; h < even[1]; ++h) {
        const float* row = v.data.data() + v.index(d, h, 0);
        std::copy(row, row + even[2], src.data.data() + src.index(d, h, 0));
      }
    }
  }
  Volume out;
  out.dims = {even[0] / 2, even[1] / 2, even[2] / 2};
  out.data.resize(static_cast<std::size_t>(out.numel()));
  kernels::downsample_avg_2x(src.data, out.data, 1, even[0], even[1], even[2]);
  for (int i = 0; i < 3; ++i) out.voxel_size_mm[i] = 2.0 * v.voxel_size_mm[i];
  out.source_header = v.source_header;
  out.normalized_from = v.normalized_from;
  out.refresh_range();
  return out;
}

Volume center_crop(const Volume& v, const Dims3& target) {
  v.validate();
  Dims3 lo{};
  for (int i = 0; i < 3; ++i) {
    if (target[i] < 1 || target[i] > v.dims[i]) {
      throw ShapeError("center_crop: target " + dims_string(target) +
                       " exceeds volume " + dims_string(v.dims));
    }
    lo[i] = (v.dims[i] - target[i]) / 2;
  }
  Volume out = v;
  out.dims = target;
  out.data.resize(static_cast<std::size_t>(out.numel()));
  for (std::int64_t d = 0; d < target[0]; ++d) {
    for (std::int64_t h = 0; h < target[1]; ++h) {
      const float* src = v.data.data() + v.index(d + lo[0], h + lo[1], lo[2]);
      std::copy(src, src + target[2],
                out.data.data() + out.index(d, h, 0));
    }
  }
  out.refresh_range();
  return out;
}

Volume normalize_intensity(const Volume& v) {
  v.validate();
  const ValueRange r = value_range(v.data);
  if (!(r.max > r.min)) {
    throw ValueError("normalize_intensity: constant volume cannot be mapped");
  }
  const double lo = r.min, span = static_cast<double>(r.max) - r.min;
  Volume out = v;
  for (auto& x : out.data) {
    x = static_cast<float>(2.0 * (x - lo) / span - 1.0);
  }
  out.normalized_from = r;
  out.refresh_range();
  return out;
}

Volume invert_normalization(const Volume& v) {
  if (!v.normalized_from) {
    throw ValueError("invert_normalization: volume was not normalized");
  }
  const double lo = v.normalized_from->min;
  const double span = static_cast<double>(v.normalized_from->max) - lo;
  Volume out = v;
  for (auto& x : out.data) {
    x = static_cast<float>((x + 1.0) * 0.5 * span + lo);
  }
  out.normalized_from.reset();
  out.refresh_range();
  return out;
}

Volume upsample_to(const Volume& v, const Dims3& target) {
  v.validate();
  Dims3 factor{};
  for (int i = 0; i < 3; ++i) {
    if (target[i] < v.dims[i] || target[i] % v.dims[i] != 0) {
      throw ShapeError("upsample_to: " + dims_string(target) +
                       " is not an integer multiple of " +
                       dims_string(v.dims));
    }
    factor[i] = target[i] / v.dims[i];
  }
  Volume out = v;
  out.dims = target;
  out.data.resize(static_cast<std::size_t>(out.numel()));
  for (std::int64_t d = 0; d < target[0]; ++d) {
    for (std::int64_t h = 0; h < target[1]; ++h) {
      for (std::int64_t w = 0; w < target[2]; ++w) {
        out.data[static_cast<std::size_t>(out.index(d, h, w))] =
            v.at(d / factor[0], h / factor[1], w / factor[2]);
      }
    }
  }
  // voxel_size_mm is (x, y, z) = (W, H, D).
  for (int i = 0; i < 3; ++i) {
    out.voxel_size_mm[i] =
        v.voxel_size_mm[i] / static_cast<double>(factor[2 - i]);
  }
  out.refresh_range();
  return out;
}

}  // namespace voxgan
