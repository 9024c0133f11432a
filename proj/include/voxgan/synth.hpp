#pragma once

#include <cstdint>

#include "voxgan/rng.hpp"
#include "voxgan/tensor.hpp"
#include "voxgan/volume.hpp"

namespace voxgan {

// Brain-like phantom in raw intensity units: a smooth ellipsoidal head on a
// zero background, a darker cortical shell, two ellipsoid "ventricles" and a
// few Gaussian blobs. Voxel size 0.7 mm.
Volume make_synthetic_brain(const Dims3& dims, Rng& rng);

// [count, 1, r, r, r] volumes in [-1, 1]: a -1 background with one to three
// Gaussian blobs of random centre, width and amplitude.
Tensor make_blob_dataset(std::int64_t count, std::int64_t resolution,
                         std::uint64_t seed);

}  // namespace voxgan
