#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voxgan/rng.hpp"
#include "voxgan/volume.hpp"

namespace voxgan {

// Euler angles in degrees, composed as Rz * Ry * Rx.
struct Rotation {
  double x_deg = 0.0;
  double y_deg = 0.0;
  double z_deg = 0.0;
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

inline constexpr int kAugmentCopies = 10;
inline constexpr double kAugmentSigmaDeg = 10.0;

// Three i.i.d. N(0, sigma^2) angles drawn in x, y, z order.
Rotation sample_rotation(Rng& rng, double sigma_deg = kAugmentSigmaDeg);
Matrix3 rotation_matrix(const Rotation& r);

// Output voxel p (x = w, y = h, z = d) takes the trilinear sample of `v` at
// R^T (p - c) + c, c = (N - 1) / 2 per axis. Points more than 1e-6 voxels
// outside the grid take `fill`.
Volume resample_trilinear(const Volume& v, const Matrix3& r, float fill = 0.0f);
Volume resample_trilinear(const Volume& v, const Rotation& r,
                          float fill = 0.0f);

struct AugmentRecord {
  std::string output;
  std::string source;
  Rotation rotation;
  std::uint64_t seed = 0;
};

struct AugmentOptions {
  int k = kAugmentCopies;
  double sigma_deg = kAugmentSigmaDeg;
  std::uint64_t seed = 0;
  float fill = 0.0f;
  // Overrides `fill` with each source volume's minimum.
  bool fill_with_minimum = false;
};

// Seed of copy `copy` of volume `volume`; independent of evaluation order.
std::uint64_t augment_seed(std::uint64_t global_seed, std::uint64_t volume,
                           std::uint64_t copy);

// "<stem>_rot<NN>.nii.gz" for a source path.
std::string augmented_name(const std::string& source, int copy);

using VolumeLoader = std::function<Volume(std::size_t index)>;
using AugmentSink =
    std::function<void(const AugmentRecord& record, const Volume& volume)>;

// Produces exactly k rotated copies per source, originals excluded. The sink
// receives copies in (source, copy) order.
std::vector<AugmentRecord> build_augmented_dataset(
    const std::vector<std::string>& sources, const VolumeLoader& load,
    const AugmentOptions& options, const AugmentSink& sink);

// Tab-separated: output, source, theta_x, theta_y, theta_z, seed.
std::string format_manifest_line(const AugmentRecord& r);
AugmentRecord parse_manifest_line(const std::string& line);
std::string format_augment_manifest(const std::vector<AugmentRecord>& records);
std::vector<AugmentRecord> parse_augment_manifest(const std::string& text);

}  // namespace voxgan
