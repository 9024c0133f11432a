#include "voxgan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace voxgan {
namespace {

struct Ellipsoid {
  double c[3];  // centre, normalized (z, y, x) in [-1, 1]
  double r[3];  // semi-axes, normalized
};

// < 1 inside, 1 on the surface.
double ellipsoid_radius(const Ellipsoid& e, const double p[3]) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double t = (p[i] - e.c[i]) / e.r[i];
    s += t * t;
  }
  return std::sqrt(s);
}

double smooth_inside(double radius, double softness) {
  return 1.0 / (1.0 + std::exp((radius - 1.0) / softness));
}

struct Blob {
  double c[3];
  double sigma;
  double amplitude;
};

double blob_value(const Blob& b, const double p[3]) {
  double s = 0.0;
  for (int i = 0; i < 3; ++i) s += (p[i] - b.c[i]) * (p[i] - b.c[i]);
  return b.amplitude * std::exp(-s / (2.0 * b.sigma * b.sigma));
}

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * rng.uniform();
}

}  // namespace

Volume make_synthetic_brain(const Dims3& dims, Rng& rng) {
  Volume v = Volume::zeros(dims);
  v.voxel_size_mm = {0.7, 0.7, 0.7};

  const Ellipsoid head{{uniform(rng, -0.03, 0.03), uniform(rng, -0.03, 0.03),
                        uniform(rng, -0.03, 0.03)},
                       {uniform(rng, 0.70, 0.80), uniform(rng, 0.75, 0.85),
                        uniform(rng, 0.62, 0.72)}};
  Ellipsoid ventricles[2];
  for (int k = 0; k < 2; ++k) {
    const double side = k == 0 ? -1.0 : 1.0;
    ventricles[k] = {{uniform(rng, -0.05, 0.10), uniform(rng, -0.10, 0.10),
                      side * uniform(rng, 0.08, 0.14)},
                     {uniform(rng, 0.12, 0.20), uniform(rng, 0.22, 0.32),
                      uniform(rng, 0.05, 0.08)}};
  }
  std::vector<Blob> blobs(4 + rng.below(4));
  for (auto& b : blobs) {
    for (double& c : b.c) c = uniform(rng, -0.45, 0.45);
    b.sigma = uniform(rng, 0.05, 0.15);
    b.amplitude = uniform(rng, -120.0, 120.0);
  }

  for (std::int64_t d = 0; d < dims[0]; ++d) {
    for (std::int64_t h = 0; h < dims[1]; ++h) {
      for (std::int64_t w = 0; w < dims[2]; ++w) {
        const double p[3] = {2.0 * (d + 0.5) / dims[0] - 1.0,
                             2.0 * (h + 0.5) / dims[1] - 1.0,
                             2.0 * (w + 0.5) / dims[2] - 1.0};
        const double rh = ellipsoid_radius(head, p);
        const double brain = smooth_inside(rh, 0.02);
        // Cortex: darker band just inside the surface.
        const double cortex = std::exp(-std::pow((rh - 0.92) / 0.05, 2.0));
        double value = brain * (650.0 - 220.0 * cortex);
        for (const auto& e : ventricles) {
          value -= 480.0 * brain * smooth_inside(ellipsoid_radius(e, p), 0.08);
        }
        for (const auto& b : blobs) value += brain * blob_value(b, p);
        v.data[static_cast<std::size_t>(v.index(d, h, w))] =
            static_cast<float>(std::max(value, 0.0));
      }
    }
  }
  v.refresh_range();
  return v;
}

Tensor make_blob_dataset(std::int64_t count, std::int64_t resolution,
                         std::uint64_t seed) {
  Rng rng(seed);
  const std::int64_t n = resolution * resolution * resolution;
  std::vector<float> data(static_cast<std::size_t>(count * n));
  for (std::int64_t i = 0; i < count; ++i) {
    std::vector<Blob> blobs(1 + rng.below(3));
    for (auto& b : blobs) {
      for (double& c : b.c) c = uniform(rng, -0.5, 0.5);
      b.sigma = uniform(rng, 0.15, 0.35);
      b.amplitude = uniform(rng, 0.8, 2.0);
    }
    float* out = data.data() + i * n;
    for (std::int64_t d = 0; d < resolution; ++d) {
      for (std::int64_t h = 0; h < resolution; ++h) {
        for (std::int64_t w = 0; w < resolution; ++w) {
          const double p[3] = {2.0 * (d + 0.5) / resolution - 1.0,
                               2.0 * (h + 0.5) / resolution - 1.0,
                               2.0 * (w + 0.5) / resolution - 1.0};
          double s = 0.0;
          for (const auto& b : blobs) s += blob_value(b, p);
          out[(d * resolution + h) * resolution + w] =
              static_cast<float>(std::min(s, 2.0) - 1.0);
        }
      }
    }
  }
  return Tensor::from_vector({count, 1, resolution, resolution, resolution},
                             data);
}

}  // namespace voxgan
