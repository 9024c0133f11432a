#include "voxgan/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "voxgan/error.hpp"

namespace voxgan {
namespace {

constexpr double kBoundaryTolerance = 1e-6;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

Matrix3 multiply(const Matrix3& a, const Matrix3& b) {
  Matrix3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i][k] * b[k][j];
      c[i][j] = s;
    }
  }
  return c;
}

// Maps a continuous coordinate to (lower index, fraction); false if outside.
bool locate(double t, std::int64_t n, std::int64_t& i0, double& f) {
  const double hi = static_cast<double>(n - 1);
  if (t < -kBoundaryTolerance || t > hi + kBoundaryTolerance) return false;
  t = std::clamp(t, 0.0, hi);
  i0 = std::min(static_cast<std::int64_t>(std::floor(t)), n - 2);
  f = t - static_cast<double>(i0);
  return true;
}

std::string strip_nifti_suffix(std::string name) {
  for (const char* suffix : {".nii.gz", ".nii"}) {
    const std::string s = suffix;
    if (name.size() > s.size() &&
        name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return name.substr(0, name.size() - s.size());
    }
  }
  return name;
}

}  // namespace

Rotation sample_rotation(Rng& rng, double sigma_deg) {
  if (!(sigma_deg >= 0.0)) throw ValueError("sample_rotation: sigma < 0");
  Rotation r;
  r.x_deg = sigma_deg * rng.normal();
  r.y_deg = sigma_deg * rng.normal();
  r.z_deg = sigma_deg * rng.normal();
  return r;
}

Matrix3 rotation_matrix(const Rotation& r) {
  const double cx = std::cos(radians(r.x_deg)), sx = std::sin(radians(r.x_deg));
  const double cy = std::cos(radians(r.y_deg)), sy = std::sin(radians(r.y_deg));
  const double cz = std::cos(radians(r.z_deg)), sz = std::sin(radians(r.z_deg));
  const Matrix3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Matrix3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Matrix3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  return multiply(rz, multiply(ry, rx));
}

Volume resample_trilinear(const Volume& v, const Rotation& r, float fill) {
  return resample_trilinear(v, rotation_matrix(r), fill);
}

Volume resample_trilinear(const Volume& v, const Matrix3& r, float fill) {
  v.validate();
  for (auto d : v.dims) {
    if (d < 2) throw ShapeError("resample_trilinear: extents must be >= 2");
  }
  const std::int64_t nz = v.dims[0], ny = v.dims[1], nx = v.dims[2];
  const double c[3] = {(nx - 1) / 2.0, (ny - 1) / 2.0, (nz - 1) / 2.0};
  Volume out = v;

#pragma omp parallel for schedule(static)
  for (std::int64_t d = 0; d < nz; ++d) {
    for (std::int64_t h = 0; h < ny; ++h) {
      for (std::int64_t w = 0; w < nx; ++w) {
        const double p[3] = {w - c[0], h - c[1], d - c[2]};
        double q[3];
        for (int i = 0; i < 3; ++i) {
          // R^T row i = column i of R.
          q[i] = r[0][i] * p[0] + r[1][i] * p[1] + r[2][i] * p[2] + c[i];
        }
        std::int64_t x0, y0, z0;
        double fx, fy, fz;
        float value = fill;
        if (locate(q[0], nx, x0, fx) && locate(q[1], ny, y0, fy) &&
            locate(q[2], nz, z0, fz)) {
          auto at = [&](std::int64_t dz, std::int64_t dy, std::int64_t dx) {
            return static_cast<double>(v.at(z0 + dz, y0 + dy, x0 + dx));
          };
          auto lerp = [](double a, double b, double f) {
            return a * (1.0 - f) + b * f;
          };
          const double c00 = lerp(at(0, 0, 0), at(0, 0, 1), fx);
          const double c01 = lerp(at(0, 1, 0), at(0, 1, 1), fx);
          const double c10 = lerp(at(1, 0, 0), at(1, 0, 1), fx);
          const double c11 = lerp(at(1, 1, 0), at(1, 1, 1), fx);
          value = static_cast<float>(
              lerp(lerp(c00, c01, fy), lerp(c10, c11, fy), fz));
        }
        out.data[static_cast<std::size_t>(out.index(d, h, w))] = value;
      }
    }
  }
  out.refresh_range();
  return out;
}

std::uint64_t augment_seed(std::uint64_t global_seed, std::uint64_t volume,
                           std::uint64_t copy) {
  return mix_seed(mix_seed(mix_seed(global_seed) ^ volume) ^ copy);
}

std::string augmented_name(const std::string& source, int copy) {
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_rot%02d.nii.gz", copy);
  const auto slash = source.find_last_of('/');
  const std::string base =
      slash == std::string::npos ? source : source.substr(slash + 1);
  return strip_nifti_suffix(base) + suffix;
}

std::vector<AugmentRecord> build_augmented_dataset(
    const std::vector<std::string>& sources, const VolumeLoader& load,
    const AugmentOptions& options, const AugmentSink& sink) {
  if (options.k < 1) throw ValueError("build_augmented_dataset: k must be >= 1");
  if (!(options.sigma_deg >= 0.0)) {
    throw ValueError("build_augmented_dataset: sigma must be >= 0");
  }
  std::vector<AugmentRecord> records;
  records.reserve(sources.size() * static_cast<std::size_t>(options.k));
  for (std::size_t vi = 0; vi < sources.size(); ++vi) {
    const Volume source = load(vi);
    const float fill = options.fill_with_minimum
                           ? value_range(source.data).min
                           : options.fill;
    std::vector<AugmentRecord> batch(static_cast<std::size_t>(options.k));
    std::vector<Volume> copies(batch.size());
    for (int ci = 0; ci < options.k; ++ci) {
      auto& rec = batch[static_cast<std::size_t>(ci)];
      rec.source = sources[vi];
      rec.output = augmented_name(sources[vi], ci);
      rec.seed = augment_seed(options.seed, vi, static_cast<std::uint64_t>(ci));
      Rng rng(rec.seed);
      rec.rotation = sample_rotation(rng, options.sigma_deg);
      copies[static_cast<std::size_t>(ci)] =
          resample_trilinear(source, rec.rotation, fill);
    }
    for (std::size_t ci = 0; ci < batch.size(); ++ci) {
      if (sink) sink(batch[ci], copies[ci]);
      records.push_back(std::move(batch[ci]));
    }
  }
  return records;
}

std::string format_manifest_line(const AugmentRecord& r) {
  char angles[96];
  std::snprintf(angles, sizeof angles, "%.17g\t%.17g\t%.17g", r.rotation.x_deg,
                r.rotation.y_deg, r.rotation.z_deg);
  return r.output + '\t' + r.source + '\t' + angles + '\t' +
         std::to_string(r.seed);
}

AugmentRecord parse_manifest_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) fields.push_back(field);
  if (fields.size() != 6) {
    throw DataError("augment manifest: expected 6 fields in '" + line + "'");
  }
  AugmentRecord r;
  r.output = fields[0];
  r.source = fields[1];
  try {
    r.rotation.x_deg = std::stod(fields[2]);
    r.rotation.y_deg = std::stod(fields[3]);
    r.rotation.z_deg = std::stod(fields[4]);
    r.seed = std::stoull(fields[5]);
  } catch (const std::exception&) {
    throw DataError("augment manifest: bad number in '" + line + "'");
  }
  return r;
}

std::string format_augment_manifest(const std::vector<AugmentRecord>& records) {
  std::string out = "# output\tsource\ttheta_x\ttheta_y\ttheta_z\tseed\n";
  for (const auto& r : records) out += format_manifest_line(r) + '\n';
  return out;
}

std::vector<AugmentRecord> parse_augment_manifest(const std::string& text) {
  std::vector<AugmentRecord> records;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    records.push_back(parse_manifest_line(line));
  }
  return records;
}

}  // namespace voxgan
