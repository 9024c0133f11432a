#include "voxgan/slices.hpp"

#include <cmath>

#include "voxgan/nifti.hpp"

namespace voxgan {
namespace {

template <class At>
GrayImage render(std::int64_t width, std::int64_t height, At at) {
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width * height));
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      img.pixels[static_cast<std::size_t>(r * width + c)] = to_gray(at(r, c));
    }
  }
  return img;
}

}  // namespace

std::uint8_t to_gray(float value) {
  if (std::isnan(value)) return 0;
  const double q = std::round((static_cast<double>(value) + 1.0) * 127.5);
  if (q <= 0.0) return 0;
  if (q >= 255.0) return 255;
  return static_cast<std::uint8_t>(q);
}

GrayImage axial_slice(const Volume& v) {
  v.validate();
  const auto d = v.dims[0] / 2;
  return render(v.dims[2], v.dims[1],
                [&](auto r, auto c) { return v.at(d, r, c); });
}

GrayImage coronal_slice(const Volume& v) {
  v.validate();
  const auto h = v.dims[1] / 2;
  return render(v.dims[2], v.dims[0],
                [&](auto r, auto c) { return v.at(r, h, c); });
}

GrayImage sagittal_slice(const Volume& v) {
  v.validate();
  const auto w = v.dims[2] / 2;
  return render(v.dims[1], v.dims[0],
                [&](auto r, auto c) { return v.at(r, c, w); });
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()),
             image.pixels.size());
  return out;
}

std::array<std::filesystem::path, 3> export_slices(
    const Volume& v, const std::filesystem::path& prefix) {
  const std::array<std::pair<const char*, GrayImage>, 3> views = {{
      {"_axial.pgm", axial_slice(v)},
      {"_coronal.pgm", coronal_slice(v)},
      {"_sagittal.pgm", sagittal_slice(v)},
  }};
  std::array<std::filesystem::path, 3> paths;
  for (std::size_t i = 0; i < views.size(); ++i) {
    paths[i] = prefix;
    paths[i] += views[i].first;
    write_file_bytes(paths[i], encode_pgm(views[i].second));
  }
  return paths;
}

}  // namespace voxgan
