#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "voxgan/volume.hpp"

namespace voxgan {

// Row-major 8-bit image.
struct GrayImage {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// [-1, 1] -> [0, 255], rounded to nearest and clamped. NaN maps to 0.
std::uint8_t to_gray(float value);

// Central slices. Axial fixes D (rows H, cols W); coronal fixes H (rows D,
// cols W); sagittal fixes W (rows D, cols H).
GrayImage axial_slice(const Volume& v);
GrayImage coronal_slice(const Volume& v);
GrayImage sagittal_slice(const Volume& v);

// "P5\n<w> <h>\n255\n" followed by the raw pixels.
std::string encode_pgm(const GrayImage& image);

// Writes <prefix>_axial.pgm, <prefix>_coronal.pgm, <prefix>_sagittal.pgm.
std::array<std::filesystem::path, 3> export_slices(
    const Volume& v, const std::filesystem::path& prefix);

}  // namespace voxgan
