#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "voxgan/error.hpp"
#include "voxgan/volume.hpp"

namespace voxgan {

enum class NiftiErrorKind {
  io,
  bad_header,
  bad_magic,
  unsupported_format,
  unsupported_datatype,
  unsupported_dims,
  truncated,
  compression,
};

class NiftiError : public DataError {
 public:
  NiftiError(NiftiErrorKind kind, const std::string& what)
      : DataError(what), kind_(kind) {}
  NiftiErrorKind kind() const { return kind_; }

 private:
  NiftiErrorKind kind_;
};

// Fields of a NIfTI-1 header this library interprets.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 16;
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::array<char, 4> magic{'n', '+', '1', '\0'};
};

inline constexpr std::int16_t kNiftiInt16 = 4;
inline constexpr std::int16_t kNiftiFloat32 = 16;
inline constexpr std::size_t kNiftiVoxOffset = 352;

NiftiHeader parse_nifti_header(const RawNiftiHeader& raw);

// Byte-level codec. decode_nifti accepts plain or gzip bytes.
std::string encode_nifti(const Volume& v);
Volume decode_nifti(std::string_view bytes);

// The path suffix ".gz" selects gzip output.
Volume read_nifti(const std::filesystem::path& path);
void write_nifti(const Volume& v, const std::filesystem::path& path);

bool is_gzip(std::string_view bytes);
std::string gzip_compress(std::string_view bytes);
std::string gzip_decompress(std::string_view bytes);

std::string read_file_bytes(const std::filesystem::path& path);
// Writes through a temporary file and renames it into place.
void write_file_bytes(const std::filesystem::path& path,
                      std::string_view bytes);

}  // namespace voxgan
