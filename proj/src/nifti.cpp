#include "voxgan/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "voxgan/binary_io.hpp"

namespace voxgan {
namespace {

using binary::load_le;
using binary::store_le;

// Byte offsets within the 348-byte header.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffRegular = 38;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffMagic = 344;

constexpr int kGzipWindowBits = 15 + 16;
constexpr std::int32_t kNifti2HeaderSize = 540;

[[noreturn]] void fail(NiftiErrorKind kind, const std::string& what) {
  throw NiftiError(kind, what);
}

void write_header_fields(char* h, const Volume& v) {
  store_le<std::int32_t>(h + kOffSizeofHdr, 348);
  h[kOffRegular] = 'r';
  const std::int16_t dim[8] = {3,
                               static_cast<std::int16_t>(v.dims[2]),
                               static_cast<std::int16_t>(v.dims[1]),
                               static_cast<std::int16_t>(v.dims[0]),
                               1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store_le(h + kOffDim + 2 * i, dim[i]);
  store_le(h + kOffDatatype, kNiftiFloat32);
  store_le<std::int16_t>(h + kOffBitpix, 32);
  // pixdim[0] (qfac) is kept from a source header.
  if (load_le<float>(h + kOffPixdim) == 0.0f) {
    store_le(h + kOffPixdim, 1.0f);
  }
  for (int i = 0; i < 3; ++i) {
    store_le(h + kOffPixdim + 4 * (i + 1),
             static_cast<float>(v.voxel_size_mm[i]));
  }
  store_le(h + kOffVoxOffset, static_cast<float>(kNiftiVoxOffset));
  store_le(h + kOffSclSlope, 0.0f);
  store_le(h + kOffSclInter, 0.0f);
  std::memcpy(h + kOffMagic, "n+1\0", 4);
}

void check_extents(const Volume& v) {
  for (auto d : v.dims) {
    if (d < 1 || d > 32767) {
      fail(NiftiErrorKind::unsupported_dims,
           "write_nifti: extent " + std::to_string(d) +
               " outside the NIfTI-1 range");
    }
  }
}

}  // namespace

NiftiHeader parse_nifti_header(const RawNiftiHeader& raw) {
  const char* h = raw.data();
  NiftiHeader hdr;
  hdr.sizeof_hdr = load_le<std::int32_t>(h + kOffSizeofHdr);
  if (hdr.sizeof_hdr != 348) {
    if (hdr.sizeof_hdr == kNifti2HeaderSize) {
      fail(NiftiErrorKind::unsupported_format, "NIfTI-2 files are not supported");
    }
    if (binary::byteswap_value(hdr.sizeof_hdr) == 348) {
      fail(NiftiErrorKind::unsupported_format,
           "big-endian NIfTI files are not supported");
    }
    fail(NiftiErrorKind::bad_header,
         "sizeof_hdr is " + std::to_string(hdr.sizeof_hdr) + ", expected 348");
  }
  std::memcpy(hdr.magic.data(), h + kOffMagic, 4);
  if (std::memcmp(hdr.magic.data(), "ni1\0", 4) == 0) {
    fail(NiftiErrorKind::unsupported_format,
         ".hdr/.img pairs are not supported; convert to single-file .nii");
  }
  if (std::memcmp(hdr.magic.data(), "n+1\0", 4) != 0) {
    fail(NiftiErrorKind::bad_magic, "bad NIfTI magic");
  }
  for (int i = 0; i < 8; ++i) {
    hdr.dim[i] = load_le<std::int16_t>(h + kOffDim + 2 * i);
  }
  hdr.datatype = load_le<std::int16_t>(h + kOffDatatype);
  hdr.bitpix = load_le<std::int16_t>(h + kOffBitpix);
  for (int i = 0; i < 8; ++i) {
    hdr.pixdim[i] = load_le<float>(h + kOffPixdim + 4 * i);
  }
  hdr.vox_offset = load_le<float>(h + kOffVoxOffset);
  hdr.scl_slope = load_le<float>(h + kOffSclSlope);
  hdr.scl_inter = load_le<float>(h + kOffSclInter);

  if (hdr.dim[0] != 3) {
    fail(NiftiErrorKind::unsupported_dims,
         "expected a 3-D volume, dim[0] = " + std::to_string(hdr.dim[0]));
  }
  for (int i = 1; i <= 3; ++i) {
    if (hdr.dim[i] < 1) {
      fail(NiftiErrorKind::unsupported_dims,
           "dim[" + std::to_string(i) + "] must be positive");
    }
  }
  const bool int16 = hdr.datatype == kNiftiInt16 && hdr.bitpix == 16;
  const bool float32 = hdr.datatype == kNiftiFloat32 && hdr.bitpix == 32;
  if (!int16 && !float32) {
    fail(NiftiErrorKind::unsupported_datatype,
         "unsupported datatype " + std::to_string(hdr.datatype) +
             " (bitpix " + std::to_string(hdr.bitpix) +
             "); only int16 (4) and float32 (16) are read");
  }
  if (!(hdr.vox_offset >= static_cast<float>(kNiftiHeaderSize)) ||
      hdr.vox_offset != std::floor(hdr.vox_offset)) {
    fail(NiftiErrorKind::bad_header, "invalid vox_offset");
  }
  return hdr;
}

std::string encode_nifti(const Volume& v) {
  v.validate();
  check_extents(v);
  std::string out(kNiftiVoxOffset, '\0');
  if (v.source_header) {
    std::memcpy(out.data(), v.source_header->data(), kNiftiHeaderSize);
  } else {
    out[kOffXyztUnits] = 2;  // millimetres
  }
  write_header_fields(out.data(), v);
  // Bytes 348..351: empty extension flag.
  std::memset(out.data() + kNiftiHeaderSize, 0, 4);
  out.reserve(out.size() + v.data.size() * 4);
  for (float x : v.data) binary::put_le(out, x);
  return out;
}

Volume decode_nifti(std::string_view bytes) {
  std::string inflated;
  if (is_gzip(bytes)) {
    inflated = gzip_decompress(bytes);
    bytes = inflated;
  }
  if (bytes.size() < kNiftiHeaderSize) {
    fail(NiftiErrorKind::truncated,
         "file holds " + std::to_string(bytes.size()) +
             " bytes, shorter than a NIfTI-1 header");
  }
  RawNiftiHeader raw;
  std::memcpy(raw.data(), bytes.data(), kNiftiHeaderSize);
  const NiftiHeader hdr = parse_nifti_header(raw);

  Volume v;
  v.dims = {hdr.dim[3], hdr.dim[2], hdr.dim[1]};
  for (int i = 0; i < 3; ++i) {
    const float s = std::fabs(hdr.pixdim[i + 1]);
    v.voxel_size_mm[i] = s > 0.0f ? s : 1.0;
  }
  const auto n = static_cast<std::size_t>(v.numel());
  const std::size_t width = hdr.datatype == kNiftiInt16 ? 2 : 4;
  const auto offset = static_cast<std::size_t>(hdr.vox_offset);
  if (bytes.size() < offset || bytes.size() - offset < n * width) {
    fail(NiftiErrorKind::truncated,
         "truncated payload: need " + std::to_string(n * width) +
             " bytes at offset " + std::to_string(offset) + ", file has " +
             std::to_string(bytes.size()));
  }
  const char* p = bytes.data() + offset;
  v.data.resize(n);
  const bool scaled = hdr.scl_slope != 0.0f && std::isfinite(hdr.scl_slope);
  for (std::size_t i = 0; i < n; ++i) {
    float x = width == 2
                  ? static_cast<float>(load_le<std::int16_t>(p + 2 * i))
                  : load_le<float>(p + 4 * i);
    if (scaled) x = x * hdr.scl_slope + hdr.scl_inter;
    v.data[i] = x;
  }
  v.source_header = raw;
  v.refresh_range();
  return v;
}

Volume read_nifti(const std::filesystem::path& path) {
  try {
    return decode_nifti(read_file_bytes(path));
  } catch (const NiftiError& e) {
    throw NiftiError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_nifti(const Volume& v, const std::filesystem::path& path) {
  std::string bytes = encode_nifti(v);
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  write_file_bytes(path, bytes);
}

bool is_gzip(std::string_view bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1F &&
         static_cast<unsigned char>(bytes[1]) == 0x8B;
}

std::string gzip_compress(std::string_view bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, kGzipWindowBits, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    fail(NiftiErrorKind::compression, "deflateInit2 failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32,
                  '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto written = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(NiftiErrorKind::compression, "deflate failed");
  out.resize(written);
  return out;
}

std::string gzip_decompress(std::string_view bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, kGzipWindowBits) != Z_OK) {
    fail(NiftiErrorKind::compression, "inflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  std::vector<char> chunk(1 << 16);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(chunk.data());
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      if (rc == Z_BUF_ERROR) {
        fail(NiftiErrorKind::truncated, "truncated gzip stream");
      }
      fail(NiftiErrorKind::compression, "corrupt gzip stream");
    }
    out.append(chunk.data(), chunk.size() - zs.avail_out);
  }
  inflateEnd(&zs);
  return out;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(NiftiErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(NiftiErrorKind::io, "cannot read " + path.string());
  return std::move(ss).str();
}

void write_file_bytes(const std::filesystem::path& path,
                      std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(NiftiErrorKind::io, "cannot create " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(NiftiErrorKind::io, "cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(NiftiErrorKind::io,
         "cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

}  // namespace voxgan
