#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "test_util.hpp"
#include "voxgan/error.hpp"
#include "voxgan/nifti.hpp"
#include "voxgan/ops.hpp"
#include "voxgan/rng.hpp"
#include "voxgan/slices.hpp"
#include "voxgan/volume.hpp"

using namespace voxgan;

namespace {

template <typename T>
void poke(std::string& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));  // host is little-endian
}

// Hand-assembled single-file header: every byte not listed stays zero.
std::string golden_header(std::int16_t nx, std::int16_t ny, std::int16_t nz,
                          std::int16_t datatype, std::int16_t bitpix, float slope,
                          float inter) {
  std::string h(352, '\0');
  poke<std::int32_t>(h, 0, 348);
  h[38] = 'r';
  const std::int16_t dim[8] = {3, nx, ny, nz, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) poke(h, 40 + 2 * i, dim[i]);
  poke(h, 70, datatype);
  poke(h, 72, bitpix);
  const float pixdim[4] = {1.0f, 0.7f, 0.8f, 0.9f};
  for (int i = 0; i < 4; ++i) poke(h, 76 + 4 * i, pixdim[i]);
  poke(h, 108, 352.0f);
  poke(h, 112, slope);
  poke(h, 116, inter);
  h[123] = 2;
  std::memcpy(h.data() + 344, "n+1\0", 4);
  return h;
}

Volume random_volume(const Dims3& dims, std::uint64_t seed) {
  Volume v = Volume::zeros(dims);
  Rng rng(seed);
  for (auto& x : v.data) x = static_cast<float>(rng.normal(0.0, 100.0));
  v.voxel_size_mm = {0.7, 0.8, 0.9};
  v.refresh_range();
  return v;
}

NiftiErrorKind kind_of(const std::string& bytes) {
  try {
    decode_nifti(bytes);
  } catch (const NiftiError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return NiftiErrorKind::io;
}

}  // namespace

TEST(Nifti, GoldenFloatFileParses) {
  std::string bytes = golden_header(2, 2, 2, 16, 32, 0.0f, 0.0f);
  bytes.resize(352 + 32);
  for (int i = 0; i < 8; ++i) poke(bytes, 352 + 4 * i, 0.5f * static_cast<float>(i) - 1.0f);
  const Volume v = decode_nifti(bytes);
  EXPECT_EQ(v.dims, (Dims3{2, 2, 2}));
  // Storage order: x (W) fastest, then y (H), then z (D).
  EXPECT_FLOAT_EQ(v.at(0, 0, 1), -0.5f);
  EXPECT_FLOAT_EQ(v.at(0, 1, 0), 0.0f);
  EXPECT_FLOAT_EQ(v.at(1, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(v.at(1, 1, 1), 2.5f);
  EXPECT_FLOAT_EQ(static_cast<float>(v.voxel_size_mm[0]), 0.7f);
  EXPECT_FLOAT_EQ(static_cast<float>(v.voxel_size_mm[2]), 0.9f);
  EXPECT_FLOAT_EQ(v.intensity_range.min, -1.0f);
  EXPECT_FLOAT_EQ(v.intensity_range.max, 2.5f);
}

TEST(Nifti, AnisotropicAxisOrder) {
  std::string bytes = golden_header(4, 3, 2, 16, 32, 0.0f, 0.0f);
  bytes.resize(352 + 96);
  for (int i = 0; i < 24; ++i) poke(bytes, 352 + 4 * i, static_cast<float>(i));
  const Volume v = decode_nifti(bytes);
  EXPECT_EQ(v.dims, (Dims3{2, 3, 4}));
  EXPECT_FLOAT_EQ(v.at(1, 2, 3), 23.0f);
  EXPECT_FLOAT_EQ(v.at(1, 0, 0), 12.0f);
}

TEST(Nifti, Int16ScalingApplied) {
  std::string bytes = golden_header(1, 1, 2, 4, 16, 2.0f, 1.0f);
  bytes.resize(352 + 4);
  poke<std::int16_t>(bytes, 352, 3);
  poke<std::int16_t>(bytes, 354, -4);
  const Volume v = decode_nifti(bytes);
  EXPECT_FLOAT_EQ(v.data[0], 7.0f);
  EXPECT_FLOAT_EQ(v.data[1], -7.0f);
  // Zero slope leaves values raw.
  poke(bytes, 112, 0.0f);
  EXPECT_FLOAT_EQ(decode_nifti(bytes).data[0], 3.0f);
}

TEST(Nifti, WrittenHeaderMatchesGoldenBytes) {
  Volume v = Volume::zeros({2, 2, 2});
  v.voxel_size_mm = {0.7, 0.8, 0.9};
  const std::string bytes = encode_nifti(v);
  ASSERT_EQ(bytes.size(), 352u + 32u);
  const std::string want = golden_header(2, 2, 2, 16, 32, 0.0f, 0.0f);
  for (std::size_t i = 0; i < 352; ++i) {
    EXPECT_EQ(static_cast<int>(static_cast<unsigned char>(bytes[i])),
              static_cast<int>(static_cast<unsigned char>(want[i])))
        << "byte " << i;
  }
}

TEST(Nifti, SourceHeaderFieldsSurviveRewrite) {
  std::string bytes = golden_header(2, 2, 2, 16, 32, 0.0f, 0.0f);
  bytes.resize(352 + 32, '\0');
  poke<std::int16_t>(bytes, 252, 1);  // qform_code
  poke<float>(bytes, 280, 12.5f);     // srow_x[0]
  const std::string again = encode_nifti(decode_nifti(bytes));
  EXPECT_EQ(again, bytes);
}

TEST(Nifti, RoundTripIsBitExact) {
  ScratchDir dir("nifti");
  Volume v = random_volume({5, 7, 3}, 3);
  v.data[0] = -0.0f;
  v.data[1] = 1e-40f;  // subnormal
  v.data[2] = 3.4e38f;
  for (const char* name : {"a.nii", "b.nii.gz"}) {
    write_nifti(v, dir / name);
    const Volume back = read_nifti(dir / name);
    EXPECT_EQ(back.dims, v.dims);
    ASSERT_EQ(back.data.size(), v.data.size());
    EXPECT_EQ(std::memcmp(back.data.data(), v.data.data(), v.data.size() * 4), 0) << name;
    for (int i = 0; i < 3; ++i) {
      EXPECT_FLOAT_EQ(static_cast<float>(back.voxel_size_mm[i]),
                      static_cast<float>(v.voxel_size_mm[i]));
    }
  }
  EXPECT_TRUE(is_gzip(read_file_bytes(dir / "b.nii.gz")));
  EXPECT_FALSE(is_gzip(read_file_bytes(dir / "a.nii")));
}

TEST(Nifti, GzipIsDetectedByContentNotName) {
  ScratchDir dir("nifti_gz");
  const Volume v = random_volume({2, 2, 2}, 4);
  write_file_bytes(dir / "plain_name.nii", gzip_compress(encode_nifti(v)));
  EXPECT_EQ(read_nifti(dir / "plain_name.nii").data, v.data);
  EXPECT_EQ(gzip_decompress(gzip_compress("")), "");
}

TEST(Nifti, DistinctErrorKinds) {
  const std::string good = encode_nifti(random_volume({2, 2, 2}, 5));
  std::string bad = good;
  std::memcpy(bad.data() + 344, "xx1\0", 4);
  EXPECT_EQ(kind_of(bad), NiftiErrorKind::bad_magic);
  bad = good;
  poke<std::int16_t>(bad, 70, 2);
  poke<std::int16_t>(bad, 72, 8);
  EXPECT_EQ(kind_of(bad), NiftiErrorKind::unsupported_datatype);
  EXPECT_EQ(kind_of(good.substr(0, good.size() - 1)), NiftiErrorKind::truncated);
  EXPECT_EQ(kind_of(good.substr(0, 100)), NiftiErrorKind::truncated);
  bad = good;
  poke<std::int32_t>(bad, 0, 540);
  EXPECT_EQ(kind_of(bad), NiftiErrorKind::unsupported_format);
  bad = good;
  std::memcpy(bad.data() + 344, "ni1\0", 4);
  EXPECT_EQ(kind_of(bad), NiftiErrorKind::unsupported_format);
  bad = good;
  poke<std::int16_t>(bad, 40, 4);
  EXPECT_EQ(kind_of(bad), NiftiErrorKind::unsupported_dims);
  std::string gz = gzip_compress(good);
  gz.resize(gz.size() / 2);
  EXPECT_EQ(kind_of(gz), NiftiErrorKind::truncated);
  try {
    read_nifti("/nonexistent/voxgan/file.nii");
    FAIL();
  } catch (const NiftiError& e) {
    EXPECT_EQ(e.kind(), NiftiErrorKind::io);
  }
}

TEST(Volume, FromTensorAndValidate) {
  const Volume v = random_volume({2, 3, 4}, 6);
  const Tensor t = v.to_tensor();
  EXPECT_EQ(t.shape(), (Shape{1, 1, 2, 3, 4}));
  EXPECT_EQ(Volume::from_tensor(t).data, v.data);
  EXPECT_EQ(Volume::from_tensor(reshape(t, {2, 3, 4})).dims, v.dims);
  EXPECT_THROW(Volume::from_tensor(Tensor::zeros({2, 1, 2, 2, 2})), ShapeError);
  Volume bad = v;
  bad.data.pop_back();
  EXPECT_THROW(bad.validate(), ShapeError);
}

TEST(Preprocess, DownsampleMatchesBlockMeanOracle) {
  const Volume v = random_volume({4, 4, 4}, 7);
  const Volume d = downsample_by_2(v);
  EXPECT_EQ(d.dims, (Dims3{2, 2, 2}));
  double total = 0.0, coarse = 0.0;
  for (int z = 0; z < 2; ++z) {
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        double s = 0.0;
        for (int k = 0; k < 8; ++k) s += v.at(2 * z + (k >> 2), 2 * y + ((k >> 1) & 1), 2 * x + (k & 1));
        EXPECT_NEAR(d.at(z, y, x), s / 8.0, 1e-4);
        coarse += d.at(z, y, x);
      }
    }
  }
  for (float x : v.data) total += x;
  EXPECT_NEAR(coarse / 8.0, total / 64.0, 1e-4);
  EXPECT_DOUBLE_EQ(d.voxel_size_mm[0], 1.4);
}

TEST(Preprocess, Anisotropic260x311x260DownsamplesAndCrops) {
  Volume v = Volume::zeros({260, 311, 260});
  v.voxel_size_mm = {0.7, 0.7, 0.7};
  for (std::int64_t i = 0; i < v.numel(); ++i) {
    v.data[static_cast<std::size_t>(i)] = static_cast<float>(i % 97);
  }
  const Volume d = downsample_by_2(v);
  EXPECT_EQ(d.dims, (Dims3{130, 155, 130}));
  for (double s : d.voxel_size_mm) EXPECT_NEAR(s, 1.4, 1e-12);
  const Volume c = center_crop(d, {128, 128, 128});
  EXPECT_EQ(c.dims, (Dims3{128, 128, 128}));
  // low margins (1, 13, 1); the odd H margin puts its extra voxel high.
  for (auto [z, y, x] : {std::array<int, 3>{0, 0, 0}, {127, 127, 127}, {5, 60, 100}}) {
    EXPECT_EQ(c.at(z, y, x), d.at(z + 1, y + 13, x + 1));
  }
}

TEST(Preprocess, CropIsSubBlockAndRejectsOversize) {
  const Volume v = random_volume({5, 6, 7}, 8);
  EXPECT_EQ(center_crop(v, v.dims).data, v.data);
  const Volume c = center_crop(v, {2, 3, 4});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 4; ++x) EXPECT_EQ(c.at(z, y, x), v.at(z + 1, y + 1, x + 1));
  EXPECT_THROW(center_crop(v, {6, 6, 7}), ShapeError);
}

TEST(Preprocess, ConstantStaysConstant) {
  Volume v = Volume::zeros({4, 6, 2});
  std::fill(v.data.begin(), v.data.end(), 3.25f);
  for (float x : downsample_by_2(v).data) EXPECT_EQ(x, 3.25f);
}

TEST(Normalize, EndpointsMidpointAndInverse) {
  Volume v = random_volume({3, 4, 5}, 9);
  const Volume n = normalize_intensity(v);
  EXPECT_FLOAT_EQ(n.intensity_range.min, -1.0f);
  EXPECT_FLOAT_EQ(n.intensity_range.max, 1.0f);
  for (float x : n.data) {
    EXPECT_GE(x, -1.0f);
    EXPECT_LE(x, 1.0f);
  }
  const Volume back = invert_normalization(n);
  const float scale = v.intensity_range.max - v.intensity_range.min;
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    EXPECT_NEAR(back.data[i], v.data[i], 1e-5 * scale);
  }
  Volume mid = Volume::zeros({1, 1, 3});
  mid.data = {2.0f, 4.0f, 6.0f};
  EXPECT_FLOAT_EQ(normalize_intensity(mid).data[1], 0.0f);
  mid.data = {1.0f, 1.0f, 1.0f};
  EXPECT_THROW(normalize_intensity(mid), ValueError);
  EXPECT_THROW(invert_normalization(v), ValueError);
}

TEST(Upsample, NearestReplication) {
  Volume one = Volume::zeros({1, 1, 1});
  one.data = {0.5f};
  for (float x : upsample_to(one, {2, 2, 2}).data) EXPECT_EQ(x, 0.5f);
  const Volume v = random_volume({32, 32, 32}, 10);
  const Volume u = upsample_to(v, {128, 128, 128});
  EXPECT_EQ(u.at(127, 5, 66), v.at(31, 1, 16));
  EXPECT_NEAR(u.voxel_size_mm[0], v.voxel_size_mm[0] / 4, 1e-12);
  const Volume round_trip = downsample_by_2(downsample_by_2(u));
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    EXPECT_NEAR(round_trip.data[i], v.data[i], 1e-5 * (1 + std::abs(v.data[i])));
  }
  EXPECT_THROW(upsample_to(v, {48, 32, 32}), ShapeError);
  EXPECT_THROW(upsample_to(v, {16, 32, 32}), ShapeError);
}

TEST(Slices, ConstantVolumesMapToExtremes) {
  Volume v = Volume::zeros({3, 4, 5});
  std::fill(v.data.begin(), v.data.end(), -1.0f);
  for (auto px : axial_slice(v).pixels) EXPECT_EQ(px, 0);
  std::fill(v.data.begin(), v.data.end(), 1.0f);
  for (auto px : sagittal_slice(v).pixels) EXPECT_EQ(px, 255);
  EXPECT_EQ(to_gray(5.0f), 255);
  EXPECT_EQ(to_gray(std::nanf("")), 0);
}

TEST(Slices, RampGoldenPgm) {
  // W = 5 ramp from -1 to 1 along x; the central axial slice repeats it.
  Volume v = Volume::zeros({1, 2, 5});
  const float ramp[5] = {-1.0f, -0.5f, 0.0f, 0.5f, 1.0f};
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 5; ++x) v.data[static_cast<std::size_t>(y * 5 + x)] = ramp[x];
  // round((v + 1) * 127.5): 0, 63.75 -> 64, 127.5 -> 128, 191.25 -> 191, 255
  const unsigned char row[5] = {0, 64, 128, 191, 255};
  std::string want = "P5\n5 2\n255\n";
  for (int y = 0; y < 2; ++y) want.append(reinterpret_cast<const char*>(row), 5);
  EXPECT_EQ(encode_pgm(axial_slice(v)), want);
}

TEST(Slices, ExportWritesThreeOrientations) {
  ScratchDir dir("slices");
  const Volume v = normalize_intensity(random_volume({4, 6, 8}, 11));
  const auto paths = export_slices(v, dir / "vol");
  EXPECT_EQ(paths[0].filename(), "vol_axial.pgm");
  EXPECT_EQ(read_file_bytes(paths[1]).rfind("P5\n8 4\n255\n", 0), 0u);
  EXPECT_EQ(read_file_bytes(paths[2]).rfind("P5\n6 4\n255\n", 0), 0u);
  EXPECT_EQ(read_file_bytes(paths[0]).size(), std::string("P5\n8 6\n255\n").size() + 48);
}
