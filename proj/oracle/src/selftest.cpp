#include "voxgan_oracle/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "voxgan/augment.hpp"
#include "voxgan/kernels.hpp"
#include "voxgan/nifti.hpp"
#include "voxgan/rng.hpp"
#include "voxgan_oracle/grad_suite.hpp"
#include "voxgan_oracle/reference.hpp"

namespace voxgan::oracle {
namespace {

std::string format_error(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", e);
  return buf;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

SuiteReport gradient_suite(const SelftestOptions& options) {
  SuiteReport rep;
  rep.name = "gradients";
  rep.tolerance = kLayerGradTolerance;
  bool ok = true;
  double worst = 0.0;
  std::string detail;
  for (const auto& r : layer_grad_suite(options.grad_cases, options.seed)) {
    ok = ok && r.max_rel_error < kLayerGradTolerance && r.checked > 0;
    worst = std::max(worst, r.max_rel_error);
    detail += r.name + "=" + format_error(r.max_rel_error) + " ";
  }
  auto nets = network_grad_suite(options.grad_cases, options.seed);
  nets.push_back(gradient_penalty_grad_suite(options.grad_cases, options.seed));
  for (const auto& r : nets) {
    ok = ok && r.max_rel_error < kNetworkGradTolerance && r.checked > 0;
    detail += r.name + "=" + format_error(r.max_rel_error) + " ";
  }
  rep.passed = ok;
  rep.max_error = worst;
  rep.detail = detail;
  return rep;
}

SuiteReport conv_oracle_suite(const SelftestOptions& options) {
  SuiteReport rep;
  rep.name = "conv_oracle";
  rep.tolerance = kConvOracleTolerance;
  Rng rng(mix_seed(options.seed ^ 0xC0));
  double worst = 0.0;
  for (int i = 0; i < options.conv_cases; ++i) {
    kernels::ConvGeometry g;
    g.batch = 1 + static_cast<std::int64_t>(rng.below(2));
    g.in_channels = 1 + static_cast<std::int64_t>(rng.below(6));
    g.out_channels = 1 + static_cast<std::int64_t>(rng.below(9));
    // Every fifth case is a single voxel.
    const bool single = i % 5 == 0;
    g.depth = single ? 1 : 1 + static_cast<std::int64_t>(rng.below(6));
    g.height = single ? 1 : 1 + static_cast<std::int64_t>(rng.below(6));
    g.width = single ? 1 : 1 + static_cast<std::int64_t>(rng.below(7));
    g.kernel = i % 2 == 0 ? 1 : 3;
    const int pad = (g.kernel - 1) / 2;
    g.pad = pad + options.conv_pad_fault;

    const Shape xs{g.batch, g.in_channels, g.depth, g.height, g.width};
    const Shape ws{g.out_channels, g.in_channels, g.kernel, g.kernel, g.kernel};
    Array x = Array::zeros(xs), w = Array::zeros(ws);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    for (auto& v : w.data) v = static_cast<float>(rng.normal());
    const Array ref = conv3d(x, w, pad);

    const std::vector<float> xf(x.data.begin(), x.data.end());
    const std::vector<float> wf(w.data.begin(), w.data.end());
    std::vector<float> out(ref.data.size());
    kernels::conv3d_forward(xf, wf, out, g);
    double max_abs = 0.0, max_ref = 1e-30;
    for (std::size_t j = 0; j < out.size(); ++j) {
      max_abs = std::max(max_abs, std::abs(out[j] - ref.data[j]));
      max_ref = std::max(max_ref, std::abs(ref.data[j]));
    }
    worst = std::max(worst, max_abs / max_ref);
  }
  rep.max_error = worst;
  rep.passed = worst <= kConvOracleTolerance;
  rep.detail = std::to_string(options.conv_cases) + " cases";
  return rep;
}

SuiteReport nifti_roundtrip_suite(const SelftestOptions& options) {
  SuiteReport rep;
  rep.name = "nifti_roundtrip";
  Rng rng(mix_seed(options.seed ^ 0x1F));
  Volume v = Volume::zeros({5, 6, 7});
  v.voxel_size_mm = {0.7, 0.8, 0.9};
  for (auto& x : v.data) x = static_cast<float>(rng.normal() * 100.0);
  v.data[3] = -0.0f;
  v.data[4] = 1e-40f;  // subnormal
  v.refresh_range();
  bool ok = true;
  for (bool gz : {false, true}) {
    std::string bytes = encode_nifti(v);
    if (gz) bytes = gzip_compress(bytes);
    const Volume back = decode_nifti(bytes);
    ok = ok && back.dims == v.dims && same_bits(back.data, v.data);
    for (int i = 0; i < 3; ++i) {
      ok = ok && static_cast<float>(back.voxel_size_mm[i]) ==
                     static_cast<float>(v.voxel_size_mm[i]);
    }
  }
  rep.passed = ok;
  rep.max_error = ok ? 0.0 : 1.0;
  rep.detail = "plain and gzip, bit comparison";
  return rep;
}

SuiteReport rotation_oracle_suite(const SelftestOptions& options) {
  SuiteReport rep;
  rep.name = "rotation_oracle";
  rep.tolerance = kRotationOracleTolerance;
  Rng rng(mix_seed(options.seed ^ 0x90));
  const std::int64_t n = 7;
  Volume v = Volume::zeros({n, n, n});
  for (auto& x : v.data) x = static_cast<float>(rng.normal());
  // +90 degrees about z: the output at (x, y) samples the source at
  // R^T (p - c) + c = (y, n - 1 - x).
  const Volume rot = resample_trilinear(v, Rotation{0.0, 0.0, 90.0});
  double worst = 0.0;
  for (std::int64_t d = 0; d < n; ++d)
    for (std::int64_t h = 0; h < n; ++h)
      for (std::int64_t w = 0; w < n; ++w) {
        const double expect = v.at(d, n - 1 - w, h);
        worst = std::max(worst, std::abs(rot.at(d, h, w) - expect));
      }
  const Volume same = resample_trilinear(v, Rotation{});
  const bool exact = same_bits(same.data, v.data);
  rep.max_error = worst;
  rep.passed = worst <= kRotationOracleTolerance && exact;
  rep.detail = exact ? "identity exact" : "identity NOT exact";
  return rep;
}

std::vector<SuiteReport> run_selftest(const SelftestOptions& options) {
  return {gradient_suite(options), conv_oracle_suite(options),
          nifti_roundtrip_suite(options), rotation_oracle_suite(options)};
}

void print_report(std::ostream& out, const std::vector<SuiteReport>& reports) {
  for (const auto& r : reports) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name
        << " max_error=" << format_error(r.max_error);
    if (r.tolerance > 0.0) out << " tol=" << format_error(r.tolerance);
    if (!r.detail.empty()) out << " (" << r.detail << ")";
    out << '\n';
  }
}

}  // namespace voxgan::oracle
