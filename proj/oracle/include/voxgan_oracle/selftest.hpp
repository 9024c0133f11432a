#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace voxgan::oracle {

struct SuiteReport {
  std::string name;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  int grad_cases = 20;
  int conv_cases = 50;
  // Added to the padding the optimized kernel is called with; a nonzero
  // value simulates an off-by-one bug the conv oracle must catch.
  int conv_pad_fault = 0;
};

inline constexpr double kLayerGradTolerance = 1e-3;
inline constexpr double kNetworkGradTolerance = 1e-2;
inline constexpr double kConvOracleTolerance = 1e-5;
inline constexpr double kRotationOracleTolerance = 1e-5;

SuiteReport gradient_suite(const SelftestOptions& options);
// Max over cases of max|fast - oracle| / max(max|oracle|, tiny).
SuiteReport conv_oracle_suite(const SelftestOptions& options);
SuiteReport nifti_roundtrip_suite(const SelftestOptions& options);
SuiteReport rotation_oracle_suite(const SelftestOptions& options);

std::vector<SuiteReport> run_selftest(const SelftestOptions& options);
void print_report(std::ostream& out, const std::vector<SuiteReport>& reports);

}  // namespace voxgan::oracle
