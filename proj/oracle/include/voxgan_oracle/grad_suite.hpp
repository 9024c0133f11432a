#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace voxgan::oracle {

struct GradSuiteResult {
  std::string name;
  int cases = 0;
  double max_rel_error = 0.0;
  std::int64_t checked = 0;
  std::int64_t skipped = 0;
};

// Random-shape grad_check cases per layer; every loss is sum(y * r) with a
// fixed random r so no output direction is privileged.
std::vector<GradSuiteResult> layer_grad_suite(int cases, std::uint64_t seed);

// Stage-0 generator (w.r.t. latents and a weight) and discriminator (w.r.t.
// input and a weight), replayed through the float64 reference networks.
std::vector<GradSuiteResult> network_grad_suite(int cases, std::uint64_t seed);

// Gradient penalty w.r.t. discriminator weights; exercises double backward.
GradSuiteResult gradient_penalty_grad_suite(int cases, std::uint64_t seed);

}  // namespace voxgan::oracle
