#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "voxgan/tensor.hpp"

namespace voxgan {

// Double-precision re-evaluation of the function under test. `branches`
// records the side taken at every non-smooth point (e.g. each leaky-ReLU
// input sign); a difference between the centre and a perturbed evaluation
// means the finite-difference stencil straddled a kink.
struct ReplayResult {
  double value = 0.0;
  std::vector<std::uint8_t> branches;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;
using ReplayFn = std::function<ReplayResult(std::span<const double>)>;

struct GradCheckOptions {
  // Check at most this many elements, evenly spaced; <= 0 checks all.
  std::int64_t max_elements = 0;
  // Step halvings tried when the stencil straddles a kink.
  int kink_retries = 4;
  // Denominator floor as a fraction of the largest numeric gradient
  // magnitude; keeps float32 rounding on near-zero entries from dominating.
  double scale_floor = 1e-3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t checked = 0;
  // Elements whose stencil crossed a kink at every tried step.
  std::int64_t skipped = 0;
};

// Compares the tape gradient of `f` (float32) at `input` against central
// differences of `replay` (float64) with the given step. The per-element
// error is |analytic - numeric| / max(|analytic|, |numeric|, floor) with
// floor = scale_floor * max|numeric| (at least 1e-8); the result holds the
// maximum. Throws NumericError on non-finite values.
GradCheckResult grad_check(const ScalarFn& f, const ReplayFn& replay,
                           const Tensor& input, double step,
                           const GradCheckOptions& options = {});

}  // namespace voxgan
