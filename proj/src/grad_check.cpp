#include "voxgan/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "voxgan/error.hpp"
#include "voxgan/tape.hpp"

namespace voxgan {

GradCheckResult grad_check(const ScalarFn& f, const ReplayFn& replay,
                           const Tensor& input, double step,
                           const GradCheckOptions& options) {
  if (!(step > 0.0)) throw ValueError("grad_check: step must be positive");

  Tensor analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor x = input.clone();
    x.set_requires_grad(true);
    Tensor y = f(x);
    if (y.numel() != 1) {
      throw ShapeError("grad_check: function must be scalar-valued, got " +
                       to_string(y.shape()));
    }
    if (!std::isfinite(y.item())) {
      throw NumericError("grad_check: non-finite function value");
    }
    const Tensor xs[] = {x};
    analytic = gradients(y, xs, tape)[0];
  }
  const std::vector<float> grad = analytic.to_vector();
  const std::vector<float> values = input.to_vector();
  std::vector<double> point(values.begin(), values.end());

  const ReplayResult centre = replay(point);
  if (!std::isfinite(centre.value)) {
    throw NumericError("grad_check: non-finite replay value");
  }

  const auto n = static_cast<std::int64_t>(point.size());
  std::int64_t stride = 1;
  if (options.max_elements > 0 && n > options.max_elements) {
    stride = (n + options.max_elements - 1) / options.max_elements;
  }

  struct Pair {
    std::int64_t index;
    double analytic;
    double numeric;
  };
  std::vector<Pair> pairs;
  GradCheckResult result;
  for (std::int64_t i = 0; i < n; i += stride) {
    const auto idx = static_cast<std::size_t>(i);
    const double a = grad[idx];
    if (!std::isfinite(a)) {
      throw NumericError("grad_check: non-finite analytic gradient at " +
                         std::to_string(i));
    }
    double h = step;
    bool smooth = false;
    double numeric = 0.0;
    for (int attempt = 0; attempt <= options.kink_retries; ++attempt) {
      const double saved = point[idx];
      point[idx] = saved + h;
      const ReplayResult plus = replay(point);
      point[idx] = saved - h;
      const ReplayResult minus = replay(point);
      point[idx] = saved;
      if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
        throw NumericError("grad_check: non-finite replay value at " +
                           std::to_string(i));
      }
      if (plus.branches == centre.branches &&
          minus.branches == centre.branches) {
        numeric = (plus.value - minus.value) / (2.0 * h);
        smooth = true;
        break;
      }
      h *= 0.5;
    }
    if (!smooth) {
      ++result.skipped;
      continue;
    }
    pairs.push_back({i, a, numeric});
  }
  double scale = 0.0;
  for (const auto& p : pairs) scale = std::max(scale, std::abs(p.numeric));
  const double floor = std::max(options.scale_floor * scale, 1e-8);
  for (const auto& p : pairs) {
    const double denom =
        std::max({std::abs(p.analytic), std::abs(p.numeric), floor});
    const double err = std::abs(p.analytic - p.numeric) / denom;
    ++result.checked;
    if (err > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      result.worst_index = p.index;
      result.worst_analytic = p.analytic;
      result.worst_numeric = p.numeric;
    }
  }
  return result;
}

}  // namespace voxgan
