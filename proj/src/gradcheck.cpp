#include "hdnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hdnet/error.hpp"

namespace hdnet {

namespace {

struct Probe {
  double value;
  std::uint64_t fingerprint;
};

Probe evaluate(const std::function<Tensor(const Tensor&)>& f, const Tensor& input,
               bool branches) {
  NoGradGuard no_grad;
  KinkTrace trace(branches);
  KinkTraceScope scope(trace);
  Tensor y = f(input);
  if (y.numel() != 1) {
    throw ContractError("grad_check: function output must be scalar, got " +
                        shape_string(y.shape()));
  }
  return {y.item(), trace.fingerprint()};
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor input,
                           double eps, const GradCheckOptions& options) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");

  const bool was_tracking = input.requires_grad();
  input.set_requires_grad(true);
  input.zero_grad();
  Tensor y = f(input);
  if (y.numel() != 1) {
    input.set_requires_grad(was_tracking);
    throw ContractError("grad_check: function output must be scalar, got " +
                        shape_string(y.shape()));
  }
  backward(y);
  const std::vector<double> analytic = input.grad();
  input.clear_grad();
  input.set_requires_grad(was_tracking);

  std::vector<std::size_t> coords(input.numel());
  std::iota(coords.begin(), coords.end(), 0);
  if (options.max_coordinates > 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.sample_seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckResult result;
  auto data = input.data();
  for (std::size_t i : coords) {
    const double original = data[i];
    if (options.kink_margin > 0.0) {
      data[i] = original + options.kink_margin;
      const auto hi = evaluate(f, input, options.activation_kinks).fingerprint;
      data[i] = original - options.kink_margin;
      const auto lo = evaluate(f, input, options.activation_kinks).fingerprint;
      data[i] = original;
      if (hi != lo) {
        ++result.skipped;
        continue;
      }
    }
    data[i] = original + eps;
    const Probe plus = evaluate(f, input, options.activation_kinks);
    data[i] = original - eps;
    const Probe minus = evaluate(f, input, options.activation_kinks);
    data[i] = original;
    if (plus.fingerprint != minus.fingerprint) {
      ++result.skipped;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(analytic[i] - numeric) / denom);
    ++result.checked;
  }
  return result;
}

}  // namespace hdnet
