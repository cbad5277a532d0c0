#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "hdnet/tensor.hpp"

namespace hdnet {

struct GradCheckOptions {
  // Coordinates whose +/- kink_margin perturbations change any recorded
  // discrete decision (activation branch, neighbour selection) are skipped.
  // Zero disables the margin probe; crossings inside +/- eps are always skipped.
  double kink_margin = 1e-3;
  // False leaves activation branches out of the fingerprint so only
  // neighbour-selection changes count as kinks.
  bool activation_kinks = true;
  // When non-zero, only this many coordinates (chosen with `sample_seed`) are checked.
  std::size_t max_coordinates = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// Central-difference check of autograd gradients of scalar `f` with respect to
// `input`. `input` is perturbed in place and restored. Relative error per
// coordinate uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor input,
                           double eps, const GradCheckOptions& options = {});

}  // namespace hdnet
