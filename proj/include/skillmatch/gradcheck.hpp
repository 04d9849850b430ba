#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "skillmatch/autograd.hpp"

namespace skillmatch {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of `loss_fn` against central finite
// differences on up to `max_coords` randomly sampled parameter coordinates.
// Relative error is |a - n| / max(|a|, |n|, denom_floor).
// `loss_fn` must be deterministic and build its graph on the tape it receives.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Var<T>(Tape<T>&)>& loss_fn,
                                  std::span<Parameter<T>* const> params, double eps,
                                  std::uint64_t seed, std::size_t max_coords = 200,
                                  double denom_floor = 1e-6);

}  // namespace skillmatch
