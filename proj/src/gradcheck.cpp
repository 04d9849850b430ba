#include "skillmatch/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "skillmatch/random.hpp"

namespace skillmatch {

template <typename T>
GradCheckReport finite_diff_check(const std::function<Var<T>(Tape<T>&)>& loss_fn,
                                  std::span<Parameter<T>* const> params, double eps,
                                  std::uint64_t seed, std::size_t max_coords,
                                  double denom_floor) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be > 0");
  for (Parameter<T>* p : params) p->zero_grad();
  {
    Tape<T> tape;
    tape.backward(loss_fn(tape));
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i]->value.size(); ++k) coords.emplace_back(i, k);
  }
  Rng rng(seed);
  const std::size_t n = std::min(max_coords, coords.size());
  const auto picks = rng.sample_indices(coords.size(), n);

  auto evaluate = [&loss_fn]() {
    Tape<T> tape;
    return static_cast<double>(loss_fn(tape).value()(0, 0));
  };

  GradCheckReport report;
  report.coordinates = n;
  for (std::size_t pick : picks) {
    const auto [pi, k] = coords[pick];
    T& slot = params[pi]->value[k];
    const T saved = slot;
    slot = static_cast<T>(static_cast<double>(saved) + eps);
    const double up = evaluate();
    slot = static_cast<T>(static_cast<double>(saved) - eps);
    const double down = evaluate();
    slot = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double analytic = static_cast<double>(params[pi]->grad[k]);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), denom_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_error || report.coordinates == 0) {
      report.max_rel_error = rel;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

template GradCheckReport finite_diff_check<float>(const std::function<Var<float>(Tape<float>&)>&,
                                                  std::span<Parameter<float>* const>, double,
                                                  std::uint64_t, std::size_t, double);
template GradCheckReport finite_diff_check<double>(const std::function<Var<double>(Tape<double>&)>&,
                                                   std::span<Parameter<double>* const>, double,
                                                   std::uint64_t, std::size_t, double);

}  // namespace skillmatch
