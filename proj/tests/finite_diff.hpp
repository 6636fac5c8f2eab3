#pragma once

// Central finite-difference gradient oracle used by the unit and acceptance
// suites. Independent of the tape: it only re-evaluates a forward closure.

#include <functional>
#include <random>
#include <vector>

#include "dconad/tensor.hpp"

namespace dconad::testing {

inline constexpr double kFdStep = 1e-5;

// d(loss)/d(param) by central differences, one entry at a time. `forward`
// must recompute the loss from current parameter values.
inline Array finite_diff_grad(Tensor& param, const std::function<double()>& forward,
                              double h = kFdStep) {
  Array g = Array::Zero(param.size());
  for (Index i = 0; i < param.size(); ++i) {
    const double saved = param.array()[i];
    param.array()[i] = saved + h;
    const double up = forward();
    param.array()[i] = saved - h;
    const double down = forward();
    param.array()[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
inline double max_rel_err(const Array& analytic, const Array& numeric, double floor = 1e-6) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

inline Array random_array(Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Array a(n);
  for (Index i = 0; i < n; ++i) a[i] = dist(rng);
  return a;
}

}  // namespace dconad::testing
