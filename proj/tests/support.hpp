#pragma once

// Test-only helpers. The finite-difference oracle here is deliberately
// independent of iadn::grad_check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "iadn/numerics/tensor.hpp"

namespace iadn::test {

inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

/// Central differences of a scalar function of one tensor, every coordinate.
inline Tensor<double> central_difference(const std::function<double(const Tensor<double>&)>& f, Tensor<double> x,
                                         double eps = 1e-5) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double plus = f(x);
    x[i] = saved - eps;
    const double minus = f(x);
    x[i] = saved;
    g[i] = (plus - minus) / (2 * eps);
  }
  return g;
}

inline double max_relative_error(const Tensor<double>& analytic, const Tensor<double>& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

}  // namespace iadn::test
