#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "iadn/numerics/error.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

/// Scalar objective over a list of tensors. Returns the value as a tensor
/// (must hold exactly one element) and, when `grads` is non-null, fills one
/// analytic gradient per point tensor.
template <typename T>
using ScalarFunction = std::function<Tensor<T>(const std::vector<Tensor<T>>& point, std::vector<Tensor<T>>* grads)>;

struct GradCheckOptions {
  /// Tensors larger than this are checked on a random subset of this many coordinates.
  std::size_t max_coords_per_tensor = 200;
  std::uint64_t seed = 0;
  /// When positive, coordinates whose one-sided differences (f(x+eps)-f(x))/eps and
  /// (f(x)-f(x-eps))/eps disagree by more than this relative amount are reported as
  /// non-smooth (a ReLU or max-pool switch inside [x-eps, x+eps]) and not scored.
  double nonsmooth_tolerance = 0.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_skipped = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps).
template <typename T>
GradCheckResult grad_check(const ScalarFunction<T>& f, std::vector<Tensor<T>> point, T eps,
                           const GradCheckOptions& options = {}) {
  if (!(eps > T(0))) throw UsageError("grad_check: eps must be positive");
  auto scalar = [&](std::vector<Tensor<T>>* grads) {
    const Tensor<T> value = f(point, grads);
    if (value.size() != 1) {
      throw UsageError("grad_check: function must return a scalar, got shape " + shape_string(value.shape()));
    }
    return value[0];
  };

  std::vector<Tensor<T>> analytic;
  const double base = static_cast<double>(scalar(&analytic));
  if (analytic.size() != point.size()) throw UsageError("grad_check: one gradient per point tensor required");

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t t = 0; t < point.size(); ++t) {
    point[t].require_same_shape(analytic[t], "grad_check gradient");
    std::vector<std::size_t> coords(point[t].size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const T saved = point[t][i];
      point[t][i] = saved + eps;
      const T plus = scalar(nullptr);
      point[t][i] = saved - eps;
      const T minus = scalar(nullptr);
      point[t][i] = saved;
      const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) / (2.0 * eps);
      if (options.nonsmooth_tolerance > 0) {
        const double right = (static_cast<double>(plus) - base) / eps;
        const double left = (base - static_cast<double>(minus)) / eps;
        if (relative_error(right, left) > options.nonsmooth_tolerance) {
          ++result.coordinates_skipped;
          continue;
        }
      }
      const double a = static_cast<double>(analytic[t][i]);
      const double err = relative_error(a, numeric);
      ++result.coordinates_checked;
      if (result.coordinates_checked == 1 || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = t;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace iadn
