#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "iadn/evaluation/matching.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

inline constexpr std::size_t kFppiPoints = 9;
inline constexpr double kMissRateFloor = 1e-4;

/// 10^(-2 + 0.25 k), k = 0..8.
inline std::array<double, kFppiPoints> reference_fppi() {
  std::array<double, kFppiPoints> out{};
  for (std::size_t k = 0; k < kFppiPoints; ++k) out[k] = std::pow(10.0, -2.0 + 0.25 * static_cast<double>(k));
  return out;
}

/// One score threshold of the sweep. The threshold admits detections with score >= threshold;
/// +inf is the empty operating point.
struct OperatingPoint {
  double threshold = std::numeric_limits<double>::infinity();
  std::size_t tp = 0, fp = 0, fn = 0;
  double fppi = 0.0;
  double miss_rate = 1.0;

  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

struct EvalCurve {
  std::array<double, kFppiPoints> fppi_points{};
  std::array<double, kFppiPoints> miss_rates{};
  std::array<OperatingPoint, kFppiPoints> at_points{};  // operating point sampled at each reference FPPI
  double log_avg_mr = 1.0;
  std::size_t frames = 0;
  std::size_t ground_truths = 0;

  friend bool operator==(const EvalCurve&, const EvalCurve&) = default;
};

/// exp(mean ln max(m, 1e-4)).
template <typename Range>
double log_average_miss_rate(const Range& miss_rates) {
  double s = 0.0;
  std::size_t n = 0;
  for (double m : miss_rates) {
    s += std::log(std::max(m, kMissRateFloor));
    ++n;
  }
  return n == 0 ? 1.0 : std::exp(s / static_cast<double>(n));
}

/// Every operating point of the threshold sweep, from the empty detector down to the lowest score.
inline std::vector<OperatingPoint> operating_points(const std::vector<FrameMatch>& frames) {
  std::size_t positives = 0;
  std::vector<std::pair<double, bool>> scored;  // (score, is_tp) for TP and FP outcomes
  for (const auto& f : frames) {
    positives += f.count(GtOutcome::matched) + f.count(GtOutcome::missed);
    for (std::size_t i = 0; i < f.det.size(); ++i) {
      if (f.det[i] != DetOutcome::ignored) scored.emplace_back(f.detections[i].score, f.det[i] == DetOutcome::tp);
    }
  }
  if (positives == 0) throw EvaluationError("no ground-truth pedestrians in the evaluated subset");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double n_frames = static_cast<double>(frames.size());
  const auto point = [&](double threshold, std::size_t tp, std::size_t fp) {
    return OperatingPoint{threshold, tp, fp, positives - tp, static_cast<double>(fp) / n_frames,
                          static_cast<double>(positives - tp) / static_cast<double>(positives)};
  };
  std::vector<OperatingPoint> out{point(std::numeric_limits<double>::infinity(), 0, 0)};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].second ? tp : fp) += 1;
    if (i + 1 == scored.size() || scored[i + 1].first != scored[i].first) out.push_back(point(scored[i].first, tp, fp));
  }
  return out;
}

/// Miss rate vs FPPI sampled at the nine reference points: each takes the operating point with
/// the largest FPPI not exceeding it (the lowest miss rate among ties).
inline EvalCurve mr_curve(const std::vector<FrameMatch>& frames) {
  if (frames.empty()) throw EvaluationError("mr_curve: no frames");
  const auto points = operating_points(frames);
  EvalCurve c;
  c.fppi_points = reference_fppi();
  c.frames = frames.size();
  c.ground_truths = points.front().fn;
  for (std::size_t k = 0; k < kFppiPoints; ++k) {
    const OperatingPoint* chosen = &points.front();
    for (const auto& p : points) {
      if (p.fppi <= c.fppi_points[k]) chosen = &p;  // FPPI and TP are non-decreasing along the sweep
    }
    c.at_points[k] = *chosen;
    c.miss_rates[k] = chosen->miss_rate;
  }
  c.log_avg_mr = log_average_miss_rate(c.miss_rates);
  return c;
}

}  // namespace iadn
