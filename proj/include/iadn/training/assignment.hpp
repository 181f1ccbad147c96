#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/training/anchors.hpp"
#include "iadn/training/box_coding.hpp"

namespace iadn {

enum class AnchorLabel : std::int8_t { negative = 0, positive = 1, excluded = -1 };

inline constexpr double kPositiveIoU = 0.5;

struct AnchorAssignment {
  std::vector<AnchorLabel> labels;
  std::vector<std::size_t> matched;  // annotation index for positives
  std::vector<BoxDeltas> targets;    // regression targets for positives, zero otherwise

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(AnchorLabel label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
  }
};

/// Positive iff IoU > 0.5 with some non-ignore box (matched to the best one); excluded iff not
/// positive and IoU > 0.5 with some ignore box; negative otherwise.
inline AnchorAssignment assign_anchor_labels(const AnchorGrid& grid, const std::vector<Annotation>& annotations) {
  for (std::size_t j = 0; j < annotations.size(); ++j) {
    const auto& b = annotations[j].box;
    if (!(b.w > 0) || !(b.h > 0)) {
      throw DataError("annotation " + std::to_string(j) + " has a degenerate box (w=" + std::to_string(b.w) +
                      ", h=" + std::to_string(b.h) + ")");
    }
  }
  AnchorAssignment out{std::vector<AnchorLabel>(grid.size(), AnchorLabel::negative),
                       std::vector<std::size_t>(grid.size(), 0), std::vector<BoxDeltas>(grid.size(), BoxDeltas{})};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double best = 0.0, best_ignore = 0.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      const double v = iou(grid.boxes[i], annotations[j].box);
      if (annotations[j].ignore) {
        best_ignore = std::max(best_ignore, v);
      } else if (v > best) {
        best = v;
        best_j = j;
      }
    }
    if (best > kPositiveIoU) {
      out.labels[i] = AnchorLabel::positive;
      out.matched[i] = best_j;
      out.targets[i] = encode_boxes(grid.boxes[i], annotations[best_j].box);
    } else if (best_ignore > kPositiveIoU) {
      out.labels[i] = AnchorLabel::excluded;
    }
  }
  return out;
}

struct Sample {
  std::size_t anchor = 0;
  bool positive = false;
  BoxDeltas target{};
};

using SampleSet = std::vector<Sample>;

/// Draws up to n non-excluded anchors without replacement: at most n/2 positives, negatives
/// for the rest, and extra positives only when negatives run out. Result is sorted by anchor.
inline SampleSet sample_minibatch(const AnchorAssignment& assignment, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw UsageError("sample_minibatch: n must be >= 1");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment.labels[i] == AnchorLabel::positive) pos.push_back(i);
    if (assignment.labels[i] == AnchorLabel::negative) neg.push_back(i);
  }
  if (pos.empty() && neg.empty()) throw DataError("sample_minibatch: every anchor is excluded");
  const std::size_t n_neg = std::min(neg.size(), n - std::min(pos.size(), n / 2));
  const std::size_t n_pos = std::min(pos.size(), n - n_neg);

  // Partial Fisher-Yates: the first k entries become a uniform k-subset.
  const auto draw = [&rng](std::vector<std::size_t>& v, std::size_t k) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
      std::swap(v[i], v[pick(rng)]);
    }
    v.resize(k);
  };
  draw(pos, n_pos);
  draw(neg, n_neg);

  SampleSet s;
  s.reserve(n_pos + n_neg);
  for (std::size_t i : pos) s.push_back({i, true, assignment.targets[i]});
  for (std::size_t i : neg) s.push_back({i, false, {}});
  std::sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.anchor < b.anchor; });
  return s;
}

}  // namespace iadn
