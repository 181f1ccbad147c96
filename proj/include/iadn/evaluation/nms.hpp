#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "iadn/evaluation/box.hpp"

namespace iadn {

struct Detection {
  Box box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Stable descending-score order: equal scores keep their input order.
inline std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

/// Greedy non-maximum suppression; drops detections with IoU > threshold to a kept one.
inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_threshold) {
  std::vector<Detection> kept;
  for (std::size_t i : score_order(dets)) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                        [&](const Detection& k) { return iou(k.box, dets[i].box) > iou_threshold; });
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

}  // namespace iadn
