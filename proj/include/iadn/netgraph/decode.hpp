#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iadn/evaluation/nms.hpp"
#include "iadn/netgraph/forward.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/training/anchors.hpp"
#include "iadn/training/box_coding.hpp"

namespace iadn {

/// Fused scores above `score_threshold` decoded against their anchors, then NMS.
template <typename T>
std::vector<Detection> decode_detections(const RawOutputs<T>& raw, const AnchorGrid& anchors, double score_threshold,
                                         double nms_iou) {
  const Shape cls_shape{anchors.templates, anchors.grid_h, anchors.grid_w};
  const Shape bbox_shape{4 * anchors.templates, anchors.grid_h, anchors.grid_w};
  if (raw.cls_fused.shape() != cls_shape || raw.bbox_fused.shape() != bbox_shape) {
    throw DimensionError("decode_detections: outputs " + shape_string(raw.cls_fused.shape()) + " / " +
                         shape_string(raw.bbox_fused.shape()) + " do not match anchor grid " +
                         shape_string(cls_shape));
  }
  std::vector<Detection> candidates;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double score = static_cast<double>(raw.cls_fused[anchors.score_offset(i)]);
    if (!(score > score_threshold)) continue;
    BoxDeltas d;
    for (std::size_t j = 0; j < 4; ++j) d[j] = static_cast<double>(raw.bbox_fused[anchors.delta_offset(i, j)]);
    candidates.push_back({decode_boxes(anchors.boxes[i], d), score});
  }
  return nms(candidates, nms_iou);
}

/// Anchor grid matching a network's output for an image size.
inline AnchorGrid anchors_for(const NetworkConfig& config, std::size_t image_h, std::size_t image_w) {
  return generate_anchors(image_h, image_w, config.stride(), config.anchor_set);
}

}  // namespace iadn
