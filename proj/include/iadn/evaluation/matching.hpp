#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/evaluation/box.hpp"
#include "iadn/evaluation/nms.hpp"

namespace iadn {

/// Ground-truth filter and matching threshold. Annotations below the height threshold or
/// visibility bound are treated as ignore regions.
struct EvalSetting {
  double min_height = 55.0;
  double min_visibility = 0.5;
  double iou_threshold = 0.5;

  /// The 55 px / 512 px-height reasonable setting rescaled to an image height.
  static EvalSetting reasonable(std::size_t image_height) {
    return {55.0 * static_cast<double>(image_height) / 512.0, 0.5, 0.5};
  }

  bool counts(const Annotation& a) const {
    return !a.ignore && a.box.h >= min_height && a.visibility >= min_visibility;
  }
};

enum class DetOutcome { tp, fp, ignored };
enum class GtOutcome { matched, missed, ignored };

/// Outcomes of one frame, with detections in descending score order.
struct FrameMatch {
  std::vector<Detection> detections;
  std::vector<DetOutcome> det;
  std::vector<GtOutcome> gt;  // parallel to the frame's annotations

  std::size_t count(DetOutcome o) const {
    std::size_t n = 0;
    for (auto d : det) n += d == o;
    return n;
  }
  std::size_t count(GtOutcome o) const {
    std::size_t n = 0;
    for (auto g : gt) n += g == o;
    return n;
  }
};

/// Greedy matching in descending score. A detection takes the unmatched counted annotation of
/// highest IoU when that IoU reaches the threshold; failing that it is ignored if it overlaps an
/// ignore annotation by the threshold, and is a false positive otherwise.
inline FrameMatch match_frame(const std::vector<Detection>& dets, const std::vector<Annotation>& annotations,
                              const EvalSetting& setting) {
  FrameMatch out;
  std::vector<bool> counted(annotations.size()), taken(annotations.size(), false);
  for (std::size_t j = 0; j < annotations.size(); ++j) counted[j] = setting.counts(annotations[j]);
  for (std::size_t i : score_order(dets)) {
    const Box& box = dets[i].box;
    double best = -1.0, best_ignore = 0.0;
    std::size_t match = annotations.size();
    for (std::size_t j = 0; j < annotations.size(); ++j) {
      const double o = iou(box, annotations[j].box);
      if (!counted[j]) {
        best_ignore = std::max(best_ignore, o);
      } else if (!taken[j] && o > best) {
        best = o;
        match = j;
      }
    }
    DetOutcome outcome = DetOutcome::fp;
    if (match < annotations.size() && best >= setting.iou_threshold) {
      taken[match] = true;
      outcome = DetOutcome::tp;
    } else if (best_ignore >= setting.iou_threshold) {
      outcome = DetOutcome::ignored;
    }
    out.detections.push_back(dets[i]);
    out.det.push_back(outcome);
  }
  for (std::size_t j = 0; j < annotations.size(); ++j) {
    out.gt.push_back(!counted[j] ? GtOutcome::ignored : taken[j] ? GtOutcome::matched : GtOutcome::missed);
  }
  return out;
}

}  // namespace iadn
