#pragma once

#include <array>
#include <cmath>

#include "iadn/evaluation/box.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

/// Regression target (tx, ty, tw, th) of a ground truth relative to an anchor.
using BoxDeltas = std::array<double, 4>;

/// tw/th are clamped before exponentiation when decoding (exp(4.135) ~ 62.5x).
inline constexpr double kMaxLogScale = 4.135166556742356;

inline BoxDeltas encode_boxes(const Box& anchor, const Box& gt) {
  if (!(anchor.w > 0) || !(anchor.h > 0) || !(gt.w > 0) || !(gt.h > 0)) {
    throw DataError("encode_boxes: boxes must have positive extents");
  }
  return {(gt.cx() - anchor.cx()) / anchor.w, (gt.cy() - anchor.cy()) / anchor.h, std::log(gt.w / anchor.w),
          std::log(gt.h / anchor.h)};
}

inline Box decode_boxes(const Box& anchor, const BoxDeltas& d) {
  const double cx = anchor.cx() + d[0] * anchor.w;
  const double cy = anchor.cy() + d[1] * anchor.h;
  const double w = anchor.w * std::exp(std::min(d[2], kMaxLogScale));
  const double h = anchor.h * std::exp(std::min(d[3], kMaxLogScale));
  return Box::from_center(cx, cy, w, h);
}

}  // namespace iadn
