#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

enum class SegLabel : std::int8_t { background = 0, pedestrian = 1, excluded = -1 };

/// Box-derived mask targets at the segmentation output resolution. The same
/// grid supervises every segmentation stream.
struct SegTargets {
  std::size_t grid_h = 0, grid_w = 0;
  std::vector<SegLabel> cells;  // row-major

  SegLabel at(std::size_t y, std::size_t x) const { return cells[y * grid_w + x]; }
  std::size_t count(SegLabel label) const {
    std::size_t n = 0;
    for (auto c : cells) n += c == label;
    return n;
  }
};

/// A cell is a pedestrian iff its center lies in a non-ignore box, excluded
/// iff its center lies only in ignore boxes. Boxes are half-open.
inline SegTargets rasterize_seg_targets(const MultispectralFrame& frame, std::size_t grid_h, std::size_t grid_w,
                                        std::size_t stride) {
  if (stride == 0 || grid_h * stride != frame.height() || grid_w * stride != frame.width()) {
    throw DimensionError("segmentation grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                         " at stride " + std::to_string(stride) + " does not tile the " +
                         std::to_string(frame.height()) + "x" + std::to_string(frame.width()) + " frame");
  }
  SegTargets t{grid_h, grid_w, std::vector<SegLabel>(grid_h * grid_w, SegLabel::background)};
  const double s = static_cast<double>(stride);
  for (std::size_t y = 0; y < grid_h; ++y) {
    for (std::size_t x = 0; x < grid_w; ++x) {
      const double cx = (static_cast<double>(x) + 0.5) * s, cy = (static_cast<double>(y) + 0.5) * s;
      bool positive = false, ignored = false;
      for (const auto& a : frame.annotations) {
        const bool inside = cx >= a.box.x && cx < a.box.right() && cy >= a.box.y && cy < a.box.bottom();
        if (!inside) continue;
        (a.ignore ? ignored : positive) = true;
      }
      if (positive) {
        t.cells[y * grid_w + x] = SegLabel::pedestrian;
      } else if (ignored) {
        t.cells[y * grid_w + x] = SegLabel::excluded;
      }
    }
  }
  return t;
}

}  // namespace iadn
