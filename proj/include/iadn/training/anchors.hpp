#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "iadn/evaluation/box.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

/// Anchor shape: height in pixels and width/height ratio.
struct AnchorTemplate {
  double height = 32;
  double ratio = 0.41;

  friend bool operator==(const AnchorTemplate&, const AnchorTemplate&) = default;
};

/// Anchors tiled over the feature grid. Anchor (y, x, a) lives at index
/// (y * grid_w + x) * templates + a and reads score channel a of a
/// [A, grid_h, grid_w] output.
struct AnchorGrid {
  std::size_t image_h = 0, image_w = 0, stride = 0;
  std::size_t grid_h = 0, grid_w = 0, templates = 0;
  std::vector<Box> boxes;

  std::size_t size() const noexcept { return boxes.size(); }
  std::size_t cell_index(std::size_t anchor) const noexcept { return anchor / templates; }
  std::size_t template_index(std::size_t anchor) const noexcept { return anchor % templates; }

  /// Offset of this anchor's score in a channels-first [A, H, W] tensor.
  std::size_t score_offset(std::size_t anchor) const noexcept {
    return template_index(anchor) * grid_h * grid_w + cell_index(anchor);
  }
  /// Offset of delta j (0..3) in a channels-first [4A, H, W] tensor.
  std::size_t delta_offset(std::size_t anchor, std::size_t j) const noexcept {
    return (template_index(anchor) * 4 + j) * grid_h * grid_w + cell_index(anchor);
  }
};

inline AnchorGrid generate_anchors(std::size_t image_h, std::size_t image_w, std::size_t stride,
                                   const std::vector<AnchorTemplate>& templates) {
  if (stride == 0 || image_h % stride != 0 || image_w % stride != 0) {
    throw DimensionError("stride " + std::to_string(stride) + " does not divide image " + std::to_string(image_h) +
                         "x" + std::to_string(image_w));
  }
  if (templates.empty()) throw ConfigError("anchor set must not be empty");
  for (const auto& t : templates) {
    if (!(t.height > 0) || !(t.ratio > 0)) throw ConfigError("anchor templates need positive height and ratio");
  }
  AnchorGrid g{image_h, image_w, stride, image_h / stride, image_w / stride, templates.size(), {}};
  g.boxes.reserve(g.grid_h * g.grid_w * g.templates);
  const double s = static_cast<double>(stride);
  for (std::size_t y = 0; y < g.grid_h; ++y) {
    for (std::size_t x = 0; x < g.grid_w; ++x) {
      const double cx = (static_cast<double>(x) + 0.5) * s, cy = (static_cast<double>(y) + 0.5) * s;
      for (const auto& t : templates) g.boxes.push_back(Box::from_center(cx, cy, t.ratio * t.height, t.height));
    }
  }
  return g;
}

}  // namespace iadn
