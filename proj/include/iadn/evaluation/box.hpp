#pragma once

#include <algorithm>

namespace iadn {

/// Axis-aligned box in pixels, top-left origin.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double right() const noexcept { return x + w; }
  double bottom() const noexcept { return y + h; }
  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }
  double area() const noexcept { return w * h; }

  static Box from_center(double cx, double cy, double w, double h) noexcept {
    return {cx - 0.5 * w, cy - 0.5 * h, w, h};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_area(const Box& a, const Box& b) noexcept {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  return (iw > 0 && ih > 0) ? iw * ih : 0.0;
}

/// Intersection over union, in [0, 1].
inline double iou(const Box& a, const Box& b) noexcept {
  if (a == b) return a.area() > 0 ? 1.0 : 0.0;
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? std::min(1.0, inter / uni) : 0.0;
}

}  // namespace iadn
