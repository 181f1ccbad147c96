#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "iadn/dataio/frame.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

struct SyntheticParams {
  std::size_t n_frames = 200;
  std::size_t width = 160;
  std::size_t height = 128;
  int min_pedestrians = 1;
  int max_pedestrians = 4;
  double day_fraction = 0.65;
  /// Probability that an otherwise valid pedestrian is flagged ignore (crowd / ambiguous).
  double ignore_rate = 0.05;
  double min_height = 20;
  double max_height = 60;
  /// Pedestrians smaller than this are flagged ignore.
  double ignore_below_height = 24;
  double aspect_ratio = 0.41;
  std::size_t stride = 8;

  void validate() const {
    if (n_frames < 2) throw ConfigError("synthetic dataset needs at least 2 frames");
    if (width == 0 || height == 0 || width % stride != 0 || height % stride != 0) {
      throw ConfigError("image size " + std::to_string(width) + "x" + std::to_string(height) +
                        " must be divisible by stride " + std::to_string(stride));
    }
    if (min_pedestrians < 0 || max_pedestrians < min_pedestrians) {
      throw ConfigError("pedestrian count range must satisfy 0 <= min <= max");
    }
    if (day_fraction < 0 || day_fraction > 1) throw ConfigError("day fraction must lie in [0, 1]");
    if (ignore_rate < 0 || ignore_rate > 1) throw ConfigError("ignore rate must lie in [0, 1]");
    if (!(min_height > 0) || max_height < min_height) throw ConfigError("pedestrian height range invalid");
    if (!(aspect_ratio > 0)) throw ConfigError("aspect ratio must be positive");
  }
};

namespace detail {

/// Float canvas that is quantized to 8 bits at the end.
class Canvas {
 public:
  Canvas(std::size_t h, std::size_t w, std::size_t c) : h_(h), w_(w), c_(c), v_(h * w * c, 0.0f) {}

  float& at(std::size_t y, std::size_t x, std::size_t c) { return v_[(y * w_ + x) * c_ + c]; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t channels() const { return c_; }

  void fill(const std::array<float, 3>& color) {
    for (std::size_t i = 0; i < h_ * w_; ++i) {
      for (std::size_t c = 0; c < c_; ++c) v_[i * c_ + c] = color[c];
    }
  }

  /// Smooth large-scale texture from a few random plane waves.
  void add_texture(std::mt19937_64& rng, float amplitude) {
    std::uniform_real_distribution<float> freq(0.02f, 0.15f), phase(0.0f, 6.2831853f), dir(-1.0f, 1.0f);
    for (int k = 0; k < 4; ++k) {
      const float fx = freq(rng) * dir(rng), fy = freq(rng) * dir(rng), ph = phase(rng);
      for (std::size_t y = 0; y < h_; ++y) {
        for (std::size_t x = 0; x < w_; ++x) {
          const float s = amplitude * 0.25f * std::sin(fx * static_cast<float>(x) + fy * static_cast<float>(y) + ph);
          for (std::size_t c = 0; c < c_; ++c) at(y, x, c) += s;
        }
      }
    }
  }

  void add_noise(std::mt19937_64& rng, float sigma) {
    std::normal_distribution<float> noise(0.0f, sigma);
    for (float& v : v_) v += noise(rng);
  }

  /// Blend `color` into the region covered by `mask(x, y)` (returns coverage in [0,1]).
  template <typename Mask>
  void paint(const Box& bounds, const std::array<float, 3>& color, float opacity, Mask mask) {
    const auto y0 = static_cast<long>(std::floor(std::max(0.0, bounds.y)));
    const auto y1 = static_cast<long>(std::ceil(std::min<double>(static_cast<double>(h_), bounds.bottom())));
    const auto x0 = static_cast<long>(std::floor(std::max(0.0, bounds.x)));
    const auto x1 = static_cast<long>(std::ceil(std::min<double>(static_cast<double>(w_), bounds.right())));
    for (long y = y0; y < y1; ++y) {
      for (long x = x0; x < x1; ++x) {
        const float cover = opacity * mask(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
        if (cover <= 0) continue;
        for (std::size_t c = 0; c < c_; ++c) {
          float& px = at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
          px = px * (1.0f - cover) + color[c] * cover;
        }
      }
    }
  }

  Image quantize() const {
    Image img(h_, w_, c_);
    for (std::size_t i = 0; i < v_.size(); ++i) {
      const float v = std::clamp(v_[i], 0.0f, 1.0f);
      img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return img;
  }

 private:
  std::size_t h_, w_, c_;
  std::vector<float> v_;
};

// Upright silhouette: narrow head on top of a body; (px, py) in pixels.
inline float silhouette(const Box& b, double px, double py) {
  const double u = (px - b.x) / b.w, v = (py - b.y) / b.h;
  if (u < 0 || u > 1 || v < 0 || v > 1) return 0.0f;
  if (v < 0.18) {
    const double du = (u - 0.5) / 0.28, dv = (v - 0.09) / 0.09;
    return du * du + dv * dv <= 1.0 ? 1.0f : 0.0f;
  }
  if (v > 0.55) return (u > 0.08 && u < 0.46) || (u > 0.54 && u < 0.92) ? 1.0f : 0.0f;  // legs
  return u > 0.05 && u < 0.95 ? 1.0f : 0.0f;
}

inline float ellipse(const Box& b, double px, double py) {
  const double du = (px - b.cx()) / (0.5 * b.w), dv = (py - b.cy()) / (0.5 * b.h);
  return du * du + dv * dv <= 1.0 ? 1.0f : 0.0f;
}

inline float rect(const Box& b, double px, double py) {
  return px >= b.x && px < b.right() && py >= b.y && py < b.bottom() ? 1.0f : 0.0f;
}

}  // namespace detail

/// Renders one frame. Day: bright textured visible scene with dark
/// pedestrians, thermal pedestrians barely warmer than background and
/// pedestrian-shaped warm clutter. Night: dark noisy visible scene with
/// street lights and almost invisible pedestrians, thermal pedestrians hot.
inline MultispectralFrame generate_frame(const SyntheticParams& p, std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x1adau};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  MultispectralFrame frame;
  char id[32];
  std::snprintf(id, sizeof id, "f%06zu", index);
  frame.id = id;
  frame.illumination = unit(rng) < p.day_fraction ? Illumination::day : Illumination::night;
  const bool day = frame.illumination == Illumination::day;
  const double W = static_cast<double>(p.width), H = static_cast<double>(p.height);
  const Box image{0, 0, W, H};

  // Pedestrian layout.
  std::vector<Box> people;
  const int count = static_cast<int>(std::floor(uniform(p.min_pedestrians, p.max_pedestrians + 1 - 1e-9)));
  for (int k = 0, tries = 0; k < count && tries < 200; ++tries) {
    const double h = uniform(p.min_height, p.max_height);
    const double w = h * p.aspect_ratio * uniform(0.95, 1.05);
    const Box b{uniform(-0.6 * w, W - 0.4 * w), uniform(-0.3 * h, H - 0.7 * h), w, h};
    bool crowded = false;
    for (const auto& other : people) crowded |= iou(b, other) > 0.2;
    if (crowded) continue;
    people.push_back(b);
    ++k;
  }

  detail::Canvas vis(p.height, p.width, 3), th(p.height, p.width, 1);
  if (day) {
    const float base = static_cast<float>(uniform(0.55, 0.75));
    vis.fill({base + static_cast<float>(uniform(-0.05, 0.05)), base, base + static_cast<float>(uniform(-0.05, 0.05))});
    vis.add_texture(rng, 0.12f);
    th.fill({static_cast<float>(uniform(0.40, 0.50)), 0, 0});
    th.add_texture(rng, 0.06f);
    // Scene clutter: wide blocks and thin poles in visible, warm shapes in thermal.
    const int blocks = static_cast<int>(uniform(3, 7));
    for (int k = 0; k < blocks; ++k) {
      const double bh = uniform(8, 40), bw = unit(rng) < 0.5 ? uniform(1.5, 4) * bh : uniform(0.08, 0.15) * bh;
      const Box b{uniform(-bw / 2, W - bw / 2), uniform(0, H - bh / 2), bw, bh};
      const float g = static_cast<float>(uniform(0.3, 0.95));
      vis.paint(b, {g, g * static_cast<float>(uniform(0.8, 1.2)), g}, 1.0f, [&](double x, double y) { return detail::rect(b, x, y); });
    }
    const int warm = static_cast<int>(uniform(2, 5));
    for (int k = 0; k < warm; ++k) {
      const double h = uniform(p.min_height, p.max_height), w = h * p.aspect_ratio;
      const Box b{uniform(0, W - w), uniform(0, H - h), w, h};
      const float t = static_cast<float>(uniform(0.55, 0.65));
      th.paint(b, {t, 0, 0}, 1.0f, [&](double x, double y) { return detail::silhouette(b, x, y); });
    }
    for (const auto& b : people) {
      const float g = static_cast<float>(uniform(0.12, 0.32));
      vis.paint(b, {g, g * static_cast<float>(uniform(0.8, 1.3)), g * static_cast<float>(uniform(0.8, 1.3))}, 1.0f,
                [&](double x, double y) { return detail::silhouette(b, x, y); });
      const float t = static_cast<float>(uniform(0.55, 0.65));
      th.paint(b, {t, 0, 0}, 1.0f, [&](double x, double y) { return detail::silhouette(b, x, y); });
    }
    vis.add_noise(rng, 0.03f);
    th.add_noise(rng, 0.04f);
  } else {
    const float base = static_cast<float>(uniform(0.04, 0.10));
    vis.fill({base, base, base * 1.2f});
    vis.add_texture(rng, 0.03f);
    th.fill({static_cast<float>(uniform(0.15, 0.25)), 0, 0});
    th.add_texture(rng, 0.05f);
    const int lamps = static_cast<int>(uniform(2, 6));
    for (int k = 0; k < lamps; ++k) {
      const double r = uniform(2, 6);
      const Box b{uniform(0, W - 2 * r), uniform(0, H - 2 * r), 2 * r, 2 * r};
      const float g = static_cast<float>(uniform(0.75, 1.0));
      vis.paint(b, {g, g * 0.9f, g * 0.6f}, 1.0f, [&](double x, double y) { return detail::ellipse(b, x, y); });
    }
    const int engines = static_cast<int>(uniform(0, 3));
    for (int k = 0; k < engines; ++k) {
      const double bh = uniform(6, 16), bw = uniform(2, 4) * bh;
      const Box b{uniform(0, W - bw), uniform(0, H - bh), bw, bh};
      const float t = static_cast<float>(uniform(0.6, 0.85));
      th.paint(b, {t, 0, 0}, 1.0f, [&](double x, double y) { return detail::ellipse(b, x, y); });
    }
    for (const auto& b : people) {
      const float g = base + static_cast<float>(uniform(0.01, 0.04));
      vis.paint(b, {g, g, g}, 1.0f, [&](double x, double y) { return detail::silhouette(b, x, y); });
      const float t = static_cast<float>(uniform(0.75, 0.95));
      th.paint(b, {t, 0, 0}, 1.0f, [&](double x, double y) { return detail::silhouette(b, x, y); });
    }
    vis.add_noise(rng, 0.03f);
    th.add_noise(rng, 0.03f);
  }
  frame.visible = vis.quantize();
  frame.thermal = th.quantize();

  for (const auto& b : people) {
    const double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
    const double x1 = std::min(W, b.right()), y1 = std::min(H, b.bottom());
    Annotation a;
    a.box = {x0, y0, x1 - x0, y1 - y0};
    a.visibility = std::clamp(intersection_area(b, image) / b.area(), 0.0, 1.0);
    const bool random_ignore = unit(rng) < p.ignore_rate;
    a.ignore = b.h < p.ignore_below_height || a.visibility < 0.5 || random_ignore;
    frame.annotations.push_back(a);
  }
  return frame;
}

inline Dataset generate_synthetic_dataset(const SyntheticParams& params, std::uint64_t seed) {
  params.validate();
  Dataset ds;
  ds.frames.reserve(params.n_frames);
  for (std::size_t i = 0; i < params.n_frames; ++i) ds.frames.push_back(generate_frame(params, seed, i));
  return ds;
}

}  // namespace iadn
