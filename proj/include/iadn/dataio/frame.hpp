#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "iadn/evaluation/box.hpp"
#include "iadn/numerics/error.hpp"
#include "iadn/numerics/tensor.hpp"

namespace iadn {

enum class Illumination { day, night };

inline std::string_view to_string(Illumination i) { return i == Illumination::day ? "day" : "night"; }

inline Illumination parse_illumination(std::string_view token) {
  if (token == "day") return Illumination::day;
  if (token == "night") return Illumination::night;
  throw DataError("unknown illumination token '" + std::string(token) + "'");
}

struct Annotation {
  Box box;
  bool ignore = false;
  double visibility = 1.0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// 8-bit image, interleaved height x width x channels.
struct Image {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c) : height(h), width(w), channels(c), pixels(h * w * c, 0) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Channels-first [C, H, W] tensor with values in [0, 1].
template <typename T>
Tensor<T> to_tensor(const Image& image) {
  Tensor<T> out({image.channels, image.height, image.width});
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        out.at(c, y, x) = static_cast<T>(image.at(y, x, c)) / T(255);
      }
    }
  }
  return out;
}

struct MultispectralFrame {
  std::string id;
  Image visible;  // 3 channels
  Image thermal;  // 1 channel
  Illumination illumination = Illumination::day;
  std::vector<Annotation> annotations;

  std::size_t height() const noexcept { return visible.height; }
  std::size_t width() const noexcept { return visible.width; }
  bool is_day() const noexcept { return illumination == Illumination::day; }

  void validate() const {
    if (visible.channels != 3 || thermal.channels != 1) {
      throw DataError("frame " + id + ": expected 3-channel visible and 1-channel thermal images");
    }
    if (visible.height != thermal.height || visible.width != thermal.width) {
      throw DataError("frame " + id + ": visible and thermal sizes differ");
    }
    if (visible.pixels.size() != visible.height * visible.width * 3 ||
        thermal.pixels.size() != thermal.height * thermal.width) {
      throw DataError("frame " + id + ": pixel buffer size does not match image dimensions");
    }
    const Box image{0, 0, static_cast<double>(width()), static_cast<double>(height())};
    for (const auto& a : annotations) {
      if (!(a.box.w > 0) || !(a.box.h > 0)) throw DataError("frame " + id + ": degenerate annotation box");
      if (intersection_area(a.box, image) <= 0) throw DataError("frame " + id + ": annotation outside the image");
      if (a.visibility < 0 || a.visibility > 1) throw DataError("frame " + id + ": visibility outside [0, 1]");
    }
  }

  friend bool operator==(const MultispectralFrame&, const MultispectralFrame&) = default;
};

struct Dataset {
  std::vector<MultispectralFrame> frames;

  std::size_t size() const noexcept { return frames.size(); }
  std::size_t count(Illumination i) const noexcept {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.illumination == i;
    return n;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace iadn
