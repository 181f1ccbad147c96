#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <string>

#include "iadn/dataio/frame.hpp"
#include "iadn/numerics/error.hpp"

namespace iadn {

/// Binary PPM (3 channels) or PGM (1 channel), maxval 255.
inline void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw UsageError("PNM images need 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

namespace detail {

inline std::string pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

}  // namespace detail

/// `context` names the owner (e.g. the frame id) in error messages.
inline Image read_pnm(const std::filesystem::path& path, const std::string& context) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(context + ": cannot open image " + path.string());
  const std::string magic = detail::pnm_token(in);
  if (magic != "P5" && magic != "P6") throw DataError(context + ": " + path.string() + " is not a binary PGM/PPM");
  std::size_t width = 0, height = 0;
  int maxval = 0;
  try {
    width = std::stoul(detail::pnm_token(in));
    height = std::stoul(detail::pnm_token(in));
    maxval = std::stoi(detail::pnm_token(in));
  } catch (const std::exception&) {
    throw DataError(context + ": malformed header in " + path.string());
  }
  if (width == 0 || height == 0 || maxval != 255) {
    throw DataError(context + ": unsupported image geometry or maxval in " + path.string());
  }
  Image image(height, width, magic == "P6" ? 3 : 1);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) {
    throw DataError(context + ": truncated image data in " + path.string());
  }
  return image;
}

}  // namespace iadn
