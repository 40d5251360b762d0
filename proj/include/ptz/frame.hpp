#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace ptz {

/// Grayscale image, row-major, intensities in [0,1].
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Frame() = default;
  Frame(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const Frame&, const Frame&) = default;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint8_t to_byte(float v);
std::vector<std::uint8_t> to_bytes(const Frame& f);
Frame from_bytes(int width, int height, const std::vector<std::uint8_t>& bytes);

/// Writes a binary PGM (P5, maxval 255) atomically.
void write_pgm(const std::filesystem::path& path, const Frame& f);

/// Reads P5 (gray) or P6 (color, converted to luma). Throws IoError or FormatError.
Frame read_pnm(const std::filesystem::path& path);

}  // namespace ptz
