#include "ptz/frame.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "ptz/io_util.hpp"

namespace ptz {

std::uint8_t to_byte(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

std::vector<std::uint8_t> to_bytes(const Frame& f) {
  std::vector<std::uint8_t> out(f.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(f.pixels[i]);
  return out;
}

Frame from_bytes(int width, int height, const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() != static_cast<std::size_t>(width) * height) throw FormatError("pixel count mismatch");
  Frame f(width, height);
  for (std::size_t i = 0; i < bytes.size(); ++i) f.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  return f;
}

void write_pgm(const std::filesystem::path& path, const Frame& f) {
  std::string data = "P5\n" + std::to_string(f.width) + " " + std::to_string(f.height) + "\n255\n";
  const auto bytes = to_bytes(f);
  data.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  write_file_atomic(path, data);
}

namespace {

// Reads one header integer, skipping whitespace and comments.
int header_int(const std::string& s, std::size_t& pos) {
  while (pos < s.size()) {
    if (std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    } else if (s[pos] == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  std::size_t start = pos;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
  if (start == pos) throw FormatError("bad PNM header");
  return std::stoi(s.substr(start, pos - start));
}

}  // namespace

Frame read_pnm(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  if (s.size() < 2 || s[0] != 'P' || (s[1] != '5' && s[1] != '6')) throw FormatError("not a P5/P6 file: " + path.string());
  const bool color = s[1] == '6';
  std::size_t pos = 2;
  const int w = header_int(s, pos);
  const int h = header_int(s, pos);
  const int maxval = header_int(s, pos);
  if (w <= 0 || h <= 0 || maxval != 255) throw FormatError("unsupported PNM geometry or maxval: " + path.string());
  ++pos;  // single whitespace before raster
  const std::size_t channels = color ? 3 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels;
  if (s.size() < pos + need) throw FormatError("truncated PNM raster: " + path.string());
  Frame f(w, h);
  const auto* p = reinterpret_cast<const unsigned char*>(s.data() + pos);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    if (color) {
      const double y = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
      f.pixels[i] = static_cast<float>(y / 255.0);
    } else {
      f.pixels[i] = static_cast<float>(p[i]) / 255.0f;
    }
  }
  return f;
}

}  // namespace ptz
