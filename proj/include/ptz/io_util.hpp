#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ptz {

/// Writes `data` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);
std::string read_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> data);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::vector<std::string> split(std::string_view line, char sep);

}  // namespace ptz
