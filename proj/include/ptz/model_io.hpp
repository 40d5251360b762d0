#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptz/nn.hpp"

namespace ptz {

class ModelError : public std::runtime_error {
 public:
  enum class Code { io, bad_magic, bad_version, corrupt, architecture_mismatch };
  ModelError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

inline constexpr std::uint16_t kModelVersion = 1;

struct ModelFile {
  NetworkSpec spec;
  std::vector<double> params;  // values are exactly representable as float
};

/// Layout: "EAGL", u16 version, architecture descriptor, u64 count, f32 params (all little-endian).
std::string serialize_model(const NetworkSpec& spec, const std::vector<double>& params);
ModelFile deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const NetworkSpec& spec, const std::vector<double>& params);
ModelFile load_model(const std::filesystem::path& path);
/// Also checks that the stored network has the expected trunk and heads.
ModelFile load_model(const std::filesystem::path& path, Trunk trunk, std::optional<HeadSet> heads = std::nullopt);

/// Rounds every parameter to float precision, as stored on disk.
std::vector<double> round_to_float(const std::vector<double>& params);

}  // namespace ptz
