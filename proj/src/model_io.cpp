#include "ptz/model_io.hpp"

#include <bit>
#include <cstring>

#include "ptz/frame.hpp"
#include "ptz/io_util.hpp"

namespace ptz {
namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

constexpr char kMagic[4] = {'E', 'A', 'G', 'L'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > s_.size()) throw ModelError(ModelError::Code::corrupt, "model file truncated");
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> round_to_float(const std::vector<double>& params) {
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = static_cast<double>(static_cast<float>(params[i]));
  return out;
}

std::string serialize_model(const NetworkSpec& spec, const std::vector<double>& params) {
  const Network net(spec);
  if (params.size() != net.param_count()) throw std::invalid_argument("parameter count does not match the network");
  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kModelVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.trunk));
  put<std::uint8_t>(out, spec.ci_injection ? 1 : 0);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.heads));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(spec.input_w));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(spec.input_h));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.input_c));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.bbox_inputs));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.convs.size()));
  for (const auto& c : spec.convs) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(c.kernel));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(c.out_channels));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(c.stride));
  }
  put<std::uint8_t>(out, static_cast<std::uint8_t>(spec.fc.size()));
  for (int f : spec.fc) put<std::uint16_t>(out, static_cast<std::uint16_t>(f));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(params.size()));
  for (double p : params) put<float>(out, static_cast<float>(p));
  return out;
}

ModelFile deserialize_model(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw ModelError(ModelError::Code::bad_magic, "not a model file (bad magic)");
  Reader r(bytes);
  for (int i = 0; i < 4; ++i) r.get<char>();
  const auto version = r.get<std::uint16_t>();
  if (version != kModelVersion)
    throw ModelError(ModelError::Code::bad_version, "unsupported model version " + std::to_string(version));
  ModelFile m;
  NetworkSpec& s = m.spec;
  const auto trunk = r.get<std::uint8_t>();
  const auto ci = r.get<std::uint8_t>();
  const auto heads = r.get<std::uint8_t>();
  if (trunk > 1 || ci > 1 || heads > 3) throw ModelError(ModelError::Code::corrupt, "invalid architecture descriptor");
  s.trunk = static_cast<Trunk>(trunk);
  s.ci_injection = ci == 1;
  s.heads = static_cast<HeadSet>(heads);
  s.input_w = r.get<std::uint16_t>();
  s.input_h = r.get<std::uint16_t>();
  s.input_c = r.get<std::uint8_t>();
  s.bbox_inputs = r.get<std::uint8_t>();
  const int nconv = r.get<std::uint8_t>();
  for (int i = 0; i < nconv; ++i) {
    ConvSpec c;
    c.kernel = r.get<std::uint8_t>();
    c.out_channels = r.get<std::uint16_t>();
    c.stride = r.get<std::uint8_t>();
    if (c.kernel < 1 || c.out_channels < 1 || c.stride < 1)
      throw ModelError(ModelError::Code::corrupt, "invalid convolution descriptor");
    s.convs.push_back(c);
  }
  const int nfc = r.get<std::uint8_t>();
  for (int i = 0; i < nfc; ++i) {
    const int f = r.get<std::uint16_t>();
    if (f < 1) throw ModelError(ModelError::Code::corrupt, "invalid layer width");
    s.fc.push_back(f);
  }
  const auto count = r.get<std::uint64_t>();
  std::size_t expected = 0;
  try {
    expected = Network(s).param_count();
  } catch (const std::invalid_argument& e) {
    throw ModelError(ModelError::Code::corrupt, std::string("invalid architecture: ") + e.what());
  }
  if (count != expected) throw ModelError(ModelError::Code::corrupt, "parameter count does not match architecture");
  if (r.remaining() != count * sizeof(float)) throw ModelError(ModelError::Code::corrupt, "model file size mismatch");
  m.params.resize(count);
  for (auto& p : m.params) p = static_cast<double>(r.get<float>());
  return m;
}

void save_model(const std::filesystem::path& path, const NetworkSpec& spec, const std::vector<double>& params) {
  write_file_atomic(path, serialize_model(spec, params));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const std::exception& e) {
    throw ModelError(ModelError::Code::io, e.what());
  }
  return deserialize_model(bytes);
}

ModelFile load_model(const std::filesystem::path& path, Trunk trunk, std::optional<HeadSet> heads) {
  ModelFile m = load_model(path);
  if (m.spec.trunk != trunk || (heads && m.spec.heads != *heads))
    throw ModelError(ModelError::Code::architecture_mismatch,
                     "model architecture '" + describe(m.spec) + "' does not fit this runner");
  return m;
}

}  // namespace ptz
