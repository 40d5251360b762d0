#include <doctest.h>

#include <filesystem>

#include "ptz/io_util.hpp"
#include "ptz/model_io.hpp"

using namespace ptz;

namespace {

ModelError::Code code_of(const std::string& bytes) {
  try {
    deserialize_model(bytes);
  } catch (const ModelError& e) {
    return e.code();
  }
  FAIL("no error");
  return ModelError::Code::io;
}

}  // namespace

TEST_CASE("model round trip") {
  for (const NetworkSpec& spec : {NetworkSpec::image(HeadSet::policy_value, true), NetworkSpec::bbox(HeadSet::policy),
                                  NetworkSpec::image(HeadSet::detector)}) {
    const Network net(spec);
    const std::vector<double> p = round_to_float(net.init_params(9));
    const std::string bytes = serialize_model(spec, p);
    CHECK(bytes.substr(0, 4) == "EAGL");
    const ModelFile m = deserialize_model(bytes);
    CHECK(m.spec == spec);
    CHECK(m.params == p);
    CHECK(serialize_model(m.spec, m.params) == bytes);
  }
}

TEST_CASE("model files on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "ptzsim_test_model_io";
  std::filesystem::create_directories(dir);
  const NetworkSpec spec = NetworkSpec::bbox(HeadSet::policy_value);
  const std::vector<double> p = round_to_float(Network(spec).init_params(1));
  save_model(dir / "m.bin", spec, p);
  CHECK(load_model(dir / "m.bin").params == p);
  CHECK(load_model(dir / "m.bin", Trunk::bbox_mlp, HeadSet::policy_value).spec == spec);
  try {
    load_model(dir / "m.bin", Trunk::image_cnn);
    FAIL("expected mismatch");
  } catch (const ModelError& e) {
    CHECK(e.code() == ModelError::Code::architecture_mismatch);
  }
  try {
    load_model(dir / "missing.bin");
    FAIL("expected io error");
  } catch (const ModelError& e) {
    CHECK(e.code() == ModelError::Code::io);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("malformed model files") {
  const NetworkSpec spec = NetworkSpec::bbox(HeadSet::relloc);
  const std::string good = serialize_model(spec, Network(spec).init_params(2));
  std::string bad = good;
  bad[0] = 'X';
  CHECK(code_of(bad) == ModelError::Code::bad_magic);
  CHECK(code_of("EA") == ModelError::Code::bad_magic);
  bad = good;
  bad[4] = 7;
  CHECK(code_of(bad) == ModelError::Code::bad_version);
  CHECK(code_of(good.substr(0, good.size() - 3)) == ModelError::Code::corrupt);
  CHECK(code_of(good.substr(0, 12)) == ModelError::Code::corrupt);
  CHECK(code_of(good + "x") == ModelError::Code::corrupt);
  bad = good;
  bad[6] = 9;  // trunk id
  CHECK(code_of(bad) == ModelError::Code::corrupt);
  CHECK_THROWS_AS(serialize_model(spec, {1.0, 2.0}), std::invalid_argument);
}
