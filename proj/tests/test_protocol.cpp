#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "ptz/controllers.hpp"
#include "ptz/io_util.hpp"
#include "ptz/protocol.hpp"

using namespace ptz;
using nlohmann::json;

TEST_CASE("spec reply") {
  ProtocolSession s;
  const json j = json::parse(s.handle(R"({"cmd":"spec"})"));
  CHECK(j["ok"] == true);
  CHECK(j["obs_size"] == 120);
  CHECK(j["action_encoding"]["noop"] == json::array({1, 1, 1}));
  CHECK(j["scenarios"].size() == all_scenario_ids().size());
}

TEST_CASE("remote trajectory equals the in-process one") {
  for (const char* name : {"sc1", "sc5", "dt"}) {
    EnvConfig base;
    base.episode_len = 60;
    ProtocolSession s(base);
    EnvConfig cfg = base;
    cfg.scenario = scenario(*parse_scenario_id(name));
    Environment env(cfg);
    const Observation o0 = env.reset(7);
    const json r0 = json::parse(s.handle(std::string(R"({"cmd":"reset","seed":7,"scenario":")") + name + "\"}"));
    REQUIRE(r0["ok"] == true);
    CHECK(base64_decode(r0["obs"].get<std::string>()) == o0.bytes);
    CHECK((r0["ci"].is_null() ? std::optional<int>() : std::optional<int>(r0["ci"].get<int>())) == o0.ci);

    RandomController rc;
    rc.reset(7);
    bool done = false;
    while (!done) {
      const PtzAction a = rc.act({});
      const StepResult local = env.step(a);
      std::ostringstream req;
      req << R"({"cmd":"step","action":[)" << move_index(a.pan) << ',' << move_index(a.tilt) << ','
          << move_index(a.zoom) << "]}";
      const json r = json::parse(s.handle(req.str()));
      REQUIRE(r["ok"] == true);
      REQUIRE(r["reward"].get<double>() == local.reward);
      REQUIRE(r["done"].get<bool>() == local.done);
      REQUIRE(base64_decode(r["obs"].get<std::string>()) == local.obs.bytes);
      REQUIRE(r["info"]["visible"].get<bool>() == local.info.vis.visible);
      REQUIRE(r["info"]["center_x"].get<double>() == local.info.breakdown.center_x);
      done = local.done;
    }
    const json after = json::parse(s.handle(R"({"cmd":"step","action":[1,1,1]})"));
    CHECK(after["ok"] == false);
    CHECK(after["error"]["code"] == "episode_done");
  }
}

TEST_CASE("protocol errors") {
  ProtocolSession s;
  auto code = [&](const std::string& line) { return json::parse(s.handle(line))["error"]["code"].get<std::string>(); };
  CHECK(code("{not json") == "bad_json");
  CHECK(code(R"({"x":1})") == "bad_request");
  CHECK(code(R"({"cmd":"fly"})") == "unknown_cmd");
  CHECK(code(R"({"cmd":"step","action":[1,1,1]})") == "not_reset");
  CHECK(code(R"({"cmd":"reset","scenario":"bogus","seed":1})") == "bad_request");
  CHECK(code(R"({"cmd":"reset","scenario":"sc1","seed":-1})") == "bad_request");
  REQUIRE(json::parse(s.handle(R"({"cmd":"reset","scenario":"sc1","seed":1})"))["ok"] == true);
  CHECK(code(R"({"cmd":"step","action":[1,3,1]})") == "bad_request");
  CHECK(code(R"({"cmd":"step","action":[1,1]})") == "bad_request");
  CHECK(s.protocol_errors() == 8);
  CHECK(json::parse(s.handle(R"({"cmd":"close"})"))["ok"] == true);
  CHECK(s.closed());
}

TEST_CASE("stream serving") {
  std::istringstream in("{\"cmd\":\"spec\"}\n\n{\"cmd\":\"reset\",\"scenario\":\"sc0_static\",\"seed\":2}\n"
                        "{\"cmd\":\"close\"}\n{\"cmd\":\"spec\"}\n");
  std::ostringstream out;
  CHECK(serve_stream(in, out, EnvConfig{}) == 0);
  std::istringstream lines(out.str());
  std::string l;
  int n = 0;
  while (std::getline(lines, l)) ++n;
  CHECK(n == 3);
}

TEST_CASE("tcp serving") {
  const int port = 40000 + static_cast<int>(::getpid() % 20000);
  std::thread server([&] { serve_tcp(port, EnvConfig{}); });
  int fd = -1;
  for (int attempt = 0; attempt < 100; ++attempt) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) break;
    ::close(fd);
    fd = -1;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(fd >= 0);
  const std::string req = "{\"cmd\":\"spec\"}\n{\"cmd\":\"close\"}\n";
  CHECK(::send(fd, req.data(), req.size(), 0) == static_cast<ssize_t>(req.size()));
  std::string got;
  char buf[4096];
  ssize_t n;
  while ((n = ::recv(fd, buf, sizeof buf, 0)) > 0) got.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  server.join();
  const auto nl = got.find('\n');
  REQUIRE(nl != std::string::npos);
  CHECK(json::parse(got.substr(0, nl))["obs_size"] == 120);
}
