#include "ptz/protocol.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "ptz/io_util.hpp"

namespace ptz {
namespace {

using nlohmann::ordered_json;

class RequestError : public std::runtime_error {
 public:
  RequestError(std::string code, const std::string& msg) : std::runtime_error(msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

std::string error_reply(const std::string& code, const std::string& message) {
  ordered_json j;
  j["ok"] = false;
  j["error"] = {{"code", code}, {"message", message}};
  return j.dump();
}

ordered_json box_json(const BoundingBox& b) { return ordered_json::array({b.xmin, b.ymin, b.xmax, b.ymax}); }

ordered_json observation_json(ordered_json j, const Observation& obs) {
  j["obs"] = base64_encode(obs.bytes);
  j["ci"] = obs.ci ? ordered_json(*obs.ci) : ordered_json(nullptr);
  return j;
}

}  // namespace

ProtocolSession::ProtocolSession(EnvConfig base) : base_(std::move(base)) { validate(base_); }

std::string ProtocolSession::spec_reply() const {
  ordered_json j;
  j["ok"] = true;
  j["obs_size"] = base_.obs_size;
  j["obs_encoding"] = "base64 of obs_size*obs_size row-major bytes";
  j["action_encoding"] = {{"components", {"pan", "tilt", "zoom"}},
                          {"values", {{"0", "minus"}, {"1", "none"}, {"2", "plus"}}},
                          {"noop", {1, 1, 1}}};
  ordered_json scen = ordered_json::array();
  for (ScenarioId id : all_scenario_ids()) scen.push_back(std::string(to_string(id)));
  j["scenarios"] = scen;
  ordered_json vars = ordered_json::array();
  for (EvalVariation v : {EvalVariation::as_trained, EvalVariation::fixed_bg, EvalVariation::var_bg_trees,
                          EvalVariation::var_bg_trees_humans, EvalVariation::multi_target})
    vars.push_back(std::string(to_string(v)));
  j["variations"] = vars;
  j["episode_len"] = base_.episode_len;
  j["step_period"] = base_.step_period;
  return j.dump();
}

std::string ProtocolSession::reset_reply(const std::string& scenario_name, std::uint64_t seed,
                                         const std::string& variation) {
  const auto id = parse_scenario_id(scenario_name);
  if (!id) throw RequestError("bad_request", "unknown scenario '" + scenario_name + "'");
  const auto var = parse_variation(variation);
  if (!var) throw RequestError("bad_request", "unknown variation '" + variation + "'");
  EnvConfig cfg = base_;
  cfg.scenario = scenario(*id);
  cfg.variation = *var;
  env_ = std::make_unique<Environment>(cfg);
  const Observation obs = env_->reset(seed);
  ordered_json j;
  j["ok"] = true;
  j = observation_json(std::move(j), obs);
  j["reward"] = 0.0;
  j["done"] = false;
  const PtzState& p = env_->ptz();
  const Visibility& v = env_->visibility();
  j["info"] = {{"step", 0}, {"pan", p.pan}, {"tilt", p.tilt}, {"fov", p.fov},
               {"visible", v.visible}, {"box", box_json(v.clipped_box)}, {"clipped", v.clipped}};
  return j.dump();
}

std::string ProtocolSession::step_reply(const PtzAction& a) {
  if (!env_) throw RequestError("not_reset", "step before reset");
  if (env_->done()) throw RequestError("episode_done", "step after the episode ended");
  const StepResult r = env_->step(a);
  ordered_json j;
  j["ok"] = true;
  j = observation_json(std::move(j), r.obs);
  j["reward"] = r.reward;
  j["done"] = r.done;
  const StepInfo& i = r.info;
  j["info"] = {{"step", i.step},
               {"pan", i.ptz.pan},
               {"tilt", i.ptz.tilt},
               {"fov", i.ptz.fov},
               {"visible", i.vis.visible},
               {"box", box_json(i.vis.clipped_box)},
               {"clipped", i.vis.clipped},
               {"action_changed", i.action_changed},
               {"center_x", i.breakdown.center_x},
               {"center_y", i.breakdown.center_y},
               {"obj_size", i.breakdown.obj_size},
               {"clip_factor", i.breakdown.clip_factor}};
  return j.dump();
}

std::string ProtocolSession::handle(const std::string& line) {
  try {
    ordered_json req;
    try {
      req = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw RequestError("bad_json", e.what());
    }
    if (!req.is_object() || !req.contains("cmd") || !req["cmd"].is_string())
      throw RequestError("bad_request", "request must be an object with a string \"cmd\"");
    const std::string cmd = req["cmd"].get<std::string>();
    if (cmd == "spec") return spec_reply();
    if (cmd == "close") {
      closed_ = true;
      return ordered_json{{"ok", true}}.dump();
    }
    if (cmd == "reset") {
      if (!req.contains("scenario") || !req["scenario"].is_string())
        throw RequestError("bad_request", "reset needs a string \"scenario\"");
      if (!req.contains("seed") || !req["seed"].is_number_integer() || req["seed"].get<std::int64_t>() < 0)
        throw RequestError("bad_request", "reset needs a non-negative integer \"seed\"");
      std::string variation = "as_trained";
      if (req.contains("variation")) {
        if (!req["variation"].is_string()) throw RequestError("bad_request", "\"variation\" must be a string");
        variation = req["variation"].get<std::string>();
      }
      return reset_reply(req["scenario"].get<std::string>(), req["seed"].get<std::uint64_t>(), variation);
    }
    if (cmd == "step") {
      const auto& a = req.contains("action") ? req["action"] : ordered_json();
      if (!a.is_array() || a.size() != 3) throw RequestError("bad_request", "step needs \"action\": [pan,tilt,zoom]");
      int c[3];
      for (int k = 0; k < 3; ++k) {
        if (!a[static_cast<std::size_t>(k)].is_number_integer()) throw RequestError("bad_request", "action components must be integers");
        c[k] = a[static_cast<std::size_t>(k)].get<int>();
        if (c[k] < 0 || c[k] > 2) throw RequestError("bad_request", "action components must be 0, 1 or 2");
      }
      return step_reply({move_from_index(c[0]), move_from_index(c[1]), move_from_index(c[2])});
    }
    throw RequestError("unknown_cmd", "unknown command '" + cmd + "'");
  } catch (const RequestError& e) {
    ++protocol_errors_;
    return error_reply(e.code(), e.what());
  } catch (const EnvError& e) {
    ++protocol_errors_;
    return error_reply("env_error", e.what());
  }
}

int serve_stream(std::istream& in, std::ostream& out, const EnvConfig& base) {
  ProtocolSession s(base);
  std::string line;
  while (!s.closed() && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << s.handle(line) << '\n';
    out.flush();
  }
  return s.protocol_errors();
}

void serve_tcp(int port, const EnvConfig& base) {
  if (port <= 0 || port > 65535) throw std::invalid_argument("port must be in 1..65535");
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(fd, 1) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd);
    throw std::runtime_error("cannot listen on port " + std::to_string(port) + ": " + msg);
  }
  bool stop = false;
  while (!stop) {
    const int conn = ::accept(fd, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) continue;
      const std::string msg = std::strerror(errno);
      ::close(fd);
      throw std::runtime_error("accept: " + msg);
    }
    ProtocolSession s(base);
    std::string buf;
    char chunk[4096];
    bool open = true;
    while (open && !s.closed()) {
      const ssize_t n = ::recv(conn, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t nl;
      while (!s.closed() && (nl = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, nl);
        buf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string reply = s.handle(line) + "\n";
        std::size_t sent = 0;
        while (sent < reply.size()) {
          const ssize_t k = ::send(conn, reply.data() + sent, reply.size() - sent, MSG_NOSIGNAL);
          if (k <= 0) {
            open = false;
            break;
          }
          sent += static_cast<std::size_t>(k);
        }
        if (!open) break;
      }
    }
    stop = s.closed();
    ::close(conn);
  }
  ::close(fd);
}

}  // namespace ptz
