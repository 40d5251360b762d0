#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "ptz/environment.hpp"

namespace ptz {

/// Newline-delimited JSON environment protocol, one request per line:
///   {"cmd":"spec"}
///   {"cmd":"reset","scenario":"sc1","seed":3[,"variation":"fixed_bg"]}
///   {"cmd":"step","action":[pan,tilt,zoom]}   components in {0,1,2} = {-,0,+}
///   {"cmd":"close"}
/// Replies are one JSON object per line; failures carry {"ok":false,"error":{"code","message"}}.
class ProtocolSession {
 public:
  /// `base` supplies everything except scenario and variation, which each reset chooses.
  explicit ProtocolSession(EnvConfig base = {});

  std::string handle(const std::string& line);
  bool closed() const { return closed_; }
  int protocol_errors() const { return protocol_errors_; }

 private:
  std::string spec_reply() const;
  std::string reset_reply(const std::string& scenario, std::uint64_t seed, const std::string& variation);
  std::string step_reply(const PtzAction& a);

  EnvConfig base_;
  std::unique_ptr<Environment> env_;
  bool closed_ = false;
  int protocol_errors_ = 0;
};

/// Serves one session over the given streams until EOF or "close". Returns the number of error replies.
int serve_stream(std::istream& in, std::ostream& out, const EnvConfig& base);

/// Listens on 127.0.0.1:`port` and serves connections one at a time until a session sends "close".
/// Throws std::runtime_error on socket failures.
void serve_tcp(int port, const EnvConfig& base);

}  // namespace ptz
