#pragma once

#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "nl2api/runtime.hpp"

namespace httplib {
class Server;
}

namespace nl2api {

inline constexpr const char* kVersion = "0.1.0";

struct ServiceReply {
  int status = 200;
  nlohmann::ordered_json body;
};

/// HTTP front end: POST /ask, GET /health, GET /config. Requests are
/// stateless; the runtime can be swapped with `reload`.
class Service {
 public:
  /// `log` receives one JSON line per /ask (may be null).
  explicit Service(std::shared_ptr<Runtime> runtime, std::ostream* log = nullptr);
  ~Service();

  /// Body {question, dialect, strategy, model?}. `full` lifts the result cap.
  ServiceReply handle_ask(std::string_view body_text, bool full = false);
  ServiceReply handle_health() const;
  ServiceReply handle_config() const;

  void reload(std::shared_ptr<Runtime> runtime);

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until `stop`. Requires a successful `bind`.
  void run();
  void stop();

 private:
  std::shared_ptr<Runtime> snapshot() const;
  void install_routes();

  mutable std::mutex mutex_;
  std::shared_ptr<Runtime> runtime_;
  std::ostream* log_;
  std::mutex log_mutex_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace nl2api
