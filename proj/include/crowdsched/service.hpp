#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>

#include "crowdsched/config.hpp"
#include "crowdsched/mlp.hpp"
#include "crowdsched/task_model.hpp"

namespace crowdsched {

struct ServiceOptions {
  EngineConfig config;
  std::filesystem::path snapshot_dir = ".";
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// JSON-over-HTTP front end for prediction, scheduling and what-if sessions.
/// Datasets and models are immutable once registered; each session is
/// guarded by its own mutex.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::string add_dataset(Dataset dataset);
  std::string add_model(MlpModel model);

  /// Routes one request without a socket. `content_type` selects CSV or JSON
  /// for dataset uploads.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body,
                      const std::string& content_type = "application/json");

  /// Binds to host:port (port 0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; throws std::invalid_argument on a malformed address.
std::pair<std::string, int> parse_listen_address(const std::string& address);

}  // namespace crowdsched
