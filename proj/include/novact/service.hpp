#pragma once

#include "novact/explorer.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace novact {

struct ServeConfig {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> sweep;  // directory or records file
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int max_steps = 200;

  void validate() const;
};

struct Response {
  int status = 200;
  nlohmann::ordered_json body;
};

/// Request handlers over an immutable checkpoint and optional sweep. All
/// handlers are const and safe to call concurrently.
class Service {
 public:
  Service(Checkpoint checkpoint, std::optional<SweepResult> sweep, int max_steps);

  /// Loads the checkpoint and sweep named by `config`.
  static Service load(const ServeConfig& config);

  Response info() const;
  /// Body: {"pb": [x, y], "steps": n}; steps defaults to the longest training pattern.
  Response generate(std::string_view body) const;
  /// Empty `resolution` means the sweep's own resolution.
  Response map(std::string_view resolution) const;

  const Checkpoint& checkpoint() const { return checkpoint_; }

 private:
  Checkpoint checkpoint_;
  std::optional<SweepResult> sweep_;
  Classifier classifier_;
  int max_steps_;
};

Response error_response(int status, std::string_view code, std::string_view message);

/// HTTP front end with permissive CORS.
class HttpServer {
 public:
  explicit HttpServer(const Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without serving yet; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Loads, binds and serves until the process is interrupted.
void serve(const ServeConfig& config);

}  // namespace novact
