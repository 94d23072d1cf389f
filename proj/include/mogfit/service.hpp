#pragma once

#include <memory>
#include <string>

#include "mogfit/error.hpp"
#include "mogfit/json_io.hpp"
#include "mogfit/quadrature.hpp"

namespace mogfit {

/// 400 for bad input (validation, domain, unsupported), 422 for numerical
/// failure (numerical, divergence, degenerate).
int http_status(ErrorKind kind);
/// CLI exit code: 2 for bad input, 3 for numerical failure.
int exit_code(ErrorKind kind);

/// {"error": {"kind", "stage", "message"}}
Json error_json(ErrorKind kind, const std::string& stage, const std::string& message);

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Routes one request. Pure: no state is kept between calls.
///   GET  /v1/health
///   POST /v1/spline, /v1/pipeline, /v1/evaluate
HttpReply handle_request(const std::string& method, const std::string& path,
                         const std::string& body, const QuadratureConfig& cfg);

/// HTTP/1.1 front end for handle_request.
class Server {
 public:
  explicit Server(QuadratureConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); in-flight requests complete before it returns.
  void listen();
  /// Blocks until listen() is accepting connections.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mogfit
