#include "mogfit/service.hpp"

#include <httplib.h>

#include "mogfit/pipeline.hpp"

namespace mogfit {

namespace {

bool bad_input(ErrorKind kind) {
  return kind == ErrorKind::validation || kind == ErrorKind::domain ||
         kind == ErrorKind::unsupported;
}

HttpReply reply(int status, const Json& j) { return {status, dump_canonical(j)}; }

HttpReply failure(ErrorKind kind, const std::string& stage, const std::string& msg) {
  return reply(http_status(kind), error_json(kind, stage, msg));
}

}  // namespace

int http_status(ErrorKind kind) { return bad_input(kind) ? 400 : 422; }

int exit_code(ErrorKind kind) { return bad_input(kind) ? 2 : 3; }

Json error_json(ErrorKind kind, const std::string& stage, const std::string& message) {
  return {{"error", {{"kind", to_string(kind)}, {"stage", stage}, {"message", message}}}};
}

HttpReply handle_request(const std::string& method, const std::string& path,
                         const std::string& body, const QuadratureConfig& cfg) {
  const bool known = path == "/v1/health" || path == "/v1/spline" ||
                     path == "/v1/pipeline" || path == "/v1/evaluate";
  if (!known) return reply(404, {{"error", {{"kind", "not_found"}, {"message", path}}}});
  const bool get = path == "/v1/health";
  if (method != (get ? "GET" : "POST")) {
    return reply(405, {{"error", {{"kind", "method_not_allowed"}, {"message", method}}}});
  }
  if (get) return reply(200, {{"status", "ok"}});

  try {
    const Json in = in_stage("request", [&] { return parse_json(body); });
    if (path == "/v1/spline") return reply(200, assess_spline(in));
    if (path == "/v1/evaluate") return reply(200, evaluate(in, cfg));
    return reply(200, to_json(run_pipeline(request_from_json(in, cfg))));
  } catch (const StageError& e) {
    return failure(e.kind(), e.stage(), e.what());
  } catch (const Error& e) {
    return failure(e.kind(), "internal", e.what());
  } catch (const Json::exception& e) {
    return failure(ErrorKind::validation, "request", e.what());
  } catch (const std::exception& e) {
    return reply(500, {{"error", {{"kind", "internal"}, {"message", e.what()}}}});
  }
}

struct Server::Impl {
  QuadratureConfig cfg;
  httplib::Server http;
};

Server::Server(QuadratureConfig cfg) : impl_(std::make_unique<Impl>()) {
  impl_->cfg = cfg;
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = handle_request(req.method, req.path, req.body, impl_->cfg);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->http.Get(".*", handler);
  impl_->http.Post(".*", handler);
  impl_->http.Put(".*", handler);
  impl_->http.Delete(".*", handler);
}

Server::~Server() = default;

int Server::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw ValidationError("port must lie in [0, 65535]");
  const int bound = port == 0 ? impl_->http.bind_to_any_port(host)
                              : (impl_->http.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

void Server::stop() { impl_->http.stop(); }

}  // namespace mogfit
