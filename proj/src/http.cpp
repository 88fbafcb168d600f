#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "pnrl/service.hpp"

namespace pnrl::service {

using nlohmann::json;

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(Service& s) : service(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::optional<std::string> token_of(const httplib::Request& req) {
  if (req.has_header("X-Session-Token")) return req.get_header_value("X-Session-Token");
  if (req.has_header("Authorization")) {
    const std::string auth = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    if (auth.rfind(prefix, 0) == 0) return auth.substr(prefix.size());
  }
  return std::nullopt;
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ServiceError(400, "MalformedRequest", std::string("body is not valid JSON: ") + e.what());
  }
}

// Wraps a handler so every failure becomes a JSON error body.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), e.body());
    } catch (const std::exception& e) {
      spdlog::error("{} {} failed: {}", req.method, req.path, e.what());
      send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
    }
  };
}

json records_json(const std::vector<JobRecord>& records) {
  json out = json::array();
  for (const auto& r : records) out.push_back(r.to_json());
  return out;
}

}  // namespace

HttpServer::HttpServer(Service& service, std::optional<std::filesystem::path> ui_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  Service& svc = impl_->service;

  srv.Post("/api/session/login", guarded([&svc](const httplib::Request&, httplib::Response& res) {
             send_json(res, 200, {{"token", svc.login()}});
           }));
  srv.Post("/api/session/logout", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto token = token_of(req);
             if (!token) throw ServiceError(401, "InvalidSession", "no session token supplied");
             svc.logout(*token);
             send_json(res, 200, {{"ok", true}});
           }));
  srv.Get("/api/session", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.session_record(svc.resolve_session(token_of(req))).to_json());
          }));
  srv.Get("/api/session/configs", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.session_record(svc.resolve_session(token_of(req))).saved_configs);
          }));
  srv.Put(R"(/api/session/configs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string session = svc.resolve_session(token_of(req));
            svc.save_config(session, req.matches[1], parse_body(req));
            send_json(res, 200, {{"ok", true}});
          }));

  srv.Post("/api/jobs", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const std::string session = svc.resolve_session(token_of(req));
             const std::string id = svc.create_job(session, parse_body(req));
             send_json(res, 201, {{"job_id", id}});
           }));
  srv.Get("/api/jobs", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, records_json(svc.list_jobs(svc.resolve_session(token_of(req)))));
          }));
  srv.Get(R"(/api/jobs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.get_job(svc.resolve_session(token_of(req)), req.matches[1]).to_json());
          }));
  srv.Get(R"(/api/jobs/([^/]+)/metrics)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const std::string session = svc.resolve_session(token_of(req));
            std::size_t after = 0;
            if (req.has_param("after")) {
              const std::string v = req.get_param_value("after");
              std::size_t pos = 0;
              try {
                after = std::stoull(v, &pos);
              } catch (const std::exception&) {
                pos = 0;
              }
              if (pos == 0 || pos != v.size() || v[0] == '-') {
                throw ServiceError(400, "MalformedRequest", "after must be a non-negative integer");
              }
            }
            json rows = json::array();
            for (const auto& r : svc.get_metrics(session, req.matches[1], after)) {
              json j = r.to_json();
              j["job_id"] = std::string(req.matches[1]);
              rows.push_back(std::move(j));
            }
            send_json(res, 200, rows);
          }));
  srv.Post(R"(/api/jobs/([^/]+)/cancel)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, svc.cancel_job(svc.resolve_session(token_of(req)), req.matches[1]).to_json());
           }));
  srv.Get("/api/catalog", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, Service::catalog());
          }));
  srv.Get("/api/schema", guarded([](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, Service::schema());
          }));

  if (ui_dir) {
    if (!srv.set_mount_point("/", ui_dir->string())) {
      throw IoError("UI directory " + ui_dir->string() + " does not exist");
    }
  }
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty() && req.path.rfind("/api/", 0) == 0) {
      send_json(res, res.status, {{"error", "NotFound"}, {"message", "no route " + req.method + " " + req.path}});
    }
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) {
  spdlog::info("listening on http://{}:{}", host, port);
  return impl_->server.listen(host, port);
}

int HttpServer::start_background(const std::string& host, int port) {
  if (port == 0) {
    port = impl_->server.bind_to_any_port(host);
    if (port < 0) throw IoError("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace pnrl::service
