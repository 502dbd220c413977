#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "voicecorpus/error.hpp"
#include "voicecorpus/listen.hpp"

namespace vc::listen {
namespace {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Invalid:
    case ErrorKind::Format:
    case ErrorKind::Range:
      return 400;
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::Conflict:
      return 409;
    case ErrorKind::Domain:
      return 422;
    default:
      return 500;
  }
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_json(res, {{"error", to_string(e.kind())}, {"message", e.what()}}, http_status(e.kind()));
    } catch (const json::exception& e) {
      send_json(res, {{"error", "format"}, {"message", e.what()}}, 400);
    } catch (const std::exception& e) {
      send_json(res, {{"error", "internal"}, {"message", e.what()}}, 500);
    }
  };
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("request body is not valid JSON: ") + e.what());
  }
}

}  // namespace

struct ListenServer::Impl {
  Impl(ListenStore& s, ServerConfig c) : store(s), config(std::move(c)) {}

  ListenStore& store;
  ServerConfig config;
  httplib::Server server;
  std::thread thread;
};

ListenServer::ListenServer(ListenStore& store, ServerConfig config)
    : impl_(std::make_unique<Impl>(store, std::move(config))) {
  auto& s = impl_->server;
  ListenStore& st = impl_->store;

  s.Post("/campaigns", guarded([&st](const httplib::Request& req, httplib::Response& res) {
           const std::string id = st.create_campaign(parse_body(req));
           send_json(res, st.campaign_view(id), 201);
         }));
  s.Get("/campaigns", guarded([&st](const httplib::Request&, httplib::Response& res) {
          send_json(res, st.list_campaigns());
        }));
  s.Get(R"(/campaigns/([^/]+))", guarded([&st](const httplib::Request& req, httplib::Response& res) {
          send_json(res, st.campaign_view(req.matches[1]));
        }));
  s.Post(R"(/campaigns/([^/]+)/close)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
           st.close_campaign(req.matches[1]);
           send_json(res, st.campaign_view(req.matches[1]));
         }));
  s.Get(R"(/campaigns/([^/]+)/next)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
          send_json(res, st.next_task(req.matches[1], req.get_param_value("session")));
        }));
  s.Get(R"(/campaigns/([^/]+)/results)", guarded([&st](const httplib::Request& req, httplib::Response& res) {
          send_json(res, st.results(req.matches[1]));
        }));
  s.Post("/responses", guarded([&st](const httplib::Request& req, httplib::Response& res) {
           send_json(res, st.submit_response(parse_body(req)));
         }));

  if (!impl_->config.audio_dir.empty() && !s.set_mount_point("/audio", impl_->config.audio_dir.string())) {
    throw Error(ErrorKind::Io, "audio directory not found: " + impl_->config.audio_dir.string());
  }
  if (!impl_->config.static_dir.empty() && !s.set_mount_point("/", impl_->config.static_dir.string())) {
    throw Error(ErrorKind::Io, "static directory not found: " + impl_->config.static_dir.string());
  }
}

ListenServer::~ListenServer() { stop(); }

int ListenServer::start() {
  auto& s = impl_->server;
  const auto& c = impl_->config;
  if (c.port == 0) {
    port_ = s.bind_to_any_port(c.host);
  } else {
    port_ = s.bind_to_port(c.host, c.port) ? c.port : -1;
  }
  if (port_ <= 0) throw Error(ErrorKind::Io, "cannot bind " + c.host + ":" + std::to_string(c.port));
  impl_->thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return port_;
}

void ListenServer::run() {
  auto& s = impl_->server;
  const auto& c = impl_->config;
  port_ = c.port == 0 ? s.bind_to_any_port(c.host) : (s.bind_to_port(c.host, c.port) ? c.port : -1);
  if (port_ <= 0) throw Error(ErrorKind::Io, "cannot bind " + c.host + ":" + std::to_string(c.port));
  s.listen_after_bind();
}

void ListenServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

ServerConfig config_from_environment(ServerConfig base, std::filesystem::path* data_dir) {
  if (const char* v = std::getenv("VC_LISTEN_HOST"); v && *v) base.host = v;
  if (const char* v = std::getenv("VC_LISTEN_PORT"); v && *v) {
    try {
      base.port = std::stoi(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Invalid, std::string("VC_LISTEN_PORT is not a port number: ") + v);
    }
  }
  if (const char* v = std::getenv("VC_AUDIO_DIR"); v && *v) base.audio_dir = v;
  if (const char* v = std::getenv("VC_DATA_DIR"); v && *v && data_dir) *data_dir = v;
  return base;
}

}  // namespace vc::listen
