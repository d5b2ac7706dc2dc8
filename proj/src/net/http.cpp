#include <cstdlib>

#include "hri/error.hpp"
#include "hri/net.hpp"

// After Eigen: resolv.h, pulled in here, defines a `_res` macro.
#include <httplib.h>

namespace hri {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorKind::InvalidInput, "url needs a scheme: " + url);
  }
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace {

httplib::Client make_client(const std::string& base, double timeout_s) {
  httplib::Client cli(base);
  if (!cli.is_valid()) {
    throw Error(ErrorKind::PlannerUnavailable, "unsupported endpoint " + base);
  }
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  return cli;
}

}  // namespace

ChatTransport make_http_chat_transport(const LlmSettings& settings) {
  const auto [base, path] = split_url(settings.endpoint);
  return [settings, base = base, path = path](const nlohmann::json& request) -> std::string {
    httplib::Client cli = make_client(base, settings.timeout_s);
    httplib::Headers headers;
    if (const char* key = std::getenv(settings.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= settings.max_retries; ++attempt) {
      auto res = cli.Post(path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 200) return res->body;
      last_error = "endpoint answered " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) break;
    }
    throw Error(ErrorKind::PlannerUnavailable, last_error);
  };
}

SegmentationFrame SegmenterClient::segment(const std::string& frame_id, int width, int height,
                                           const std::string& rgb_bytes,
                                           const std::string& depth_bytes) const {
  httplib::Client cli(settings_.base_url);
  if (!cli.is_valid()) throw Error(ErrorKind::ProtocolError, "bad segmenter url");
  const auto secs = static_cast<time_t>(settings_.timeout_s);
  cli.set_connection_timeout(secs, 0);
  cli.set_read_timeout(secs, 0);
  const nlohmann::json req{
      {"frame_id", frame_id},
      {"width", width},
      {"height", height},
      {"rgb", httplib::detail::base64_encode(rgb_bytes)},
      {"depth",
       {{"data", httplib::detail::base64_encode(depth_bytes)}, {"unit_scale", settings_.depth_unit_scale}}}};
  const std::string body = req.dump();
  httplib::Result res = cli.Post("/segment", body, "application/json");
  for (int retry = 0; retry < settings_.max_retries && (!res || res->status >= 500); ++retry) {
    res = cli.Post("/segment", body, "application/json");
  }
  if (!res) {
    throw Error(ErrorKind::ProtocolError, "segmenter unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::ProtocolError, "segmenter answered " + std::to_string(res->status));
  }
  return decode_external(res->body, width, height);
}

// ---- server ----------------------------------------------------------------

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const ServiceReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nullptr;
  return nlohmann::json::parse(req.body);
}

std::string sse_frame(const nlohmann::json& msg) {
  return "id: " + std::to_string(msg.at("seq").get<std::size_t>()) + "\nevent: " +
         msg.at("type").get<std::string>() + "\ndata: " + msg.dump() + "\n\n";
}

}  // namespace

HttpServer::HttpServer(ServiceOptions options)
    : service_(std::make_unique<SessionService>(std::move(options))),
      impl_(std::make_unique<Impl>()) {
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& srv = impl_->server;
  SessionService* svc = service_.get();

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type, Last-Event-ID"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                               std::exception_ptr ep) {
    std::string kind = "InvalidInput";
    std::string message = "bad request";
    int status = 400;
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      kind = std::string(to_string(e.kind()));
      message = e.what();
      status = http_status_for(e.kind());
    } catch (const std::exception& e) {
      message = e.what();
    }
    res.status = status;
    res.set_content(nlohmann::json{{"v", kMessageVersion},
                                   {"error", {{"kind", kind}, {"message", message}}}}
                        .dump(),
                    "application/json");
  });

  srv.Post("/sessions", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->create_session(parse_body(req)));
  });
  srv.Post(R"(/sessions/([^/]+)/utterance)",
           [svc](const httplib::Request& req, httplib::Response& res) {
             send(res, svc->utterance(req.matches[1], parse_body(req)));
           });
  srv.Post(R"(/sessions/([^/]+)/skeleton)",
           [svc](const httplib::Request& req, httplib::Response& res) {
             send(res, svc->skeleton(req.matches[1], parse_body(req)));
           });
  srv.Get(R"(/sessions/([^/]+)/state)", [svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc->state(req.matches[1]));
  });
  srv.Post(R"(/scenarios/([^/]+)/replay)",
           [svc](const httplib::Request& req, httplib::Response& res) {
             send(res, svc->replay_scenario(req.matches[1]));
           });

  srv.Get(R"(/sessions/([^/]+)/events)", [svc](const httplib::Request& req,
                                               httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!svc->wait_messages(id, 0, std::chrono::milliseconds(0))) {
      send(res, {404,
                 {{"v", kMessageVersion},
                  {"error", {{"kind", "NotFound"}, {"message", "no session '" + id + "'"}}}}});
      return;
    }
    std::size_t from = 0;
    if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
    if (req.has_header("Last-Event-ID")) from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
    std::optional<std::size_t> limit;
    if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));

    struct Cursor {
      std::size_t next;
      std::size_t sent = 0;
    };
    auto cursor = std::make_shared<Cursor>(Cursor{from});
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [svc, id, limit, cursor](std::size_t, httplib::DataSink& sink) {
          if (limit && cursor->sent >= *limit) {
            sink.done();
            return true;
          }
          auto batch = svc->wait_messages(id, cursor->next, std::chrono::milliseconds(1000));
          if (!batch) {
            sink.done();
            return true;
          }
          if (batch->empty()) {
            if (svc->stopping()) {
              sink.done();
              return true;
            }
            const std::string ping = ": keepalive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          for (const auto& msg : *batch) {
            if (limit && cursor->sent >= *limit) break;
            const std::string frame = sse_frame(msg);
            if (!sink.write(frame.data(), frame.size())) return false;
            ++cursor->next;
            ++cursor->sent;
          }
          return true;
        });
  });
}

int HttpServer::start(const std::string& host, int port) {
  auto& srv = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = srv.bind_to_any_port(host);
  } else if (!srv.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorKind::InvalidInput, "cannot bind " + host);
  thread_ = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return bound;
}

bool HttpServer::run(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

void HttpServer::stop() {
  service_->shutdown();
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace hri
