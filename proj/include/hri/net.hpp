#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hri/orchestrator.hpp"
#include "hri/segmentation.hpp"

namespace hri {

// ---- outbound clients ------------------------------------------------------

/// Chat-completion transport over HTTP(S). Retries connection failures, 429
/// and 5xx up to settings.max_retries times; anything else is final.
ChatTransport make_http_chat_transport(const LlmSettings& settings);

/// Split "http://host:port/path" into ("http://host:port", "/path").
std::pair<std::string, std::string> split_url(const std::string& url);

struct SegmenterSettings {
  std::string base_url = "http://127.0.0.1:8500";
  double timeout_s = 10.0;
  /// Extra attempts after a connection failure or a 5xx answer.
  int max_retries = 1;
  /// Meters per unit of the raw depth samples sent along with the image.
  double depth_unit_scale = 0.001;
};

/// Client for an external instance segmenter: POST {base}/segment with
/// {frame_id, width, height, rgb, depth:{data, unit_scale}} (base64 payloads), answer decoded
/// with decode_external.
class SegmenterClient {
 public:
  explicit SegmenterClient(SegmenterSettings settings) : settings_(std::move(settings)) {}

  SegmentationFrame segment(const std::string& frame_id, int width, int height,
                            const std::string& rgb_bytes, const std::string& depth_bytes) const;

 private:
  SegmenterSettings settings_;
};

// ---- session service -------------------------------------------------------

struct ServiceOptions {
  OrchestratorConfig config;
  /// World used by POST /sessions when the body carries none.
  std::optional<WorldSpec> default_world;
  std::filesystem::path scenario_dir = "data/scenarios";
  TransportFactory transport;
};

struct ServiceReply {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent request handling behind the HTTP routes.
/// Thread-safe: sessions are locked one at a time.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);

  ServiceReply create_session(const nlohmann::json& body);
  ServiceReply utterance(const std::string& id, const nlohmann::json& body);
  ServiceReply skeleton(const std::string& id, const nlohmann::json& body);
  ServiceReply state(const std::string& id);
  ServiceReply replay_scenario(const std::string& name);

  /// Messages with seq >= from, waiting up to `wait` for at least one.
  /// Returns nullopt for an unknown session.
  std::optional<std::vector<nlohmann::json>> wait_messages(const std::string& id,
                                                           std::size_t from,
                                                           std::chrono::milliseconds wait);

  /// Wakes every waiter; later waits return immediately.
  void shutdown();
  bool stopping() const { return stopping_; }

 private:
  struct Slot {
    std::mutex mutex;
    std::condition_variable changed;
    std::unique_ptr<Session> session;
  };

  std::shared_ptr<Slot> find(const std::string& id);
  template <class Fn>
  ServiceReply with_session(const std::string& id, Fn&& fn);

  ServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_id_ = 1;
  std::atomic<bool> stopping_{false};
};

/// HTTP front end:
///   POST /sessions, POST /sessions/{id}/utterance, POST /sessions/{id}/skeleton,
///   GET /sessions/{id}/state, GET /sessions/{id}/events (text/event-stream,
///   ?from=N&limit=M), POST /scenarios/{name}/replay
class HttpServer {
 public:
  explicit HttpServer(ServiceOptions options);
  ~HttpServer();

  /// Binds and serves on a background thread. Port 0 picks a free port.
  int start(const std::string& host, int port);
  /// Binds and serves on the calling thread until stop().
  bool run(const std::string& host, int port);
  void stop();

  SessionService& service() { return *service_; }

 private:
  void install_routes();

  std::unique_ptr<SessionService> service_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

/// HTTP status used for an error kind.
int http_status_for(ErrorKind kind);

}  // namespace hri
