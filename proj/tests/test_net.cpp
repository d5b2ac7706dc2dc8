#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/net.hpp"

// After the Eigen-based headers: resolv.h, pulled in by httplib, defines a
// `_res` macro that collides with Eigen identifiers.
#include <httplib.h>

using namespace hri;
using nlohmann::json;

#ifndef HRI_SOURCE_DIR
#error "HRI_SOURCE_DIR must be defined"
#endif

namespace {

WorldSpec demo_world() {
  return load_scenario(std::string(HRI_SOURCE_DIR) + "/data/scenarios/pick-place-over-obstacle.json").world;
}

/// Runs an httplib server on a free port for the lifetime of the object.
struct FakeServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

std::vector<json> parse_sse(const std::string& body) {
  std::vector<json> out;
  std::size_t pos = 0;
  while ((pos = body.find("data: ", pos)) != std::string::npos) {
    const auto end = body.find('\n', pos);
    out.push_back(json::parse(body.substr(pos + 6, end - pos - 6)));
    pos = end;
  }
  return out;
}

}  // namespace

TEST_CASE("split_url") {
  CHECK(split_url("http://h:1/v1/chat") == std::pair<std::string, std::string>{"http://h:1", "/v1/chat"});
  CHECK(split_url("https://h") == std::pair<std::string, std::string>{"https://h", "/"});
}

TEST_CASE("http_status_for") {
  CHECK(http_status_for(ErrorKind::NotFound) == 404);
  CHECK(http_status_for(ErrorKind::StaleEvent) == 409);
  CHECK(http_status_for(ErrorKind::InvalidInput) == 400);
  CHECK(http_status_for(ErrorKind::PlannerUnavailable) == 503);
  CHECK(http_status_for(ErrorKind::IncompleteIntention) == 422);
}

TEST_CASE("chat transport: retries transient failures and sends the key") {
  FakeServer fake;
  std::atomic<int> calls{0};
  std::string auth;
  json seen;
  fake.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 503;
      return;
    }
    auth = req.get_header_value("Authorization");
    seen = json::parse(req.body);
    res.set_content(chat_completion_response("HOME"), "application/json");
  });
  fake.start();

  ::setenv("HRI_TEST_KEY", "secret", 1);
  LlmSettings s;
  s.endpoint = fake.url("/v1/chat/completions");
  s.api_key_env = "HRI_TEST_KEY";
  s.max_retries = 2;
  s.timeout_s = 5;
  ChatTransport t = make_http_chat_transport(s);
  LlmPlanner planner(t, "m");
  Scene scene;
  const ActionSequence seq = planner.plan({Verb::Home, {}, {}, {}, {}}, scene, std::nullopt);
  CHECK(std::holds_alternative<Home>(seq.steps.at(0).action));
  CHECK(calls == 2);
  CHECK(auth == "Bearer secret");
  CHECK(seen["model"] == "m");
  CHECK(seen["temperature"] == 0);
}

TEST_CASE("chat transport: client errors are final, dead endpoints are unavailable") {
  FakeServer fake;
  std::atomic<int> calls{0};
  fake.server.Post("/c", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  fake.start();
  LlmSettings s;
  s.endpoint = fake.url("/c");
  s.timeout_s = 2;
  try {
    make_http_chat_transport(s)(json{{"model", "m"}});
    FAIL("expected PlannerUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PlannerUnavailable);
  }
  CHECK(calls == 1);

  s.endpoint = "http://127.0.0.1:1/none";
  s.max_retries = 0;
  CHECK_THROWS_AS(make_http_chat_transport(s)(json{{"model", "m"}}), Error);
}

TEST_CASE("segmenter client round trip") {
  FakeServer fake;
  json request;
  std::atomic<int> calls{0};
  fake.server.Post("/segment", [&](const httplib::Request& req, httplib::Response& res) {
    if (++calls == 1) {
      res.status = 502;
      return;
    }
    request = json::parse(req.body);
    res.set_content(json{{"frame_id", request["frame_id"]},
                         {"masks", {{{"rle", {0, 3, 3}}, {"label", "cup"}}}}}
                        .dump(),
                    "application/json");
  });
  fake.start();
  SegmenterClient client({fake.url(""), 5.0, 1, 0.001});
  const SegmentationFrame f = client.segment("f7", 2, 3, std::string("\x01\x02\x03", 3), "");
  CHECK(request["frame_id"] == "f7");
  CHECK(request["width"] == 2);
  CHECK(request["rgb"] == "AQID");
  CHECK(request["depth"]["unit_scale"] == 0.001);
  CHECK(calls == 2);
  REQUIRE(f.masks.size() == 1);
  CHECK(f.masks[0].count() == 3);
}

TEST_CASE("HTTP API: session flow and event stream") {
  ServiceOptions opts;
  opts.default_world = demo_world();
  opts.scenario_dir = std::string(HRI_SOURCE_DIR) + "/data/scenarios";
  HttpServer server(opts);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(10, 0);

  auto res = cli.Post("/sessions", "{}", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const json created = json::parse(res->body);
  const std::string id = created["id"];
  CHECK(id == "s1");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto& objects = created["state"]["scene"]["objects"];
  Vec3 cup = Vec3::Zero();
  for (const auto& o : objects) {
    if (o["index"] == 0) cup = vec3_from_json(o["centroid"]);
  }

  auto post = [&](const std::string& path, const json& body) {
    auto r = cli.Post(("/sessions/" + id + path).c_str(), body.dump(), "application/json");
    REQUIRE(r);
    return std::make_pair(r->status, json::parse(r->body));
  };

  CHECK(post("/utterance", {{"text", "pick up this"}, {"t", 0.0}}).first == 200);
  const SkeletonFrame sk = pointing_skeleton(cup, 0.5);
  const auto [st, body] = post("/skeleton", {{"joints", to_json(sk)["joints"]}, {"t", 0.5}});
  CHECK(st == 200);
  CHECK(body["messages"][0]["type"] == "selection");
  CHECK(body["messages"][0]["data"]["index"] == 0);
  post("/utterance", {{"text", "this one"}, {"t", 1.0}});
  const auto fin = post("/utterance", {{"text", "finish"}, {"t", 2.0}});
  CHECK(fin.second["state"]["executions"].size() == 1);

  // Stale event -> 409, unknown session -> 404, bad body -> 400.
  CHECK(post("/utterance", {{"text", "yes"}, {"t", 0.1}}).first == 409);
  auto missing = cli.Get("/sessions/nope/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["error"]["kind"] == "NotFound");
  auto bad = cli.Post(("/sessions/" + id + "/utterance").c_str(), "{oops", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);

  auto state = cli.Get(("/sessions/" + id + "/state").c_str());
  REQUIRE(state);
  const json sj = json::parse(state->body);
  CHECK(sj["phase"] == "Idle");
  const std::size_t total = sj["messages"];

  auto events = cli.Get(("/sessions/" + id + "/events?from=0&limit=" + std::to_string(total)).c_str());
  REQUIRE(events);
  CHECK(events->get_header_value("Content-Type").rfind("text/event-stream", 0) == 0);
  const auto msgs = parse_sse(events->body);
  REQUIRE(msgs.size() == total);
  for (std::size_t i = 0; i < msgs.size(); ++i) CHECK(msgs[i]["seq"] == i);
  CHECK(events->body.find("event: selection") != std::string::npos);

  httplib::Headers resume{{"Last-Event-ID", std::to_string(total - 2)}};
  auto tail = cli.Get(("/sessions/" + id + "/events?limit=1").c_str(), resume);
  REQUIRE(tail);
  const auto one = parse_sse(tail->body);
  REQUIRE(one.size() == 1);
  CHECK(one[0]["seq"] == total - 1);

  auto replay = cli.Post("/scenarios/pick-pour-90/replay", "", "application/json");
  REQUIRE(replay);
  CHECK(replay->status == 200);
  CHECK(json::parse(replay->body)["outcome"] == "pass");
  auto traversal = cli.Post("/scenarios/..%2Fetc/replay", "", "application/json");
  REQUIRE(traversal);
  CHECK(traversal->status >= 400);
  auto unknown = cli.Post("/scenarios/nope/replay", "", "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);

  server.stop();
}

TEST_CASE("HTTP API: a live stream receives messages posted after it opened") {
  ServiceOptions opts;
  opts.default_world = demo_world();
  HttpServer server(opts);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);
  const std::string id = json::parse(cli.Post("/sessions", "{}", "application/json")->body)["id"];

  std::string streamed;
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(10, 0);
    auto r = c.Get(("/sessions/" + id + "/events?limit=1").c_str());
    if (r) streamed = r->body;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  cli.Post(("/sessions/" + id + "/utterance").c_str(), json{{"text", "throw it"}, {"t", 0.0}}.dump(),
           "application/json");
  reader.join();
  const auto msgs = parse_sse(streamed);
  REQUIRE(msgs.size() == 1);
  CHECK(msgs[0]["type"] == "command");
  server.stop();
}
