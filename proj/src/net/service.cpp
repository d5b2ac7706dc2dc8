#include <regex>

#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/net.hpp"

namespace hri {

int http_status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::StaleEvent:
      return 409;
    case ErrorKind::InvalidInput:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ProtocolError:
      return 400;
    case ErrorKind::PlannerUnavailable:
      return 503;
    default:
      return 422;
  }
}

namespace {

ServiceReply error_reply(const Error& e) {
  return {http_status_for(e.kind()),
          {{"v", kMessageVersion},
           {"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}}};
}

ServiceReply bad_request(const std::string& message) {
  return error_reply(Error(ErrorKind::InvalidInput, message));
}

}  // namespace

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {}

std::shared_ptr<SessionService::Slot> SessionService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

template <class Fn>
ServiceReply SessionService::with_session(const std::string& id, Fn&& fn) {
  auto slot = find(id);
  if (!slot) return error_reply(Error(ErrorKind::NotFound, "no session '" + id + "'"));
  ServiceReply reply;
  {
    std::lock_guard lock(slot->mutex);
    try {
      reply = fn(*slot->session);
    } catch (const Error& e) {
      reply = error_reply(e);
    } catch (const nlohmann::json::exception& e) {
      reply = bad_request(e.what());
    }
  }
  slot->changed.notify_all();
  return reply;
}

ServiceReply SessionService::create_session(const nlohmann::json& body) {
  try {
    if (!body.is_object() && !body.is_null()) return bad_request("body must be an object");
    OrchestratorConfig config = options_.config;
    std::vector<std::string> canned;
    if (body.is_object()) {
      config.planner_backend = body.value("planner", config.planner_backend);
      if (body.contains("canned_responses")) {
        canned = body.at("canned_responses").get<std::vector<std::string>>();
      }
    }

    Scene scene;
    if (body.is_object() && body.contains("scene")) {
      scene = scene_from_json(body.at("scene"));
    } else {
      std::optional<WorldSpec> world = options_.default_world;
      if (body.is_object() && body.contains("world")) world = world_from_json(body.at("world"));
      if (!world) return bad_request("no world or scene given and no default world configured");
      config.camera = world->camera;
      config.camera_pose = world->camera_pose;
      scene = perceive_scene(*world, config).scene;
    }

    PhraseTable phrases =
        config.phrase_table ? PhraseTable::load(*config.phrase_table) : PhraseTable::defaults();
    auto planner = make_planner(config, canned, options_.transport);

    std::string id;
    {
      std::lock_guard lock(mutex_);
      id = "s" + std::to_string(next_id_++);
    }
    auto slot = std::make_shared<Slot>();
    slot->session =
        std::make_unique<Session>(id, std::move(scene), std::move(planner), config, std::move(phrases));
    if (config.persist_root) slot->session->persist_to(*config.persist_root / id);
    nlohmann::json state = slot->session->state_json();
    {
      std::lock_guard lock(mutex_);
      sessions_[id] = std::move(slot);
    }
    return {201, {{"v", kMessageVersion}, {"id", id}, {"state", state}}};
  } catch (const Error& e) {
    return error_reply(e);
  } catch (const nlohmann::json::exception& e) {
    return bad_request(e.what());
  }
}

ServiceReply SessionService::utterance(const std::string& id, const nlohmann::json& body) {
  return with_session(id, [&](Session& s) -> ServiceReply {
    VerbalUtterance u;
    u.text = body.at("text").get<std::string>();
    u.timestamp = body.at("t").get<double>();
    auto messages = s.ingest(u);
    return {200, {{"v", kMessageVersion}, {"messages", messages}, {"state", s.state_json()}}};
  });
}

ServiceReply SessionService::skeleton(const std::string& id, const nlohmann::json& body) {
  return with_session(id, [&](Session& s) -> ServiceReply {
    nlohmann::json event = body;
    event["kind"] = "skeleton";
    const auto parsed = event_from_json(event);
    auto messages = s.ingest(std::get<SkeletonFrame>(parsed));
    return {200, {{"v", kMessageVersion}, {"messages", messages}, {"state", s.state_json()}}};
  });
}

ServiceReply SessionService::state(const std::string& id) {
  return with_session(id, [](Session& s) -> ServiceReply { return {200, s.state_json()}; });
}

ServiceReply SessionService::replay_scenario(const std::string& name) {
  static const std::regex kName("[A-Za-z0-9_-]+");
  if (!std::regex_match(name, kName)) return bad_request("bad scenario name");
  const auto path = options_.scenario_dir / (name + ".json");
  if (!std::filesystem::exists(path)) {
    return error_reply(Error(ErrorKind::NotFound, "no scenario '" + name + "'"));
  }
  try {
    const ReplayReport report = replay(load_scenario(path), options_.transport);
    return {200, report.full()};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

std::optional<std::vector<nlohmann::json>> SessionService::wait_messages(
    const std::string& id, std::size_t from, std::chrono::milliseconds wait) {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::unique_lock lock(slot->mutex);
  slot->changed.wait_for(lock, wait, [&] {
    return stopping_ || slot->session->messages().size() > from;
  });
  const auto& all = slot->session->messages();
  std::vector<nlohmann::json> out;
  for (std::size_t i = from; i < all.size(); ++i) out.push_back(all[i]);
  return out;
}

void SessionService::shutdown() {
  stopping_ = true;
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, slot] : sessions_) slots.push_back(slot);
  }
  for (auto& slot : slots) {
    // Take the lock so a waiter between its predicate check and its sleep
    // cannot miss the wake-up.
    { std::lock_guard lock(slot->mutex); }
    slot->changed.notify_all();
  }
}

}  // namespace hri
