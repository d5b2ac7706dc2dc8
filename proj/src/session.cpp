#include <atomic>
#include <fstream>

#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/orchestrator.hpp"
#include "hri/text.hpp"

namespace hri {

namespace {

std::atomic<std::uint64_t> g_executed{0};
std::atomic<std::uint64_t> g_refused{0};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json metric_json(const std::optional<Metric>& m) {
  if (!m) return nullptr;
  return {{"kind", m->kind == MetricKind::Angle ? "angle" : "velocity"}, {"value", m->value}};
}

json opt_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json opt_verb(const std::optional<Verb>& v) {
  return v ? json(std::string(to_string(*v))) : json(nullptr);
}

json partial_json(const PartialIntention& p) {
  return {{"a1", opt_verb(p.a1)}, {"t1", opt_int(p.t1)}, {"a2", opt_verb(p.a2)},
          {"t2", opt_int(p.t2)}, {"lambda", metric_json(p.lambda)}};
}

json error_body(const Error& e) {
  return {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
}

}  // namespace

// ---- JSON views ------------------------------------------------------------

json to_json(const Intention& i) {
  return {{"a1", std::string(to_string(i.a1))}, {"t1", opt_int(i.t1)}, {"a2", opt_verb(i.a2)},
          {"t2", opt_int(i.t2)}, {"lambda", metric_json(i.lambda)},
          {"tuple", i.to_tuple_string()}};
}

json to_json(const TargetSelection& s) {
  json d = json::array();
  for (const auto& [index, dist] : s.distances) d.push_back({index, dist});
  return {{"index", s.index}, {"distance", s.distance}, {"distances", d}};
}

json to_json(const ActionSequence& seq) {
  json steps = json::array();
  for (const auto& st : seq.steps) {
    steps.push_back({{"action", action_name(st.action)},
                     {"start", vec3_to_json(st.start)},
                     {"end", vec3_to_json(st.end)}});
  }
  return {{"steps", steps}, {"text", serialize_plan(seq)}};
}

json to_json(const VerbalUtterance& u) {
  json j{{"kind", "utterance"}, {"t", u.timestamp}, {"text", u.text}};
  if (u.speaker) j["speaker"] = *u.speaker;
  return j;
}

json to_json(const SkeletonFrame& s) {
  json joints = json::object();
  for (const auto& [name, p] : s.joints) joints[name] = vec3_to_json(p);
  return {{"kind", "skeleton"}, {"t", s.timestamp}, {"joints", joints}};
}

std::variant<VerbalUtterance, SkeletonFrame> event_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const double t = j.at("t").get<double>();
    if (kind == "utterance") {
      VerbalUtterance u;
      u.text = j.at("text").get<std::string>();
      u.timestamp = t;
      if (j.contains("speaker")) u.speaker = j.at("speaker").get<std::string>();
      return u;
    }
    if (kind == "skeleton") {
      SkeletonFrame s;
      s.timestamp = t;
      for (const auto& [name, p] : j.at("joints").items()) s.joints[name] = vec3_from_json(p);
      return s;
    }
    throw Error(ErrorKind::InvalidInput, "unknown event kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("event: ") + e.what());
  }
}

// ---- executor --------------------------------------------------------------

GateCounters gate_counters() { return {g_executed.load(), g_refused.load()}; }

Scene execute(const CheckedSequence& checked, const Scene& scene, const Vec3& home) {
  if (checked.scene_fingerprint() != scene_fingerprint(scene)) {
    ++g_refused;
    throw Error(ErrorKind::SafetyGateViolation,
                "sequence was checked against a different scene");
  }
  Scene s = scene;
  std::optional<Vec3> offset;
  if (s.held) {
    const auto* obj = s.find(*s.held);
    if (!obj) throw Error(ErrorKind::InvalidInput, "held object missing from scene");
    offset = obj->centroid - s.effector.position;
  }
  auto need_held = [&](const char* what, std::size_t k) {
    if (!s.held) {
      throw Error(ErrorKind::InvalidSequence,
                  std::string(what) + " at step " + std::to_string(k) + " with nothing held");
    }
  };

  const auto& steps = checked.sequence().steps;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto& step = steps[k];
    if (const auto* m = std::get_if<MoveTo>(&step.action)) {
      s.effector.position = m->position;
    } else if (std::holds_alternative<Home>(step.action)) {
      s.effector.position = home;
    } else if (const auto* p = std::get_if<Pick>(&step.action)) {
      if (s.held) {
        throw Error(ErrorKind::InvalidSequence,
                    "PICK at step " + std::to_string(k) + " while already holding");
      }
      const auto* obj = s.find(p->object);
      if (!obj) throw Error(ErrorKind::UnknownTarget, "object " + std::to_string(p->object));
      s.held = p->object;
      offset = obj->centroid - s.effector.position;
    } else if (const auto* pl = std::get_if<Place>(&step.action)) {
      need_held("PLACE", k);
      if (const auto* pose = std::get_if<Vec3>(&pl->target)) s.effector.position = *pose;
    } else if (std::holds_alternative<Drop>(step.action)) {
      need_held("DROP", k);
    } else if (const auto* pour = std::get_if<Pour>(&step.action)) {
      need_held("POUR", k);
      s.pour_angles_deg[*s.held] = pour->angle_deg;
    } else if (const auto* g = std::get_if<OpenGripper>(&step.action)) {
      s.effector.gripper_opening = g->width;
    } else if (const auto* g = std::get_if<CloseGripper>(&step.action)) {
      s.effector.gripper_opening = g->width;
    }

    if (s.held) s.find(*s.held)->centroid = s.effector.position + *offset;

    const bool detach = std::holds_alternative<Place>(step.action) ||
                        std::holds_alternative<Drop>(step.action) ||
                        std::holds_alternative<OpenGripper>(step.action);
    if (detach) {
      s.held.reset();
      offset.reset();
    }
  }
  ++g_executed;
  return s;
}

// ---- session ---------------------------------------------------------------

Session::Session(std::string id, Scene scene, std::unique_ptr<Planner> planner,
                 OrchestratorConfig config, PhraseTable phrases)
    : id_(std::move(id)),
      scene_(std::move(scene)),
      planner_(std::move(planner)),
      config_(std::move(config)),
      phrases_(std::move(phrases)) {
  if (!planner_) throw Error(ErrorKind::InvalidArgument, "session needs a planner");
  scene_.validate();
}

void Session::check_order(double t) {
  if (last_t_ && t < *last_t_) {
    throw Error(ErrorKind::StaleEvent, "event at t=" + shortest(t) +
                                           " arrived after t=" + shortest(*last_t_));
  }
  last_t_ = t;
}

void Session::record(json entry) {
  if (persist_dir_) {
    std::ofstream out(*persist_dir_ / "events.jsonl", std::ios::app);
    out << entry.dump() << '\n';
  }
  log_.push_back(std::move(entry));
}

void Session::emit(std::vector<json>& out, double t, const std::string& type, json body) {
  json msg{{"v", kMessageVersion}, {"seq", messages_.size()}, {"session", id_},
           {"t", t},               {"type", type}};
  if (!body.is_null()) msg["data"] = std::move(body);
  messages_.push_back(msg);
  record({{"entry", "output"}, {"message", msg}});
  out.push_back(std::move(msg));
}

void Session::snapshot(const std::string& name) const {
  if (persist_dir_) write_json_file(*persist_dir_ / (name + ".json"), to_json(scene_));
}

void Session::persist_to(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  persist_dir_ = dir;
  std::ofstream out(dir / "events.jsonl", std::ios::trunc);
  for (const auto& e : log_) out << e.dump() << '\n';
  write_json_file(dir / "scene_initial.json", to_json(scene_));
}

std::vector<json> Session::ingest(const VerbalUtterance& utterance) {
  check_order(utterance.timestamp);
  json entry = to_json(utterance);
  entry["entry"] = "input";
  record(std::move(entry));
  return handle_utterance(utterance);
}

std::vector<json> Session::ingest(const SkeletonFrame& skeleton) {
  check_order(skeleton.timestamp);
  json entry = to_json(skeleton);
  entry["entry"] = "input";
  record(std::move(entry));
  return handle_skeleton(skeleton);
}

std::vector<json> Session::handle_skeleton(const SkeletonFrame& s) {
  std::vector<json> out;
  const auto t0 = Clock::now();
  try {
    const TargetSelection sel = select_target(forearm_ray(s), scene_, config_.selection);
    state_ = hri::advance(state_, sel);
    emit(out, s.timestamp, "selection", to_json(sel));
  } catch (const Error& e) {
    emit(out, s.timestamp, "error", error_body(e));
  }
  timings_.select_ms += ms_since(t0);
  return out;
}

std::vector<json> Session::handle_utterance(const VerbalUtterance& u) {
  std::vector<json> out;
  const double t = u.timestamp;
  const auto t0 = Clock::now();
  Command cmd;
  try {
    cmd = phrases_.parse(u);
  } catch (const Error& e) {
    timings_.parse_ms += ms_since(t0);
    emit(out, t, "error", error_body(e));
    return out;
  }
  emit(out, t, "command", {{"command", describe(cmd)}, {"text", u.text}});
  try {
    state_ = hri::advance(state_, cmd);
  } catch (const Error& e) {
    timings_.parse_ms += ms_since(t0);
    emit(out, t, "error", error_body(e));
    return out;
  }
  timings_.parse_ms += ms_since(t0);

  if (std::holds_alternative<ApprovalCommand>(cmd) && state_.live) {
    emit(out, t, "latched", {{"index", state_.live->index}});
  }
  emit(out, t, "phase",
       {{"phase", std::string(phase_name(state_.phase))}, {"partial", partial_json(state_.partial)}});

  if (state_.complete()) {
    const Intention intention = fuse(state_);
    emit(out, t, "intention", to_json(intention));
    run_intention(intention, t, out);
    SessionState fresh;
    fresh.live = state_.live;
    state_ = fresh;
    emit(out, t, "phase",
         {{"phase", std::string(phase_name(state_.phase))}, {"partial", partial_json(state_.partial)}});
  }
  return out;
}

void Session::run_intention(const Intention& intention, double t, std::vector<json>& out) {
  auto report_attempts = [&](const std::vector<AttemptRecord>& history) {
    for (const auto& a : history) {
      json body{{"attempt", a.attempt}, {"plan", a.plan_text}};
      if (a.result) {
        body["check"] = check_report(*a.result, a.attempt);
      } else {
        body["rejected"] = a.rejection;
      }
      emit(out, t, "attempt", std::move(body));
    }
    total_attempts_ += static_cast<int>(history.size());
  };

  const auto t0 = Clock::now();
  std::optional<FeedbackOutcome> outcome;
  try {
    outcome.emplace(plan_with_feedback(*planner_, intention, scene_, config_.max_retries,
                                       config_.planner));
  } catch (const PlanningFailedError& e) {
    timings_.plan_ms += ms_since(t0);
    report_attempts(e.history());
    const int n = static_cast<int>(e.history().size());
    if (e.last_result()) {
      last_check_ = check_report(*e.last_result(), n);
    } else {
      last_check_ = json{{"verdict", "rejected"}, {"attempts", n}};
    }
    emit(out, t, "error", error_body(e));
    return;
  } catch (const Error& e) {
    timings_.plan_ms += ms_since(t0);
    emit(out, t, "error", error_body(e));
    return;
  }
  timings_.plan_ms += ms_since(t0);
  report_attempts(outcome->history);

  const ActionSequence& seq = outcome->checked.sequence();
  last_check_ = check_report(CheckResult::Clear(), outcome->attempts);
  last_trajectory_ = trajectory_dump(seq, scene_, config_.planner);
  emit(out, t, "check",
       {{"report", *last_check_}, {"trajectory", *last_trajectory_}, {"plan", to_json(seq)}});

  const auto t1 = Clock::now();
  const std::size_t n = executions_.size();
  snapshot("before_" + std::to_string(n));
  try {
    scene_ = execute(outcome->checked, scene_, config_.planner.home_position);
  } catch (const Error& e) {
    timings_.execute_ms += ms_since(t1);
    emit(out, t, "error", error_body(e));
    return;
  }
  snapshot("after_" + std::to_string(n));
  timings_.execute_ms += ms_since(t1);
  executions_.push_back({intention, outcome->attempts, seq});
  emit(out, t, "executed", {{"intention", intention.to_tuple_string()},
                            {"attempts", outcome->attempts},
                            {"scene", to_json(scene_)}});
}

json Session::state_json() const {
  json intentions = json::array();
  for (const auto& e : executions_) {
    intentions.push_back({{"intention", e.intention.to_tuple_string()}, {"attempts", e.attempts}});
  }
  return {{"v", kMessageVersion},
          {"id", id_},
          {"phase", std::string(phase_name(state_.phase))},
          {"partial", partial_json(state_.partial)},
          {"live", state_.live ? to_json(*state_.live) : json(nullptr)},
          {"scene", to_json(scene_)},
          {"last_check", last_check_ ? *last_check_ : json(nullptr)},
          {"last_trajectory", last_trajectory_ ? *last_trajectory_ : json(nullptr)},
          {"executions", intentions},
          {"attempts_total", total_attempts_},
          {"messages", messages_.size()},
          {"planner", planner_->name()}};
}

void replay_log(Session& session, const std::vector<json>& log) {
  for (const auto& entry : log) {
    if (entry.value("entry", "") != "input") continue;
    std::visit([&](const auto& ev) { session.ingest(ev); }, event_from_json(entry));
  }
}

std::vector<json> read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidInput, std::string("log line: ") + e.what());
    }
  }
  return out;
}

}  // namespace hri
