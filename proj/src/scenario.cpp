#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/orchestrator.hpp"

namespace hri {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

AxisConvention axes_from_name(const std::string& name) {
  if (name == "literal") return AxisConvention::literal();
  if (name == "z_up") return AxisConvention::z_up();
  throw Error(ErrorKind::InvalidInput, "unknown axis convention '" + name + "'");
}

std::string axes_name(const AxisConvention& a) {
  const auto z = AxisConvention::z_up();
  return a.height_axis == z.height_axis && a.thickness_axis == z.thickness_axis ? "z_up"
                                                                                  : "literal";
}

}  // namespace

OrchestratorConfig config_from_json(const json& j) {
  OrchestratorConfig c;
  try {
    if (j.contains("camera")) c.camera = intrinsics_from_json(j.at("camera"));
    if (j.contains("camera_pose")) c.camera_pose = transform_from_json(j.at("camera_pose"));
    c.gripper_max_width = j.value("gripper_max_width", c.gripper_max_width);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.planner_backend = j.value("planner_backend", c.planner_backend);

    auto& p = c.planner;
    p.clearance = j.value("clearance", p.clearance);
    p.default_travel_height = j.value("travel_height", p.default_travel_height);
    p.place_gap = j.value("place_gap", p.place_gap);
    if (j.contains("home")) p.home_position = vec3_from_json(j.at("home"));
    if (j.contains("handover")) p.handover_position = vec3_from_json(j.at("handover"));
    if (j.contains("gripper_half_extents")) {
      p.gripper_half_extents = vec3_from_json(j.at("gripper_half_extents"));
    }
    if (j.contains("axes")) p.axes = axes_from_name(j.at("axes").get<std::string>());
    c.perception.axes = p.axes;
    c.perception.min_mask_pixels = j.value("min_mask_pixels", c.perception.min_mask_pixels);
    c.selection.forward_only = j.value("forward_only", c.selection.forward_only);

    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      c.llm.endpoint = l.value("endpoint", c.llm.endpoint);
      c.llm.model = l.value("model", c.llm.model);
      c.llm.timeout_s = l.value("timeout_s", c.llm.timeout_s);
      c.llm.max_retries = l.value("max_retries", c.llm.max_retries);
      c.llm.api_key_env = l.value("api_key_env", c.llm.api_key_env);
    }
    if (j.contains("phrase_table")) c.phrase_table = j.at("phrase_table").get<std::string>();
    if (j.contains("prompt_dir")) c.prompt_dir = j.at("prompt_dir").get<std::string>();
    if (j.contains("persist_root")) c.persist_root = j.at("persist_root").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("config: ") + e.what());
  }
  if (c.max_retries < 0) throw Error(ErrorKind::InvalidInput, "config: max_retries < 0");
  if (!(c.gripper_max_width > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "config: gripper_max_width must be positive");
  }
  return c;
}

json to_json(const OrchestratorConfig& c) {
  json j{{"camera", to_json(c.camera)},
         {"camera_pose", to_json(c.camera_pose)},
         {"gripper_max_width", c.gripper_max_width},
         {"max_retries", c.max_retries},
         {"planner_backend", c.planner_backend},
         {"clearance", c.planner.clearance},
         {"travel_height", c.planner.default_travel_height},
         {"place_gap", c.planner.place_gap},
         {"home", vec3_to_json(c.planner.home_position)},
         {"handover", vec3_to_json(c.planner.handover_position)},
         {"gripper_half_extents", vec3_to_json(c.planner.gripper_half_extents)},
         {"axes", axes_name(c.planner.axes)},
         {"min_mask_pixels", c.perception.min_mask_pixels},
         {"forward_only", c.selection.forward_only},
         {"llm",
          {{"endpoint", c.llm.endpoint},
           {"model", c.llm.model},
           {"timeout_s", c.llm.timeout_s},
           {"max_retries", c.llm.max_retries},
           {"api_key_env", c.llm.api_key_env}}}};
  if (c.phrase_table) j["phrase_table"] = c.phrase_table->string();
  if (c.prompt_dir) j["prompt_dir"] = c.prompt_dir->string();
  if (c.persist_root) j["persist_root"] = c.persist_root->string();
  return j;
}

std::unique_ptr<Planner> make_planner(const OrchestratorConfig& config,
                                      const std::vector<std::string>& canned,
                                      const TransportFactory& transport) {
  const PromptTemplates templates =
      config.prompt_dir ? PromptTemplates::load(*config.prompt_dir) : PromptTemplates::builtin();
  if (config.planner_backend == "deterministic") {
    return std::make_unique<DeterministicPlanner>(config.planner);
  }
  if (config.planner_backend == "canned") {
    return std::make_unique<LlmPlanner>(CannedChatTransport(canned), "canned", config.planner,
                                        templates);
  }
  if (config.planner_backend == "llm") {
    if (!transport) {
      throw Error(ErrorKind::PlannerUnavailable, "no chat transport configured for the llm backend");
    }
    return std::make_unique<LlmPlanner>(transport(config.llm), config.llm.model, config.planner,
                                        templates);
  }
  throw Error(ErrorKind::InvalidInput, "unknown planner backend '" + config.planner_backend + "'");
}

PerceivedScene perceive_scene(const WorldSpec& world, const OrchestratorConfig& config) {
  const auto perceived = perceive_world(world, config.perception);
  std::vector<StructuralObject> objects;
  PerceivedScene out;
  for (const auto& p : perceived) {
    objects.push_back(p.object);
    if (p.box_id) {
      out.box_of_index[p.object.index] = *p.box_id;
      out.index_of_box[*p.box_id] = p.object.index;
    }
  }
  EndEffectorState effector;
  effector.position = config.planner.home_position;
  effector.gripper_opening = config.gripper_max_width;
  out.scene = build_scene(objects, effector, config.gripper_max_width);
  return out;
}

SkeletonFrame pointing_skeleton(const Vec3& target, double t) {
  SkeletonFrame s;
  s.timestamp = t;
  const Vec3 dir = (target - kOperatorElbow).normalized();
  s.joints["right_shoulder"] = kOperatorElbow + Vec3(0.0, 0.0, 0.3);
  s.joints["right_elbow"] = kOperatorElbow;
  s.joints["right_wrist"] = kOperatorElbow + 0.3 * dir;
  return s;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    s.name = j.at("name").get<std::string>();
    s.world = world_from_json(j.at("world"));
    if (j.contains("config")) s.config = j.at("config");
    s.planner = j.value("planner", s.planner);
    if (j.contains("canned_responses")) {
      s.canned_responses = j.at("canned_responses").get<std::vector<std::string>>();
    }
    double last_t = -std::numeric_limits<double>::infinity();
    for (const auto& e : j.value("events", json::array())) {
      const double t = e.at("t").get<double>();
      if (t < last_t) throw Error(ErrorKind::InvalidInput, "scenario events out of time order");
      last_t = t;
      s.events.push_back(e);
    }
    for (const auto& a : j.value("expected", json::array())) {
      RegionAssertion r;
      r.box_id = a.at("box_id").get<int>();
      r.min = vec3_from_json(a.at("region").at("min"));
      r.max = vec3_from_json(a.at("region").at("max"));
      if (a.contains("pour_angle_deg")) r.pour_angle_deg = a.at("pour_angle_deg").get<double>();
      s.expected.push_back(r);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("scenario: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(read_json_file(path));
}

json ReplayReport::full() const {
  json j = canonical;
  j["timings"] = timings;
  return j;
}

ReplayReport replay(const Scenario& scenario, const TransportFactory& transport,
                    const std::optional<std::filesystem::path>& persist_dir) {
  const auto t_start = Clock::now();
  OrchestratorConfig config = config_from_json(scenario.config);
  config.camera = scenario.world.camera;
  config.camera_pose = scenario.world.camera_pose;
  config.planner_backend = scenario.planner;

  const auto t_perceive = Clock::now();
  PerceivedScene perceived = perceive_scene(scenario.world, config);
  const double perception_ms = ms_since(t_perceive);

  PhraseTable phrases =
      config.phrase_table ? PhraseTable::load(*config.phrase_table) : PhraseTable::defaults();
  Session session(scenario.name, perceived.scene,
                  make_planner(config, scenario.canned_responses, transport), config,
                  std::move(phrases));
  if (persist_dir) session.persist_to(*persist_dir);

  json errors = json::array();
  for (const auto& e : scenario.events) {
    try {
      if (e.value("kind", "") == "point_at") {
        const int box = e.at("box_id").get<int>();
        const auto it = perceived.index_of_box.find(box);
        if (it == perceived.index_of_box.end()) {
          throw Error(ErrorKind::NotFound, "box " + std::to_string(box) + " was not perceived");
        }
        const Vec3 target = perceived.scene.find(it->second)->centroid;
        session.ingest(pointing_skeleton(target, e.at("t").get<double>()));
      } else {
        std::visit([&](const auto& ev) { session.ingest(ev); }, event_from_json(e));
      }
    } catch (const Error& err) {
      errors.push_back({{"kind", std::string(to_string(err.kind()))}, {"message", err.what()}});
    }
  }

  json objects = json::array();
  for (const auto& o : perceived.scene.all_objects()) {
    json entry{{"index", o.index},
               {"w", o.width},
               {"h", o.height},
               {"d", o.thickness},
               {"centroid", vec3_to_json(o.centroid)},
               {"interactable", perceived.scene.is_interactable(o.index)}};
    const auto it = perceived.box_of_index.find(o.index);
    entry["box_id"] = it == perceived.box_of_index.end() ? json(nullptr) : json(it->second);
    objects.push_back(entry);
  }

  for (const auto& m : session.messages()) {
    if (m.at("type") == "error") errors.push_back(m.at("data"));
  }

  json intentions = json::array();
  for (const auto& ex : session.executions()) {
    intentions.push_back({{"intention", ex.intention.to_tuple_string()},
                          {"attempts", ex.attempts},
                          {"plan", serialize_plan(ex.sequence)}});
  }
  bool formed = false;
  for (const auto& m : session.messages()) formed = formed || m.at("type") == "intention";

  const Scene& final_scene = session.scene();
  json assertions = json::array();
  bool all_pass = true;
  for (const auto& a : scenario.expected) {
    json r{{"box_id", a.box_id},
           {"region", {{"min", vec3_to_json(a.min)}, {"max", vec3_to_json(a.max)}}}};
    bool pass = true;
    std::string reason;
    const auto it = perceived.index_of_box.find(a.box_id);
    const StructuralObject* obj = it == perceived.index_of_box.end() ? nullptr
                                                                     : final_scene.find(it->second);
    if (!obj) {
      pass = false;
      reason = "box not perceived";
    } else {
      r["object"] = obj->index;
      r["centroid"] = vec3_to_json(obj->centroid);
      for (int k = 0; k < 3; ++k) {
        if (obj->centroid[k] < a.min[k] || obj->centroid[k] > a.max[k]) {
          pass = false;
          reason = "centroid outside region";
        }
      }
      if (a.pour_angle_deg) {
        r["pour_angle_deg"] = *a.pour_angle_deg;
        const auto p = final_scene.pour_angles_deg.find(obj->index);
        if (p == final_scene.pour_angles_deg.end() ||
            std::abs(p->second - *a.pour_angle_deg) > 1e-6) {
          pass = false;
          reason = reason.empty() ? "pour angle not recorded" : reason + "; pour angle not recorded";
        }
      }
    }
    r["pass"] = pass;
    if (!pass) r["reason"] = reason;
    all_pass = all_pass && pass;
    assertions.push_back(std::move(r));
  }

  ReplayReport report;
  report.passed = formed && !session.executions().empty() && all_pass;
  std::string outcome = report.passed ? "pass" : "fail";
  if (!formed) outcome = "no intention formed";

  report.canonical = {{"v", kMessageVersion},
                      {"scenario", scenario.name},
                      {"planner", config.planner_backend},
                      {"outcome", outcome},
                      {"objects", objects},
                      {"intentions", intentions},
                      {"attempts_total", session.total_attempts()},
                      {"assertions", assertions},
                      {"errors", errors},
                      {"final_scene", to_json(final_scene)},
                      {"messages", session.messages().size()}};
  const auto& st = session.timings();
  report.timings = {{"perception_ms", perception_ms},
                    {"parse_ms", st.parse_ms},
                    {"select_ms", st.select_ms},
                    {"plan_ms", st.plan_ms},
                    {"execute_ms", st.execute_ms},
                    {"total_ms", ms_since(t_start)}};
  return report;
}

}  // namespace hri
