#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "hri/error.hpp"
#include "hri/planning.hpp"
#include "hri/safety.hpp"
#include "hri/testkit.hpp"

using namespace hri;

#ifndef HRI_SOURCE_DIR
#error "HRI_SOURCE_DIR must be defined"
#endif

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidInput;
}

StructuralObject box(int index, Vec3 centroid, Vec3 size) {
  StructuralObject o;
  o.index = index;
  o.width = size.x();
  o.height = size.y();
  o.thickness = size.z();
  o.centroid = centroid;
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Pick at (0.3, 0, 0), place at (-0.3, 0, 0), obstacle 0.30 m tall between.
Scene over_obstacle_scene() {
  std::vector<StructuralObject> objs{box(0, {0.3, 0, 0.04}, {0.05, 0.05, 0.08}),
                                     box(1, {-0.3, 0, 0.01}, {0.08, 0.08, 0.02}),
                                     box(2, {0.0, 0, 0.15}, {0.10, 0.10, 0.30})};
  EndEffectorState e;
  e.position = {0, 0, 0.5};
  return build_scene(objs, e, 0.085);
}

}  // namespace

TEST_CASE("parse_plan_response: grammar examples") {
  const ActionSequence s = parse_plan_response("PICK 3\nMOVETO 0.1 0.2 0.35\nPLACE 5");
  REQUIRE(s.steps.size() == 3);
  CHECK(std::get<Pick>(s.steps[0].action).object == 3);
  CHECK(std::get<MoveTo>(s.steps[1].action).position == Vec3(0.1, 0.2, 0.35));
  CHECK(std::get<int>(std::get<Place>(s.steps[2].action).target) == 5);
  CHECK(s.steps[1].start == Vec3::Zero());
  CHECK(s.steps[2].start == Vec3(0.1, 0.2, 0.35));

  CHECK(kind_of([] { parse_plan_response("FLY 1"); }) == ErrorKind::InvalidToken);
  CHECK(kind_of([] { parse_plan_response("PICK three"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([] { parse_plan_response(""); }) == ErrorKind::EmptyPlan);
  CHECK(kind_of([] { parse_plan_response("\n  \n"); }) == ErrorKind::EmptyPlan);
}

TEST_CASE("parse_plan_response: rejects anything outside the grammar") {
  for (const char* bad : {"Sure! Here is the plan:\nPICK 1", "pick 1", "MOVETO 1 2", "MOVETO 1 2 3 4",
                          "OPENGRIPPER 0.5", "OPENGRIPPER -0.01", "POUR 200 1", "PICK -1", "PICK 1.5",
                          "MOVETO 1e400 0 0", "MOVETO nan 0 0", "```\nPICK 1\n```", "PICK +1",
                          "1. PICK 1", "HOME now"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_plan_response(bad), Error);
  }
}

TEST_CASE("plan text round trip") {
  testkit::Rng rng(31);
  for (int i = 0; i < 300; ++i) {
    std::vector<ActionPrimitive> acts;
    const int n = rng.integer(1, 10);
    for (int k = 0; k < n; ++k) {
      switch (rng.integer(0, 8)) {
        case 0: acts.emplace_back(MoveTo{rng.vec(-1, 1)}); break;
        case 1: acts.emplace_back(Pick{rng.integer(0, 20)}); break;
        case 2: acts.emplace_back(Place{rng.integer(0, 20)}); break;
        case 3: acts.emplace_back(Place{rng.vec(-1, 1)}); break;
        case 4: acts.emplace_back(Pour{rng.uniform(0, 180), rng.integer(0, 20)}); break;
        case 5: acts.emplace_back(Home{}); break;
        case 6: acts.emplace_back(Drop{}); break;
        case 7: acts.emplace_back(OpenGripper{rng.uniform(0, 0.085)}); break;
        default: acts.emplace_back(CloseGripper{rng.uniform(0, 0.085)}); break;
      }
    }
    const PlanContext ctx{rng.vec(-1, 1), Vec3(0, 0, 0.5), 0.085};
    const ActionSequence seq = chain(acts, ctx);
    seq.validate();
    CHECK(parse_plan_response(serialize_plan(seq), ctx) == seq);
  }
}

TEST_CASE("ActionSequence::validate") {
  CHECK(kind_of([] { ActionSequence{}.validate(); }) == ErrorKind::InvalidSequence);
  ActionSequence broken = chain({MoveTo{Vec3(1, 0, 0)}, MoveTo{Vec3(2, 0, 0)}}, {});
  broken.steps[1].start = Vec3(1.1, 0, 0);
  CHECK(kind_of([&] { broken.validate(); }) == ErrorKind::InvalidSequence);
}

TEST_CASE("builtin templates match the versioned files") {
  const std::string dir = std::string(HRI_SOURCE_DIR) + "/data/prompt/v1/";
  const PromptTemplates b = PromptTemplates::builtin();
  const PromptTemplates f = PromptTemplates::load(dir);
  CHECK(b.version == f.version);
  CHECK(b.action_constraints == slurp(dir + "action_constraints.txt"));
  CHECK(b.trajectory_constraints == slurp(dir + "trajectory_constraints.txt"));
  CHECK(b.example_tasks == slurp(dir + "example_tasks.txt"));
}

TEST_CASE("build_prompt: deterministic, three sections, digest per object") {
  const Scene s = over_obstacle_scene();
  const Intention in{Verb::Pick, 0, Verb::Place, 1, {}};
  const PromptBundle a = build_prompt(s, in);
  const PromptBundle b = build_prompt(s, in);
  CHECK(a.render() == b.render());
  const std::string sys = a.system_text();
  CHECK(sys.find("# Action constraints") != std::string::npos);
  CHECK(sys.find("# Trajectory constraints") != std::string::npos);
  CHECK(sys.find("# Example tasks") != std::string::npos);
  CHECK_FALSE(a.action_constraints.empty());
  CHECK_FALSE(a.trajectory_constraints.empty());
  CHECK_FALSE(a.example_tasks.empty());
  int entries = 0;
  for (std::size_t p = a.scene_digest.find("object "); p != std::string::npos;
       p = a.scene_digest.find("object ", p + 1)) {
    ++entries;
  }
  CHECK(entries == 3);
  CHECK(a.trajectory_constraints.find("{clearance}") == std::string::npos);
  CHECK(a.trajectory_constraints.find("meters") != std::string::npos);
  CHECK(a.task.find("(pick, 0, place, 1, -)") != std::string::npos);
}

TEST_CASE("PlannerFeedback text") {
  PlannerFeedback f;
  f.verdict = PlannerFeedback::Verdict::Collision;
  f.location = Vec3(0.1, -0.2, 0.3);
  f.step = 4;
  f.obstacle = 2;
  CHECK(f.to_text().rfind("collision at (0.1000, -0.2000, 0.3000) during step 4 with object 2", 0) == 0);
}

TEST_CASE("deterministic planner: lifts over a 0.30 m obstacle") {
  const Scene s = over_obstacle_scene();
  DeterministicPlanner p;
  const ActionSequence seq = p.plan({Verb::Pick, 0, Verb::Place, 1, {}}, s, std::nullopt);
  seq.validate();
  double highest = 0.0;
  for (const auto& st : seq.steps) highest = std::max(highest, st.end.z());
  CHECK(highest >= 0.35);
  CHECK(check_in_scene(seq, s).clear());
  CHECK_FALSE(testkit::sample_scene_sweep(scene_sweep(seq, s)).hit);
}

TEST_CASE("deterministic planner: no obstacles uses the default height") {
  std::vector<StructuralObject> objs{box(0, {0.3, 0, 0.04}, {0.05, 0.05, 0.08}),
                                     box(1, {-0.3, 0, 0.01}, {0.08, 0.08, 0.02})};
  const Scene s = build_scene(objs, {}, 0.085);
  const ActionSequence seq = DeterministicPlanner{}.plan({Verb::Pick, 0, Verb::Place, 1, {}}, s, std::nullopt);
  double highest = 0.0;
  for (const auto& st : seq.steps) highest = std::max(highest, st.end.z());
  CHECK(highest == doctest::Approx(0.25));
  CHECK(check_in_scene(seq, s).clear());
}

TEST_CASE("deterministic planner: home is a single step") {
  const ActionSequence seq = DeterministicPlanner{}.plan({Verb::Home, {}, {}, {}, {}}, over_obstacle_scene(), std::nullopt);
  REQUIRE(seq.steps.size() == 1);
  CHECK(std::holds_alternative<Home>(seq.steps[0].action));
}

TEST_CASE("deterministic planner: errors") {
  const Scene s = over_obstacle_scene();
  DeterministicPlanner p;
  CHECK(kind_of([&] { p.plan({Verb::Pick, 9, {}, {}, {}}, s, std::nullopt); }) == ErrorKind::UnknownTarget);
  CHECK(kind_of([&] { p.plan({Verb::Pick, 2, {}, {}, {}}, s, std::nullopt); }) == ErrorKind::Ungraspable);
}

TEST_CASE("llm planner: request shape and feedback turn") {
  CannedChatTransport canned({"PICK 0", "HOME"});
  LlmPlanner p(canned, "m");
  const Scene s = over_obstacle_scene();
  const Intention in{Verb::Pick, 0, {}, {}, {}};
  p.plan(in, s, std::nullopt);
  CHECK(p.last_request()["model"] == "m");
  CHECK(p.last_request()["temperature"] == 0);
  CHECK(p.last_request()["messages"].size() == 2);
  PlannerFeedback fb;
  fb.verdict = PlannerFeedback::Verdict::Collision;
  fb.location = Vec3(0, 0, 0.1);
  fb.step = 1;
  fb.obstacle = 2;
  const ActionSequence seq = p.plan(in, s, fb);
  CHECK(std::holds_alternative<Home>(seq.steps[0].action));
  const auto& msgs = p.last_request()["messages"];
  REQUIRE(msgs.size() == 4);
  CHECK(msgs[2]["role"] == "assistant");
  CHECK(msgs[3]["content"].get<std::string>().find("collision at") != std::string::npos);
  CHECK(canned.requests().size() == 2);
}

TEST_CASE("llm planner: references to missing objects are rejected") {
  LlmPlanner p(CannedChatTransport({"PICK 42"}), "m");
  CHECK(kind_of([&] { p.plan({Verb::Pick, 0, {}, {}, {}}, over_obstacle_scene(), std::nullopt); }) ==
        ErrorKind::UnknownTarget);
}
