#include <doctest.h>

#include <cmath>

#include "hri/error.hpp"
#include "hri/safety.hpp"
#include "hri/testkit.hpp"

using namespace hri;

namespace {

StructuralObject box(int index, Vec3 centroid, Vec3 size) {
  StructuralObject o;
  o.index = index;
  o.width = size.x();
  o.height = size.y();
  o.thickness = size.z();
  o.centroid = centroid;
  return o;
}

Scene over_obstacle_scene() {
  std::vector<StructuralObject> objs{box(0, {0.3, 0, 0.04}, {0.05, 0.05, 0.08}),
                                     box(1, {-0.3, 0, 0.01}, {0.08, 0.08, 0.02}),
                                     box(2, {0.0, 0, 0.15}, {0.10, 0.10, 0.30})};
  EndEffectorState e;
  e.position = {0, 0, 0.5};
  return build_scene(objs, e, 0.085);
}

std::string pick_place_text(double travel) {
  const std::string z = std::to_string(travel);
  return "OPENGRIPPER 0.085\nMOVETO 0.3 0 " + z + "\nMOVETO 0.3 0 0.04\nCLOSEGRIPPER 0.05\nPICK 0\n" +
         "MOVETO 0.3 0 " + z + "\nMOVETO -0.3 0 " + z + "\nMOVETO -0.3 0 0.062\nPLACE 1\n";
}

const Intention kPickPlace{Verb::Pick, 0, Verb::Place, 1, {}};

}  // namespace

TEST_CASE("segment_hits_box: worked examples") {
  const Box3 unit{Vec3::Zero(), Vec3(0.5, 0.5, 0.5)};
  const auto hit = segment_hits_box({-1, 0, 0}, {1, 0, 0}, unit);
  REQUIRE(hit);
  CHECK(hit->isApprox(Vec3(-0.5, 0, 0)));
  CHECK_FALSE(segment_hits_box({-1, 0, 1}, {1, 0, 1}, unit));
  // Exactly on the top face: closed sets count contact.
  CHECK(segment_hits_box({-1, 0, 0.5}, {1, 0, 0.5}, unit));
  // Degenerate segment inside and outside.
  CHECK(segment_hits_box({0.1, 0.1, 0.1}, {0.1, 0.1, 0.1}, unit));
  CHECK_FALSE(segment_hits_box({2, 2, 2}, {2, 2, 2}, unit));
  // Stops short of the face.
  CHECK_FALSE(segment_hits_box({-1, 0, 0}, {-0.5000001, 0, 0}, unit));
}

TEST_CASE("check: transport through an obstacle hits the expanded entry point") {
  const Box3 moving{Vec3::Zero(), Vec3(0.03, 0.03, 0.04)};
  const std::vector<Box3> obstacles{{Vec3(0, 0, 0.15), Vec3(0.05, 0.05, 0.15)}};
  const ActionSequence seq = chain({MoveTo{Vec3(0.5, 0, 0.1)}}, {Vec3(-0.5, 0, 0.1), Vec3::Zero(), 0.085});
  CheckOptions opts;
  opts.attached_at_start = true;
  const CheckResult r = check(seq, moving, obstacles, opts);
  REQUIRE(r.collision);
  CHECK(r.collision->step == 0);
  CHECK(r.collision->obstacle == 0);
  // Entry face of the Minkowski box: x = -(0.05 + 0.03).
  CHECK(r.collision->point.x() == doctest::Approx(-0.08).epsilon(1e-8));
  CHECK(r.collision->point.z() == doctest::Approx(0.1));

  testkit::SweepCase c{Vec3(-0.5, 0, 0.1), Vec3(0.5, 0, 0.1), moving.half_extents, obstacles};
  CHECK(testkit::sample_sweep(c).hit);
}

TEST_CASE("check: transport above top + half height is clear; no obstacles is clear") {
  const Box3 moving{Vec3::Zero(), Vec3(0.03, 0.03, 0.04)};
  const std::vector<Box3> obstacles{{Vec3(0, 0, 0.15), Vec3(0.05, 0.05, 0.15)}};
  CheckOptions opts;
  opts.attached_at_start = true;
  const double z = 0.30 + 0.04 + 1e-6;
  const ActionSequence seq = chain({MoveTo{Vec3(0.5, 0, z)}}, {Vec3(-0.5, 0, z), Vec3::Zero(), 0.085});
  CHECK(check(seq, moving, obstacles, opts).clear());
  CHECK(check(seq, moving, std::vector<Box3>{}, opts).clear());
}

TEST_CASE("check: unattached segments sweep the gripper box") {
  const std::vector<Box3> obstacles{{Vec3(0, 0, 0.15), Vec3(0.05, 0.05, 0.15)}};
  const Box3 large{Vec3::Zero(), Vec3(0.2, 0.2, 0.2)};
  // 0.33 clears the gripper (0.02) but not the large held box.
  const ActionSequence seq = chain({MoveTo{Vec3(0.5, 0, 0.33)}}, {Vec3(-0.5, 0, 0.33), Vec3::Zero(), 0.085});
  CHECK(check(seq, large, obstacles).clear());
  CheckOptions held;
  held.attached_at_start = true;
  CHECK_FALSE(check(seq, large, obstacles, held).clear());
}

TEST_CASE("check: first collision is lowest step, then lowest obstacle") {
  const std::vector<Box3> obstacles{{Vec3(1, 0, 0), Vec3(0.1, 0.1, 0.1)}, {Vec3(0.5, 0, 0), Vec3(0.1, 0.1, 0.1)}};
  const ActionSequence seq = chain({MoveTo{Vec3(2, 0, 0)}, MoveTo{Vec3(0, 0, 0)}}, {});
  const CheckResult r = check(seq, Box3{Vec3::Zero(), Vec3::Zero()}, obstacles);
  REQUIRE(r.collision);
  CHECK(r.collision->step == 0);
  CHECK(r.collision->obstacle == 0);
}

TEST_CASE("check: pour inflates the held box to its circumscribed sphere") {
  Scene s = over_obstacle_scene();
  // Pour right next to the obstacle side: the axis-aligned box fits, the
  // tilted one does not.
  const std::string text =
      "OPENGRIPPER 0.085\nMOVETO 0.3 0 0.5\nMOVETO 0.3 0 0.04\nCLOSEGRIPPER 0.05\nPICK 0\nMOVETO 0.3 0 0.5\n"
      "MOVETO 0.08 0 0.5\nMOVETO 0.08 0 0.2\nPOUR 90 1\nMOVETO 0.08 0 0.5\n";
  const ActionSequence seq = parse_plan_response(text, {s.effector.position, Vec3(0, 0, 0.5), 0.085});
  const CheckResult r = check_in_scene(seq, s);
  REQUIRE(r.collision);
  CHECK(r.collision->obstacle == 2);
  CHECK(r.collision->step == 8);
}

TEST_CASE("scene_sweep excludes picked objects") {
  const Scene s = over_obstacle_scene();
  const ActionSequence seq = parse_plan_response(pick_place_text(0.45), {s.effector.position, Vec3(0, 0, 0.5), 0.085});
  const SceneSweep sw = scene_sweep(seq, s);
  CHECK(sw.excluded == std::vector<int>{0});
  CHECK(sw.obstacles.size() == 2);
}

TEST_CASE("plan_with_feedback: colliding then corrected") {
  testkit::ScriptedPlanner stub({pick_place_text(0.2), pick_place_text(0.45)});
  const FeedbackOutcome out = plan_with_feedback(stub, kPickPlace, over_obstacle_scene(), 3);
  CHECK(out.attempts == 2);
  CHECK(stub.calls() == 2);
  REQUIRE(stub.feedback()[1]);
  CHECK(stub.feedback()[1]->verdict == PlannerFeedback::Verdict::Collision);
  CHECK(stub.feedback()[1]->obstacle == 2);
  CHECK(stub.feedback()[1]->to_text().find("during step 6") != std::string::npos);
  CHECK(check_in_scene(out.checked.sequence(), over_obstacle_scene()).clear());
}

TEST_CASE("plan_with_feedback: always colliding exhausts retries") {
  testkit::ScriptedPlanner stub({pick_place_text(0.2)});
  try {
    plan_with_feedback(stub, kPickPlace, over_obstacle_scene(), 3);
    FAIL("expected PlanningFailed");
  } catch (const PlanningFailedError& e) {
    CHECK(e.kind() == ErrorKind::PlanningFailed);
    CHECK(e.history().size() == 4);
    REQUIRE(e.last_result());
    CHECK_FALSE(e.last_result()->clear());
  }
  CHECK(stub.calls() == 4);
}

TEST_CASE("plan_with_feedback: grammar rejections count as attempts") {
  testkit::ScriptedPlanner stub({"Here you go:\nPICK 0", pick_place_text(0.45)});
  const FeedbackOutcome out = plan_with_feedback(stub, kPickPlace, over_obstacle_scene(), 1);
  CHECK(out.attempts == 2);
  CHECK(stub.feedback()[1]->verdict == PlannerFeedback::Verdict::Rejected);
  CHECK_FALSE(out.history[0].rejection.empty());

  testkit::ScriptedPlanner never({"nope"});
  CHECK_THROWS_AS(plan_with_feedback(never, kPickPlace, over_obstacle_scene(), 0), PlanningFailedError);
  CHECK(never.calls() == 1);
}

TEST_CASE("plan_with_feedback: deterministic planner on random solvable scenes") {
  testkit::Rng rng(77);
  DeterministicPlanner planner;
  for (int i = 0; i < 100; ++i) {
    const auto c = testkit::random_planning_case(rng, i % 2 == 0);
    const FeedbackOutcome out = plan_with_feedback(planner, c.intention, c.scene, 3);
    CHECK(out.attempts == 1);
    CHECK_FALSE(testkit::sample_scene_sweep(scene_sweep(out.checked.sequence(), c.scene)).hit);
  }
}

TEST_CASE("certify refuses collisions and binds the scene") {
  const Scene s = over_obstacle_scene();
  const PlanContext ctx{s.effector.position, Vec3(0, 0, 0.5), 0.085};
  const Certification bad = certify(parse_plan_response(pick_place_text(0.2), ctx), s);
  CHECK_FALSE(bad.checked);
  const Certification good = certify(parse_plan_response(pick_place_text(0.45), ctx), s);
  REQUIRE(good.checked);
  CHECK(good.checked->scene_fingerprint() == scene_fingerprint(s));
  Scene moved = s;
  moved.interactable[0].centroid.x() += 1e-3;
  CHECK(scene_fingerprint(moved) != scene_fingerprint(s));
}

TEST_CASE("check_report and trajectory_dump") {
  CHECK(check_report(CheckResult::Clear(), 1) ==
        nlohmann::json{{"verdict", "clear"}, {"step", nullptr}, {"point", nullptr}, {"obstacle", nullptr}, {"attempts", 1}});
  const Scene s = over_obstacle_scene();
  const ActionSequence seq = parse_plan_response(pick_place_text(0.2), {s.effector.position, Vec3(0, 0, 0.5), 0.085});
  const auto dump = trajectory_dump(seq, s);
  CHECK(dump["segments"].size() == seq.steps.size());
  CHECK(dump["segments"][6]["verdict"] == "collision");
  CHECK(dump["segments"][0]["verdict"] == "clear");
}
