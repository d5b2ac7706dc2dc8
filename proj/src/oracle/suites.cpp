#include "hri/suites.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "hri/error.hpp"
#include "hri/orchestrator.hpp"
#include "hri/perception.hpp"
#include "hri/testkit.hpp"
#include "hri/text.hpp"

namespace hri::suites {

namespace {

using Clock = std::chrono::steady_clock;
using testkit::Rng;

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(Clock::now() - t0_).count(); }

 private:
  Clock::time_point t0_ = Clock::now();
};

SuiteResult finish(std::string name, bool ok, const Timer& timer, double limit, std::string detail) {
  SuiteResult r;
  r.name = std::move(name);
  r.seconds = timer.seconds();
  r.time_limit_s = limit;
  r.passed = ok && r.seconds < limit;
  r.detail = std::move(detail);
  if (ok && !r.passed) r.detail += "; over time limit";
  return r;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

}  // namespace

std::string format(const SuiteResult& r) {
  return std::string(r.passed ? "PASS " : "FAIL ") + r.name + " (" + fixed(r.seconds, 2) +
         " s / " + shortest(r.time_limit_s) + " s): " + r.detail;
}

// ---- distance kernel -------------------------------------------------------

SuiteResult distance_kernel(const DistanceLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  double worst_oracle = 0.0;
  double worst_invariance = 0.0;
  for (int i = 0; i < limits.cases; ++i) {
    const Vec3 l1 = rng.vec(-1.0, 1.0);
    const Vec3 dir = rng.unit_vector() * rng.uniform(0.05, 1.0);
    const Vec3 l2 = l1 + dir;
    const Vec3 p = rng.vec(-1.5, 1.5);
    const DeicticRay ray = DeicticRay::through(l1, l2);
    const double d = point_line_distance(ray, p);
    worst_oracle = std::max(worst_oracle, std::abs(d - testkit::sweep_line_distance(l1, l2, p)));

    // Other point pairs on the same line, swapped order, scaled direction.
    const double s1 = rng.uniform(-3.0, 3.0);
    double s2 = rng.uniform(-3.0, 3.0);
    if (std::abs(s2 - s1) < 0.1) s2 = s1 + 0.5;
    const Vec3 a = l1 + s1 * dir;
    const Vec3 b = l1 + s2 * dir;
    for (const auto& r : {DeicticRay::through(a, b), DeicticRay::through(b, a),
                          DeicticRay::through(l2, l1)}) {
      worst_invariance = std::max(worst_invariance, std::abs(point_line_distance(r, p) - d));
    }
    // Translating ray and point together.
    const Vec3 shift = rng.vec(-1.0, 1.0);
    const double moved = point_line_distance(DeicticRay::through(l1 + shift, l2 + shift), p + shift);
    worst_invariance = std::max(worst_invariance, std::abs(moved - d));
  }
  const bool ok = worst_oracle <= limits.oracle_tol && worst_invariance <= limits.invariance_tol;
  return finish("distance kernel", ok, timer, limits.time_limit_s,
                std::to_string(limits.cases) + " cases, max |kernel - sweep| " + sci(worst_oracle) +
                    " (tol " + sci(limits.oracle_tol) + "), max invariance drift " +
                    sci(worst_invariance) + " (tol " + sci(limits.invariance_tol) + ")");
}

// ---- structural summary ----------------------------------------------------

SuiteResult structural_summary(const SummaryLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  double worst_exact = 0.0;
  double worst_stream = 0.0;
  for (int i = 0; i < limits.boxes; ++i) {
    const Vec3 center = rng.vec(-2.0, 2.0);
    const Vec3 extents = rng.vec(0.02, 0.5);
    PointCloud cloud = testkit::box_surface_cloud(center, extents, 2 + rng.integer(1, 9));
    const StructuralObject o = summarize(cloud, i);
    const Vec3 got_ext(o.width, o.height, o.thickness);
    worst_exact = std::max({worst_exact, (o.centroid - center).cwiseAbs().maxCoeff(),
                            (got_ext - extents).cwiseAbs().maxCoeff()});
    const auto s = testkit::streaming_summary(cloud);
    worst_stream = std::max({worst_stream, (o.centroid - s.mean).cwiseAbs().maxCoeff(),
                             (got_ext - (s.max - s.min)).cwiseAbs().maxCoeff()});
  }

  double worst_equiv = 0.0;
  double worst_translation = 0.0;
  for (int i = 0; i < limits.transforms; ++i) {
    PointCloud cloud;
    cloud.frame = Frame::Camera;
    const int n = rng.integer(20, 400);
    const Vec3 c = rng.vec(-1.0, 1.0);
    for (int k = 0; k < n; ++k) cloud.points.push_back(c + rng.vec(-0.2, 0.2));
    const RigidTransform t = testkit::random_transform(rng);
    const StructuralObject before = summarize(cloud, 0);
    const StructuralObject after = summarize(transform_points(t, cloud), 0);
    worst_equiv = std::max(worst_equiv, (after.centroid - t.apply(before.centroid)).cwiseAbs().maxCoeff());

    RigidTransform shift;
    shift.translation = rng.vec(-2.0, 2.0);
    const StructuralObject moved = summarize(transform_points(shift, cloud), 0);
    worst_translation = std::max({worst_translation, std::abs(moved.width - before.width),
                                  std::abs(moved.height - before.height),
                                  std::abs(moved.thickness - before.thickness)});
  }
  const bool ok = worst_exact <= limits.exact_tol && worst_stream <= limits.exact_tol &&
                  worst_equiv <= limits.equivariance_tol &&
                  worst_translation <= limits.translation_tol;
  return finish("centroid and extents", ok, timer, limits.time_limit_s,
                std::to_string(limits.boxes) + " analytic boxes, max error " + sci(worst_exact) +
                    ", vs streaming oracle " + sci(worst_stream) + "; " +
                    std::to_string(limits.transforms) + " rigid transforms, max drift " +
                    sci(worst_equiv) + ", translated extents drift " + sci(worst_translation));
}

// ---- target selection ------------------------------------------------------

SuiteResult target_selection(const SelectionLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  int agree = 0;
  int ties = 0;
  for (int i = 0; i < limits.scenes; ++i) {
    const int n = rng.integer(limits.min_objects, limits.max_objects);
    const bool tie = rng.chance(limits.tie_fraction);
    const auto c = testkit::random_selection_case(rng, n, tie);
    ties += c.tie ? 1 : 0;
    const TargetSelection got = select_target(c.ray, c.scene);
    if (got.index == testkit::brute_force_target(c.ray, c.scene)) ++agree;
  }
  return finish("target selection", agree == limits.scenes, timer, limits.time_limit_s,
                std::to_string(agree) + "/" + std::to_string(limits.scenes) +
                    " scenes agree with brute-force argmin (" + std::to_string(ties) + " tie cases)");
}

// ---- swept volume ----------------------------------------------------------

SuiteResult swept_checker(const SweptLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  int false_negative = 0;
  int fp_in_band = 0;
  int fp_out_band = 0;
  int collisions = 0;
  int bad_point = 0;
  for (int i = 0; i < limits.cases; ++i) {
    const auto c = testkit::random_sweep_case(rng);
    const ActionSequence seq = chain({MoveTo{c.end}}, PlanContext{c.start, Vec3::Zero(), 0.085});
    CheckOptions opts;
    opts.attached_at_start = true;
    const CheckResult r = check(seq, Box3{Vec3::Zero(), c.moving_half}, c.obstacles, opts);
    const auto oracle = testkit::sample_sweep(c, limits.sample_step);
    if (r.collision) {
      ++collisions;
      const Box3& o = c.obstacles[static_cast<std::size_t>(r.collision->obstacle)];
      if (!o.expanded(c.moving_half).contains(r.collision->point, 1e-12)) ++bad_point;
    }
    if (oracle.hit && !r.collision) ++false_negative;
    if (!oracle.hit && r.collision) {
      if (oracle.min_gap < limits.boundary_band) {
        ++fp_in_band;
      } else {
        ++fp_out_band;
      }
    }
  }
  const bool ok = false_negative == 0 && fp_out_band == 0 && bad_point == 0;
  return finish("swept-volume checker", ok, timer, limits.time_limit_s,
                std::to_string(limits.cases) + " cases, " + std::to_string(collisions) +
                    " collisions, false negatives " + std::to_string(false_negative) +
                    ", false positives in band " + std::to_string(fp_in_band) +
                    ", outside band " + std::to_string(fp_out_band) +
                    ", hit points outside expanded box " + std::to_string(bad_point));
}

// ---- closed loop -----------------------------------------------------------

SuiteResult closed_loop(const ClosedLoopLimits& limits, std::uint64_t seed) {
  Timer timer;
  bool ok = true;
  std::ostringstream detail;
  int returned = 0;
  int returned_clear = 0;
  for (int qi = 1; qi <= 9; ++qi) {
    const double q = qi / 10.0;
    Rng rng(seed * 1000 + static_cast<std::uint64_t>(qi));
    int first_pass = 0;
    int post_loop = 0;
    for (int i = 0; i < limits.scenes_per_q; ++i) {
      const auto c = testkit::random_planning_case(rng, rng.chance(0.5));
      testkit::FaultInjectedPlanner planner(q, seed * 7919 + static_cast<std::uint64_t>(qi * 100000 + i));
      try {
        const auto out = plan_with_feedback(planner, c.intention, c.scene, limits.max_retries);
        ++post_loop;
        if (out.attempts == 1) ++first_pass;
        ++returned;
        const auto& seq = out.checked.sequence();
        const bool clear = check_in_scene(seq, c.scene).clear() &&
                           !testkit::sample_scene_sweep(scene_sweep(seq, c.scene)).hit;
        returned_clear += clear ? 1 : 0;
      } catch (const PlanningFailedError& e) {
        if (e.history().front().result && e.history().front().result->clear()) ++first_pass;
      }
    }
    ok = ok && post_loop >= first_pass;
    detail << (qi > 1 ? ", " : "") << "q=" << fixed(q, 1) << " " << first_pass << "->" << post_loop;
  }
  ok = ok && returned == returned_clear;
  return finish("closed-loop safety", ok, timer, limits.time_limit_s,
                std::to_string(returned_clear) + "/" + std::to_string(returned) +
                    " returned sequences clear (checker and sampling oracle); first-pass->post-loop per " +
                    std::to_string(limits.scenes_per_q) + " scenes: " + detail.str());
}

// ---- deterministic planner -------------------------------------------------

SuiteResult deterministic_planner(const PlannerLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  DeterministicPlanner planner;
  int clear = 0;
  int confirmed = 0;
  for (int i = 0; i < limits.scenes; ++i) {
    const auto c = testkit::random_planning_case(rng, i % 2 == 1);
    const ActionSequence seq = planner.plan(c.intention, c.scene, std::nullopt);
    if (check_in_scene(seq, c.scene).clear()) ++clear;
    if (!testkit::sample_scene_sweep(scene_sweep(seq, c.scene)).hit) ++confirmed;
  }
  return finish("deterministic planner", clear == limits.scenes && confirmed == limits.scenes,
                timer, limits.time_limit_s,
                std::to_string(clear) + "/" + std::to_string(limits.scenes) +
                    " first-pass clear, " + std::to_string(confirmed) +
                    " confirmed by the 1 mm sampling oracle");
}

// ---- grammar ---------------------------------------------------------------

namespace {

std::string state_key(const SessionState& s) {
  std::ostringstream k;
  k << phase_name(s.phase);
  if (const auto* w = std::get_if<phase::AwaitingTarget>(&s.phase)) {
    k << ':' << to_string(w->pending) << ':' << w->second;
  }
  if (const auto* c = std::get_if<phase::Complete>(&s.phase)) k << ':' << c->intention.to_tuple_string();
  const auto& p = s.partial;
  k << '|' << (p.a1 ? to_string(*p.a1) : "-") << ',' << (p.t1 ? *p.t1 : -1) << ','
    << (p.a2 ? to_string(*p.a2) : "-") << ',' << (p.t2 ? *p.t2 : -1) << ','
    << (p.lambda ? static_cast<int>(p.lambda->kind) : -1) << '|' << (s.live ? s.live->index : -1);
  return k.str();
}

bool complete_is_valid(const SessionState& s) {
  const auto* c = std::get_if<phase::Complete>(&s.phase);
  if (!c) return true;
  const Intention& i = c->intention;
  if (verb_requires_target(i.a1) && !i.t1) return false;
  if (i.a2 && verb_requires_target(*i.a2) && !i.t2) return false;
  if (!i.a2 && i.t2) return false;
  try {
    i.validate();
  } catch (const Error&) {
    return false;
  }
  return true;
}

Intention run_transcript(const std::vector<ScriptStep>& steps, const Scene& scene) {
  SessionState s;
  for (const auto& step : steps) {
    if (const auto* text = std::get_if<std::string>(&step)) {
      s = hri::advance(s, parse_utterance(VerbalUtterance{*text, 0.0, std::nullopt}));
    } else {
      const auto* obj = scene.find(std::get<int>(step));
      const Vec3 elbow(0.0, 0.6, 0.4);
      s = hri::advance(s, select_target(DeicticRay::through(elbow, elbow + 0.3 * (obj->centroid - elbow).normalized()), scene));
    }
  }
  return fuse(s);
}

}  // namespace

SuiteResult grammar_fsm(const GrammarLimits& limits) {
  Timer timer;
  std::ostringstream detail;
  bool ok = true;

  // Scripted transcripts for the five tuples.
  std::vector<StructuralObject> objects;
  for (int i = 0; i < 6; ++i) {
    StructuralObject o;
    o.index = i;
    o.width = o.height = 0.05;
    o.thickness = 0.1;
    o.centroid = {-0.5 + 0.2 * i, 0.0, 0.05};
    objects.push_back(o);
  }
  const Scene scene = build_scene(objects, EndEffectorState{}, 0.085);
  struct Case {
    std::vector<ScriptStep> steps;
    Intention expected;
  };
  const Metric ninety{MetricKind::Angle, 90.0};
  const std::vector<Case> cases = {
      {{"move to the initial position", "finish"}, {Verb::Home, {}, {}, {}, {}}},
      {{"throw it", "finish"}, {Verb::Throw, {}, {}, {}, {}}},
      {{"pick up this", 3, "this one", "finish"}, {Verb::Pick, 3, {}, {}, {}}},
      {{"pick up this", 2, "this one", "put it there", 5, "that one", "finish"},
       {Verb::Pick, 2, Verb::Place, 5, {}}},
      {{"pick up this", 1, "this one", "pour it there", 4, "this one", "at ninety degrees", "finish"},
       {Verb::Pick, 1, Verb::Pour, 4, ninety}},
  };
  int matched = 0;
  for (const auto& c : cases) {
    try {
      const Intention got = run_transcript(c.steps, scene);
      if (got == c.expected) {
        ++matched;
      } else {
        detail << "got " << got.to_tuple_string() << " want " << c.expected.to_tuple_string() << "; ";
      }
    } catch (const Error& e) {
      detail << "transcript failed: " << e.what() << "; ";
    }
  }
  ok = ok && matched == static_cast<int>(cases.size());

  // Exhaustive event strings, folded by state: every string of length <= L
  // is accounted for through the multiplicity of the state it reaches.
  std::vector<FsmEvent> alphabet;
  for (Verb v : {Verb::Home, Verb::Drop, Verb::Move, Verb::Pick, Verb::Place, Verb::Pour,
                 Verb::Throw, Verb::Give}) {
    alphabet.emplace_back(Command{ActionCommand{v, verb_requires_target(v)}});
  }
  alphabet.emplace_back(Command{ApprovalCommand{}});
  alphabet.emplace_back(Command{MetricCommand{{MetricKind::Angle, 45.0}}});
  alphabet.emplace_back(Command{MetricCommand{{MetricKind::Velocity, 0.1}}});
  alphabet.emplace_back(Command{FinishCommand{}});
  for (int idx : {0, 1}) {
    TargetSelection sel;
    sel.index = idx;
    alphabet.emplace_back(sel);
  }

  std::map<std::string, std::pair<SessionState, double>> frontier{{state_key(SessionState{}), {SessionState{}, 1.0}}};
  double strings = 0.0;
  double complete_strings = 0.0;
  double invalid = 0.0;
  for (int len = 1; len <= limits.max_length; ++len) {
    std::map<std::string, std::pair<SessionState, double>> next;
    for (const auto& [key, entry] : frontier) {
      const auto& [state, count] = entry;
      for (const auto& ev : alphabet) {
        SessionState s = state;
        try {
          s = hri::advance(state, ev);
        } catch (const Error&) {
          // Rejected events leave the state as it was.
        }
        strings += count;
        if (s.complete()) complete_strings += count;
        if (!complete_is_valid(s)) invalid += count;
        auto& slot = next[state_key(s)];
        slot.first = s;
        slot.second += count;
      }
    }
    frontier = std::move(next);
  }
  ok = ok && invalid == 0.0;
  detail << matched << "/" << cases.size() << " transcripts give the expected tuple; "
         << static_cast<long long>(strings) << " event strings up to length " << limits.max_length
         << " over " << alphabet.size() << " events, " << static_cast<long long>(complete_strings)
         << " end Complete, " << static_cast<long long>(invalid) << " invalid";
  return finish("grammar and state machine", ok, timer, limits.time_limit_s, detail.str());
}

// ---- end-to-end replay -----------------------------------------------------

SuiteResult end_to_end_replay(const ReplayLimits& limits, const std::filesystem::path& scenario_dir) {
  Timer timer;
  bool ok = true;
  std::ostringstream detail;
  for (const char* name : {"pick-place-over-obstacle", "pick-pour-90"}) {
    Scenario scenario;
    try {
      scenario = load_scenario(scenario_dir / (std::string(name) + ".json"));
    } catch (const Error& e) {
      ok = false;
      detail << name << ": " << e.what() << "; ";
      continue;
    }
    for (const char* backend : {"deterministic", "canned"}) {
      scenario.planner = backend;
      const ReplayReport a = replay(scenario);
      const ReplayReport b = replay(scenario);
      const bool same = a.canonical.dump() == b.canonical.dump();
      int attempts = a.canonical.value("attempts_total", 0);
      ok = ok && a.passed && same;
      detail << name << "/" << backend << " " << (a.passed ? "pass" : "fail") << " attempts="
             << attempts << (same ? " identical" : " DIFFERENT") << "; ";
    }
  }
  return finish("end-to-end replay", ok, timer, limits.time_limit_s, detail.str());
}

// ---- perception ------------------------------------------------------------

SuiteResult perception_round_trip(const PerceptionLimits& limits, std::uint64_t seed) {
  Timer timer;
  Rng rng(seed);
  double worst_centroid = 0.0;
  double worst_extent = 0.0;
  int boxes = 0;
  int missing = 0;
  int centroid_ok = 0;
  int extent_ok = 0;
  for (int i = 0; i < limits.worlds; ++i) {
    const WorldSpec world = testkit::random_world(rng);
    const auto perceived = perceive_world(world);
    for (const auto& box : world.boxes) {
      ++boxes;
      const PerceivedObject* found = nullptr;
      for (const auto& p : perceived) {
        if (p.box_id == box.id) found = &p;
      }
      if (!found) {
        ++missing;
        continue;
      }
      const auto& o = found->object;
      const double ce = (o.centroid - box.center).cwiseAbs().maxCoeff();
      const double ee = (Vec3(o.width, o.height, o.thickness) - box.extents).cwiseAbs().maxCoeff();
      worst_centroid = std::max(worst_centroid, ce);
      worst_extent = std::max(worst_extent, ee);
      centroid_ok += ce <= limits.centroid_tol ? 1 : 0;
      extent_ok += ee <= limits.extent_tol ? 1 : 0;
    }
  }
  const bool ok = missing == 0 && centroid_ok == boxes && extent_ok == boxes;
  return finish("synthetic perception round trip", ok, timer, limits.time_limit_s,
                std::to_string(limits.worlds) + " worlds, " + std::to_string(boxes) + " boxes, " +
                    std::to_string(missing) + " unseen; centroid within " +
                    fixed(limits.centroid_tol * 100, 0) + " cm: " + std::to_string(centroid_ok) + "/" +
                    std::to_string(boxes) + " (worst " + fixed(worst_centroid * 100, 2) +
                    " cm); extents within " + fixed(limits.extent_tol * 100, 0) +
                    " cm: " + std::to_string(extent_ok) + "/" + std::to_string(boxes) + " (worst " +
                    fixed(worst_extent * 100, 2) + " cm)");
}

}  // namespace hri::suites
