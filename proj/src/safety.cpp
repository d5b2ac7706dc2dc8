#include "hri/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hri/error.hpp"
#include "hri/io.hpp"

namespace hri {

Box3 Box3::from_object(const StructuralObject& obj, const AxisConvention& axes) {
  return {obj.centroid, 0.5 * axes.extents_xyz(obj)};
}

void Box3::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(center[a]) || !std::isfinite(half_extents[a]) || half_extents[a] < 0.0) {
      throw Error(ErrorKind::InvalidInput, "box needs finite center and half extents >= 0");
    }
  }
}

bool Box3::contains(const Vec3& p, double tol) const {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(p[a] - center[a]) > half_extents[a] + tol) return false;
  }
  return true;
}

bool boxes_overlap(const Box3& a, const Box3& b) {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(a.center[k] - b.center[k]) > a.half_extents[k] + b.half_extents[k]) return false;
  }
  return true;
}

std::optional<Vec3> segment_hits_box(const Vec3& p0, const Vec3& p1, const Box3& box) {
  const Vec3 d = p1 - p0;
  double t0 = 0.0;
  double t1 = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double lo = box.center[a] - box.half_extents[a];
    const double hi = box.center[a] + box.half_extents[a];
    if (d[a] == 0.0) {
      if (p0[a] < lo || p0[a] > hi) return std::nullopt;
      continue;
    }
    double ta = (lo - p0[a]) / d[a];
    double tb = (hi - p0[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  Vec3 hit = p0 + t0 * d;
  // Rounding can leave the entry point a hair outside the face it crossed.
  for (int a = 0; a < 3; ++a) {
    hit[a] = std::clamp(hit[a], box.center[a] - box.half_extents[a],
                        box.center[a] + box.half_extents[a]);
  }
  return hit;
}

CheckOptions CheckOptions::from(const PlannerConfig& config) {
  CheckOptions o;
  o.gripper_half_extents = config.gripper_half_extents;
  return o;
}

namespace {

enum class Grip { Keep, Attach, Detach };

Grip grip_effect(const ActionPrimitive& action) {
  if (std::holds_alternative<Pick>(action)) return Grip::Attach;
  if (std::holds_alternative<Place>(action) || std::holds_alternative<Drop>(action) ||
      std::holds_alternative<OpenGripper>(action)) {
    return Grip::Detach;
  }
  return Grip::Keep;
}

Vec3 sphere_half(const Vec3& half) { return Vec3::Constant(half.norm()); }

}  // namespace

std::vector<SweptSegment> swept_segments(const ActionSequence& sequence, const Box3& manipulated,
                                         const CheckOptions& options) {
  std::vector<SweptSegment> out;
  out.reserve(sequence.steps.size());
  bool attached = options.attached_at_start;
  bool tilted = false;
  for (std::size_t k = 0; k < sequence.steps.size(); ++k) {
    const auto& step = sequence.steps[k];
    if (std::holds_alternative<Pour>(step.action) && attached) tilted = true;
    Vec3 half = options.gripper_half_extents;
    if (attached) half = tilted ? sphere_half(manipulated.half_extents) : manipulated.half_extents;
    out.push_back({static_cast<int>(k), step.start, step.end, half});
    switch (grip_effect(step.action)) {
      case Grip::Attach:
        attached = true;
        tilted = false;
        break;
      case Grip::Detach:
        attached = false;
        tilted = false;
        break;
      case Grip::Keep:
        break;
    }
  }
  return out;
}

std::optional<Collision> segment_collision(const SweptSegment& segment,
                                           std::span<const Obstacle> obstacles,
                                           double contact_tolerance) {
  for (const auto& obstacle : obstacles) {
    const Box3 minkowski = obstacle.box.expanded(segment.half_extents);
    const Box3 grown = minkowski.expanded(Vec3::Constant(contact_tolerance));
    if (auto hit = segment_hits_box(segment.start, segment.end, grown)) {
      Vec3 p = *hit;
      for (int a = 0; a < 3; ++a) {
        p[a] = std::clamp(p[a], minkowski.center[a] - minkowski.half_extents[a],
                          minkowski.center[a] + minkowski.half_extents[a]);
      }
      return Collision{segment.step, p, obstacle.id};
    }
  }
  return std::nullopt;
}

namespace {

CheckResult first_collision(const std::vector<SweptSegment>& segments,
                            std::span<const Obstacle> obstacles, double tol) {
  for (const auto& s : segments) {
    if (auto c = segment_collision(s, obstacles, tol)) return {c};
  }
  return CheckResult::Clear();
}

}  // namespace

CheckResult check(const ActionSequence& sequence, const Box3& manipulated,
                  std::span<const Obstacle> obstacles, const CheckOptions& options) {
  return first_collision(swept_segments(sequence, manipulated, options), obstacles,
                         options.contact_tolerance);
}

CheckResult check(const ActionSequence& sequence, const Box3& manipulated,
                  const std::vector<Box3>& obstacles, const CheckOptions& options) {
  std::vector<Obstacle> list;
  list.reserve(obstacles.size());
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    list.push_back({static_cast<int>(i), obstacles[i]});
  }
  return check(sequence, manipulated, std::span<const Obstacle>(list), options);
}

SceneSweep scene_sweep(const ActionSequence& sequence, const Scene& scene,
                       const PlannerConfig& config) {
  SceneSweep sweep;
  auto box_of = [&](int index) {
    const auto* obj = scene.find(index);
    if (!obj) {
      throw Error(ErrorKind::UnknownTarget, "plan references unknown object " + std::to_string(index));
    }
    return Box3::from_object(*obj, config.axes);
  };

  std::optional<int> attached = scene.held;
  if (attached) sweep.excluded.push_back(*attached);
  bool tilted = false;
  for (std::size_t k = 0; k < sequence.steps.size(); ++k) {
    const auto& step = sequence.steps[k];
    if (std::holds_alternative<Pour>(step.action) && attached) tilted = true;
    Vec3 half = config.gripper_half_extents;
    if (attached) {
      const Vec3 h = box_of(*attached).half_extents;
      half = tilted ? sphere_half(h) : h;
    }
    sweep.segments.push_back({static_cast<int>(k), step.start, step.end, half});

    if (const auto* pick = std::get_if<Pick>(&step.action)) {
      box_of(pick->object);
      attached = pick->object;
      tilted = false;
      sweep.excluded.push_back(pick->object);
    } else if (grip_effect(step.action) == Grip::Detach) {
      attached.reset();
      tilted = false;
    }
  }

  std::sort(sweep.excluded.begin(), sweep.excluded.end());
  sweep.excluded.erase(std::unique(sweep.excluded.begin(), sweep.excluded.end()),
                       sweep.excluded.end());
  auto objects = scene.all_objects();
  std::sort(objects.begin(), objects.end(),
            [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const auto& o : objects) {
    if (std::binary_search(sweep.excluded.begin(), sweep.excluded.end(), o.index)) continue;
    sweep.obstacles.push_back({o.index, Box3::from_object(o, config.axes)});
  }
  return sweep;
}

CheckResult check_in_scene(const ActionSequence& sequence, const Scene& scene,
                           const PlannerConfig& config) {
  const SceneSweep sweep = scene_sweep(sequence, scene, config);
  return first_collision(sweep.segments, sweep.obstacles, CheckOptions{}.contact_tolerance);
}

std::vector<std::optional<Collision>> step_verdicts(const ActionSequence& sequence,
                                                    const Scene& scene,
                                                    const PlannerConfig& config) {
  const SceneSweep sweep = scene_sweep(sequence, scene, config);
  std::vector<std::optional<Collision>> out;
  out.reserve(sweep.segments.size());
  for (const auto& s : sweep.segments) {
    out.push_back(segment_collision(s, sweep.obstacles, CheckOptions{}.contact_tolerance));
  }
  return out;
}

std::uint64_t scene_fingerprint(const Scene& scene) {
  const std::string text = to_json(scene).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Certification certify(ActionSequence sequence, const Scene& scene, const PlannerConfig& config) {
  sequence.validate();
  Certification out;
  out.result = check_in_scene(sequence, scene, config);
  if (out.result.clear()) {
    out.checked = CheckedSequence(std::move(sequence), scene_fingerprint(scene));
  }
  return out;
}

PlannerFeedback feedback_for(const CheckResult& result) {
  PlannerFeedback f;
  if (result.collision) {
    f.verdict = PlannerFeedback::Verdict::Collision;
    f.location = result.collision->point;
    f.step = result.collision->step;
    f.obstacle = result.collision->obstacle;
  }
  return f;
}

namespace {

bool is_rejection(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidToken:
    case ErrorKind::InvalidArgument:
    case ErrorKind::EmptyPlan:
    case ErrorKind::InvalidSequence:
    case ErrorKind::UnknownTarget:
      return true;
    default:
      return false;
  }
}

}  // namespace

FeedbackOutcome plan_with_feedback(Planner& planner, const Intention& intention,
                                   const Scene& scene, int max_retries,
                                   const PlannerConfig& config) {
  if (max_retries < 0) throw Error(ErrorKind::InvalidArgument, "max_retries must be >= 0");
  intention.validate();
  for (const auto& t : {intention.t1, intention.t2}) {
    if (t && !scene.find(*t)) {
      throw Error(ErrorKind::UnknownTarget, "object " + std::to_string(*t) + " not in scene");
    }
  }

  std::vector<AttemptRecord> history;
  std::optional<PlannerFeedback> feedback;
  std::optional<CheckResult> last;
  for (int attempt = 1; attempt <= max_retries + 1; ++attempt) {
    AttemptRecord record;
    record.attempt = attempt;
    std::optional<Certification> cert;
    try {
      ActionSequence seq = planner.plan(intention, scene, feedback);
      record.plan_text = serialize_plan(seq);
      cert = certify(std::move(seq), scene, config);
    } catch (const Error& e) {
      if (!is_rejection(e.kind())) throw;
      record.rejection = std::string(to_string(e.kind())) + ": " + e.what();
      PlannerFeedback f;
      f.verdict = PlannerFeedback::Verdict::Rejected;
      f.detail = record.rejection;
      feedback = f;
      last.reset();
      history.push_back(std::move(record));
      continue;
    }
    record.result = cert->result;
    last = cert->result;
    history.push_back(record);
    if (cert->checked) {
      return FeedbackOutcome{std::move(*cert->checked), attempt, std::move(history)};
    }
    feedback = feedback_for(cert->result);
  }
  throw PlanningFailedError("no collision-free plan after " + std::to_string(max_retries + 1) +
                                " attempt(s)",
                            last, std::move(history));
}

nlohmann::json check_report(const CheckResult& result, int attempts) {
  nlohmann::json j;
  j["verdict"] = result.clear() ? "clear" : "collision";
  if (result.collision) {
    j["step"] = result.collision->step;
    j["point"] = vec3_to_json(result.collision->point);
    j["obstacle"] = result.collision->obstacle;
  } else {
    j["step"] = nullptr;
    j["point"] = nullptr;
    j["obstacle"] = nullptr;
  }
  j["attempts"] = attempts;
  return j;
}

std::string action_name(const ActionPrimitive& action) {
  static constexpr const char* kNames[] = {"MOVETO", "PICK",  "PLACE",       "POUR",
                                           "HOME",   "DROP", "OPENGRIPPER", "CLOSEGRIPPER"};
  return kNames[action.index()];
}

nlohmann::json trajectory_dump(const ActionSequence& sequence, const Scene& scene,
                               const PlannerConfig& config) {
  const auto verdicts = step_verdicts(sequence, scene, config);
  nlohmann::json waypoints = nlohmann::json::array();
  nlohmann::json segments = nlohmann::json::array();
  if (!sequence.steps.empty()) waypoints.push_back(vec3_to_json(sequence.steps.front().start));
  for (std::size_t k = 0; k < sequence.steps.size(); ++k) {
    const auto& step = sequence.steps[k];
    if (step.end != step.start) waypoints.push_back(vec3_to_json(step.end));
    nlohmann::json s{{"step", k},
                     {"action", action_name(step.action)},
                     {"start", vec3_to_json(step.start)},
                     {"end", vec3_to_json(step.end)},
                     {"verdict", verdicts[k] ? "collision" : "clear"}};
    if (verdicts[k]) {
      s["obstacle"] = verdicts[k]->obstacle;
      s["point"] = vec3_to_json(verdicts[k]->point);
    }
    segments.push_back(std::move(s));
  }
  return {{"waypoints", waypoints}, {"segments", segments}};
}

}  // namespace hri
