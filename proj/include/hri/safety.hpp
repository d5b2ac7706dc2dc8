#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hri/error.hpp"
#include "hri/planning.hpp"

namespace hri {

/// Axis-aligned box, base frame.
struct Box3 {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();

  static Box3 from_object(const StructuralObject& obj,
                          const AxisConvention& axes = AxisConvention::literal());
  /// Throws InvalidInput on non-finite or negative half extents.
  void validate() const;
  /// Closed-set membership, widened by `tol` on every side.
  bool contains(const Vec3& p, double tol = 0.0) const;
  Box3 expanded(const Vec3& by) const { return {center, half_extents + by}; }
};

/// Closed-set overlap of two boxes.
bool boxes_overlap(const Box3& a, const Box3& b);

struct Obstacle {
  int id = 0;
  Box3 box;
};

struct Collision {
  int step = 0;
  /// Effector position at first contact; lies inside the obstacle expanded
  /// by the moving box.
  Vec3 point = Vec3::Zero();
  int obstacle = 0;
};

struct CheckResult {
  std::optional<Collision> collision;

  bool clear() const { return !collision.has_value(); }
  static CheckResult Clear() { return {}; }
};

/// Slab test of the closed segment p0->p1 against the closed box. Returns the
/// earliest point of the segment inside the box.
std::optional<Vec3> segment_hits_box(const Vec3& p0, const Vec3& p1, const Box3& box);

struct CheckOptions {
  /// Box swept along unattached segments.
  Vec3 gripper_half_extents{0.02, 0.02, 0.02};
  /// Obstacles are grown by this much so that touching within rounding
  /// counts as contact.
  double contact_tolerance = 1e-9;
  /// The manipulated object is already in the gripper at step 0.
  bool attached_at_start = false;

  static CheckOptions from(const PlannerConfig& config);
};

/// One translating segment of the swept volume.
struct SweptSegment {
  int step = 0;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  Vec3 half_extents = Vec3::Zero();
};

/// Attachment follows the primitives: Pick attaches, Place/Drop/OpenGripper
/// detach. Pour and every later attached step use the circumscribed-sphere
/// radius on all axes.
std::vector<SweptSegment> swept_segments(const ActionSequence& sequence, const Box3& manipulated,
                                         const CheckOptions& options = {});

/// First collision of one segment, lowest obstacle position in the list wins.
std::optional<Collision> segment_collision(const SweptSegment& segment,
                                           std::span<const Obstacle> obstacles,
                                           double contact_tolerance = 1e-9);

/// First collision over the whole sequence (lowest step, then lowest
/// obstacle position).
CheckResult check(const ActionSequence& sequence, const Box3& manipulated,
                  std::span<const Obstacle> obstacles, const CheckOptions& options = {});

/// Same, with obstacle indices equal to list positions.
CheckResult check(const ActionSequence& sequence, const Box3& manipulated,
                  const std::vector<Box3>& obstacles, const CheckOptions& options = {});

/// Everything a scene-level check needs: the swept segments with per-step
/// moving boxes, and the obstacle list with picked objects excluded.
struct SceneSweep {
  std::vector<SweptSegment> segments;
  std::vector<Obstacle> obstacles;
  std::vector<int> excluded;
};

/// Obstacles are all objects except the held one and any object a Pick step
/// grasps. Unknown Pick indices throw UnknownTarget.
SceneSweep scene_sweep(const ActionSequence& sequence, const Scene& scene,
                       const PlannerConfig& config = {});

CheckResult check_in_scene(const ActionSequence& sequence, const Scene& scene,
                           const PlannerConfig& config = {});

/// Verdict per step (nullopt = clear); used for the trajectory dump.
std::vector<std::optional<Collision>> step_verdicts(const ActionSequence& sequence,
                                                    const Scene& scene,
                                                    const PlannerConfig& config = {});

/// Stable 64-bit digest of a scene snapshot.
std::uint64_t scene_fingerprint(const Scene& scene);

struct Certification;

/// A sequence that passed the check against one particular scene. Only
/// certify() can make one.
class CheckedSequence {
 public:
  const ActionSequence& sequence() const { return sequence_; }
  std::uint64_t scene_fingerprint() const { return fingerprint_; }

 private:
  CheckedSequence(ActionSequence sequence, std::uint64_t fingerprint)
      : sequence_(std::move(sequence)), fingerprint_(fingerprint) {}
  friend Certification certify(ActionSequence sequence, const Scene& scene,
                               const PlannerConfig& config);

  ActionSequence sequence_;
  std::uint64_t fingerprint_ = 0;
};

struct Certification {
  CheckResult result;
  std::optional<CheckedSequence> checked;
};

/// Validates chaining, runs check_in_scene and, when clear, wraps the
/// sequence.
Certification certify(ActionSequence sequence, const Scene& scene,
                      const PlannerConfig& config = {});

struct AttemptRecord {
  int attempt = 0;
  std::string plan_text;
  /// Set when the plan was checked.
  std::optional<CheckResult> result;
  /// Set when the response was rejected before checking.
  std::string rejection;
};

struct FeedbackOutcome {
  CheckedSequence checked;
  int attempts = 0;
  std::vector<AttemptRecord> history;
};

/// Thrown when every attempt collided or was rejected.
class PlanningFailedError : public Error {
 public:
  PlanningFailedError(const std::string& message, std::optional<CheckResult> last,
                      std::vector<AttemptRecord> history)
      : Error(ErrorKind::PlanningFailed, message),
        last_(std::move(last)),
        history_(std::move(history)) {}

  const std::optional<CheckResult>& last_result() const { return last_; }
  const std::vector<AttemptRecord>& history() const { return history_; }

 private:
  std::optional<CheckResult> last_;
  std::vector<AttemptRecord> history_;
};

/// Plan, check, and on collision re-plan with feedback, at most
/// 1 + max_retries times. A response the plan grammar rejects also uses up
/// an attempt and is fed back as a rejection.
FeedbackOutcome plan_with_feedback(Planner& planner, const Intention& intention,
                                   const Scene& scene, int max_retries,
                                   const PlannerConfig& config = {});

PlannerFeedback feedback_for(const CheckResult& result);

/// {verdict, step, point, obstacle, attempts}
nlohmann::json check_report(const CheckResult& result, int attempts);

/// {waypoints: [...], segments: [{step, action, start, end, verdict, ...}]}
nlohmann::json trajectory_dump(const ActionSequence& sequence, const Scene& scene,
                               const PlannerConfig& config = {});

std::string action_name(const ActionPrimitive& action);

}  // namespace hri
