#pragma once
// Reference computations and random generators shared by the unit tests, the
// acceptance binary and `hri bench-oracle`. Nothing here is used by the
// pipeline itself.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "hri/deixis.hpp"
#include "hri/planning.hpp"
#include "hri/safety.hpp"
#include "hri/segmentation.hpp"

namespace hri::testkit {

/// Portable uniform draws on top of mt19937_64 (the std distributions are
/// not bit-identical across standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer in [lo, hi].
  int integer(int lo, int hi) {
    return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  bool chance(double p) { return uniform() < p; }
  Vec3 vec(double lo, double hi) { return {uniform(lo, hi), uniform(lo, hi), uniform(lo, hi)}; }
  Vec3 unit_vector();
  Eigen::Matrix3d rotation();

 private:
  std::mt19937_64 engine_;
};

// ---- deixis ----------------------------------------------------------------

/// Minimum of |l1 + t (l2 - l1) - p| over a dense grid of t whose spacing
/// is at most `spacing` meters along the line, refined by golden-section
/// search on the best cell.
double sweep_line_distance(const Vec3& l1, const Vec3& l2, const Vec3& p, double spacing = 1e-3);

/// Distance by orthogonal projection in long double.
long double projection_distance(const Vec3& l1, const Vec3& l2, const Vec3& p);

/// Argmin over interactable objects by projection_distance, ties within
/// `tie_tolerance` to the lowest index. -1 when there are no candidates.
int brute_force_target(const DeicticRay& ray, const Scene& scene, double tie_tolerance = 1e-9);

/// Scene of n interactable objects; with `make_tie`, a second object is the
/// mirror image of the first across the ray so both are equally close.
struct SelectionCase {
  DeicticRay ray;
  Scene scene;
  bool tie = false;
};
SelectionCase random_selection_case(Rng& rng, int n, bool make_tie);

// ---- scene geometry --------------------------------------------------------

struct StreamingSummary {
  Vec3 mean = Vec3::Zero();
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

/// Compensated (Neumaier) per-axis sums in long double plus running min/max.
StreamingSummary streaming_summary(const PointCloud& cloud);

/// Points on a regular grid over the six faces of an axis-aligned box. The
/// grid is symmetric, so the exact mean is the box center.
PointCloud box_surface_cloud(const Vec3& center, const Vec3& extents, int per_edge);

RigidTransform random_transform(Rng& rng, double max_translation = 2.0);

// ---- swept volume ----------------------------------------------------------

struct SweepCase {
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  Vec3 moving_half = Vec3::Zero();
  std::vector<Box3> obstacles;
};

/// Random case; about a third are built to graze an obstacle face exactly.
SweepCase random_sweep_case(Rng& rng);

/// Gap between two boxes: the largest per-axis separation; <= 0 means the
/// closed boxes overlap.
double box_gap(const Box3& a, const Box3& b);

struct SamplingVerdict {
  bool hit = false;
  /// Lowest obstacle position among the sampled hits.
  int obstacle = -1;
  /// Minimum gap along the whole segment over all obstacles (convex in the
  /// path parameter per obstacle, refined by ternary search).
  double min_gap = 0.0;
  std::size_t samples = 0;
};

/// Steps the moving box along start->end at most `step` meters apart and
/// tests closed overlap against every obstacle.
SamplingVerdict sample_sweep(const SweepCase& c, double step = 1e-3);

/// Dense-sampling check of a whole scene sweep (all segments).
SamplingVerdict sample_scene_sweep(const SceneSweep& sweep, double step = 1e-3);

// ---- planning --------------------------------------------------------------

struct PlanningCase {
  Scene scene;
  Intention intention;
};

/// Source and destination are interactable, 0-3 further objects stand
/// anywhere except over the source and destination columns; some are taller
/// than the default travel height. `pour` picks pour instead of place.
PlanningCase random_planning_case(Rng& rng, bool pour);

/// Plans that ignore every obstacle with probability q per call, otherwise
/// plan like the deterministic planner.
class FaultInjectedPlanner : public Planner {
 public:
  FaultInjectedPlanner(double q, std::uint64_t seed, PlannerConfig config = {})
      : q_(q), rng_(seed), inner_(std::move(config)) {}

  ActionSequence plan(const Intention& intention, const Scene& scene,
                      const std::optional<PlannerFeedback>& feedback) override;
  std::string name() const override { return "fault-injected"; }

 private:
  double q_;
  Rng rng_;
  DeterministicPlanner inner_;
};

/// Returns scripted plan texts in order (the last one repeats) and records
/// the feedback it was given.
class ScriptedPlanner : public Planner {
 public:
  explicit ScriptedPlanner(std::vector<std::string> texts) : texts_(std::move(texts)) {}

  ActionSequence plan(const Intention& intention, const Scene& scene,
                      const std::optional<PlannerFeedback>& feedback) override;
  std::string name() const override { return "scripted"; }

  int calls() const { return calls_; }
  const std::vector<std::optional<PlannerFeedback>>& feedback() const { return feedback_; }

 private:
  std::vector<std::string> texts_;
  int calls_ = 0;
  std::vector<std::optional<PlannerFeedback>> feedback_;
};

// ---- perception ------------------------------------------------------------

/// 1-6 disjoint boxes resting on z = 0 inside a 0.6 m x 0.6 m patch, camera
/// 1-2 m away looking down at it.
WorldSpec random_world(Rng& rng);

}  // namespace hri::testkit
