#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hri/scene.hpp"

namespace hri {

struct SkeletonFrame {
  std::map<std::string, Vec3> joints;  // base frame, meters
  double timestamp = 0.0;
};

/// Pointing line through two distinct points (elbow, wrist).
struct DeicticRay {
  Vec3 l1 = Vec3::Zero();
  Vec3 l2 = Vec3::UnitX();

  /// Throws DegenerateRay when the points are closer than 1e-6 m.
  static DeicticRay through(const Vec3& l1, const Vec3& l2);
};

struct TargetSelection {
  int index = -1;
  double distance = 0.0;
  /// (object index, distance) for every candidate considered, ascending index.
  std::vector<std::pair<int, double>> distances;
};

struct SelectionOptions {
  /// Keep only objects beyond the wrist (projection parameter t >= 1).
  bool forward_only = false;
  /// Distances within this band of the minimum are ties, resolved by lowest
  /// object index.
  double tie_tolerance = 1e-9;
};

inline constexpr double kMinRayLength = 1e-6;

/// Elbow -> wrist of the right arm.
DeicticRay forearm_ray(const SkeletonFrame& skeleton);

/// |(l2 - l1) x (l1 - p)| / |l2 - l1|
double point_line_distance(const DeicticRay& ray, const Vec3& point);

/// Nearest interactable centroid to the pointing line.
TargetSelection select_target(const DeicticRay& ray, const Scene& scene,
                              const SelectionOptions& options = {});

}  // namespace hri
