#include "hri/deixis.hpp"

#include <algorithm>

#include "hri/error.hpp"

namespace hri {

DeicticRay DeicticRay::through(const Vec3& l1, const Vec3& l2) {
  if (!l1.allFinite() || !l2.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "ray points must be finite");
  }
  if ((l2 - l1).norm() < kMinRayLength) {
    throw Error(ErrorKind::DegenerateRay, "ray points coincide");
  }
  return DeicticRay{l1, l2};
}

DeicticRay forearm_ray(const SkeletonFrame& skeleton) {
  const auto elbow = skeleton.joints.find("right_elbow");
  const auto wrist = skeleton.joints.find("right_wrist");
  if (elbow == skeleton.joints.end()) {
    throw Error(ErrorKind::MissingJoint, "skeleton frame has no right_elbow");
  }
  if (wrist == skeleton.joints.end()) {
    throw Error(ErrorKind::MissingJoint, "skeleton frame has no right_wrist");
  }
  return DeicticRay::through(elbow->second, wrist->second);
}

double point_line_distance(const DeicticRay& ray, const Vec3& point) {
  const Vec3 dir = ray.l2 - ray.l1;
  return dir.cross(ray.l1 - point).norm() / dir.norm();
}

TargetSelection select_target(const DeicticRay& ray, const Scene& scene,
                              const SelectionOptions& options) {
  const Vec3 dir = ray.l2 - ray.l1;
  const double dir_sq = dir.squaredNorm();

  TargetSelection sel;
  for (const auto& obj : scene.interactable) {
    if (options.forward_only) {
      const double t = (obj.centroid - ray.l1).dot(dir) / dir_sq;
      if (t < 1.0) continue;
    }
    sel.distances.emplace_back(obj.index, point_line_distance(ray, obj.centroid));
  }
  if (sel.distances.empty()) {
    throw Error(ErrorKind::NoCandidates, "no interactable object to point at");
  }
  std::sort(sel.distances.begin(), sel.distances.end());

  double best = sel.distances.front().second;
  for (const auto& [idx, d] : sel.distances) best = std::min(best, d);
  // Ascending index order makes the first object inside the tie band the winner.
  for (const auto& [idx, d] : sel.distances) {
    if (d <= best + options.tie_tolerance) {
      sel.index = idx;
      sel.distance = d;
      break;
    }
  }
  return sel;
}

}  // namespace hri
