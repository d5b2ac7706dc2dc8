#include "hri/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "hri/error.hpp"

namespace hri {

namespace {

constexpr double kRotationTol = 1e-9;

bool finite(const Vec3& p) { return p.allFinite(); }

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::InvalidInput, "camera image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorKind::InvalidInput, "principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::vga() { return {525.0, 525.0, 319.5, 239.5, 640, 480}; }

void RigidTransform::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "transform has non-finite entries");
  }
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  if (ortho > kRotationTol) {
    throw Error(ErrorKind::InvalidInput, "rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > kRotationTol) {
    throw Error(ErrorKind::InvalidInput, "rotation determinant is not +1");
  }
}

RigidTransform RigidTransform::make(const Eigen::Matrix3d& rotation, const Vec3& translation) {
  RigidTransform t{rotation, translation};
  t.validate();
  return t;
}

RigidTransform RigidTransform::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    throw Error(ErrorKind::InvalidInput, "look_at: view direction parallel to up vector");
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  RigidTransform t;
  t.rotation.col(0) = right;
  t.rotation.col(1) = down;
  t.rotation.col(2) = forward;
  t.translation = eye;
  return t;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform t;
  t.rotation = rotation.transpose();
  t.translation = -(t.rotation * translation);
  return t;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform t;
  t.rotation = rotation * rhs.rotation;
  t.translation = rotation * rhs.translation + translation;
  return t;
}

DepthImage DepthImage::from_units(int w, int h, std::span<const std::uint16_t> raw,
                                  double unit_scale) {
  if (w <= 0 || h <= 0 || raw.size() != static_cast<std::size_t>(w) * h) {
    throw Error(ErrorKind::InvalidInput, "depth buffer size does not match width x height");
  }
  if (!(unit_scale > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "depth unit scale must be positive");
  }
  DepthImage img(w, h);
  std::transform(raw.begin(), raw.end(), img.meters.begin(),
                 [unit_scale](std::uint16_t d) { return d * unit_scale; });
  return img;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

void AxisConvention::validate() const {
  const std::set<int> axes{width_axis, height_axis, thickness_axis};
  if (axes != std::set<int>{0, 1, 2} || up_axis < 0 || up_axis > 2) {
    throw Error(ErrorKind::InvalidInput, "axis convention must be a permutation of x, y, z");
  }
}

Vec3 AxisConvention::extents_xyz(const StructuralObject& obj) const {
  Vec3 e;
  e[width_axis] = obj.width;
  e[height_axis] = obj.height;
  e[thickness_axis] = obj.thickness;
  return e;
}

double AxisConvention::top(const StructuralObject& obj) const {
  return obj.centroid[up_axis] + 0.5 * extents_xyz(obj)[up_axis];
}

void EndEffectorState::validate(double gripper_max_width) const {
  if (!finite(position)) {
    throw Error(ErrorKind::InvalidInput, "effector position is not finite");
  }
  if (std::abs(orientation.norm() - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidInput, "effector orientation is not a unit quaternion");
  }
  if (gripper_opening < 0.0 || gripper_opening > gripper_max_width) {
    throw Error(ErrorKind::InvalidInput, "gripper opening outside [0, max width]");
  }
}

const StructuralObject* Scene::find(int index) const {
  for (const auto* list : {&interactable, &obstacles}) {
    for (const auto& obj : *list) {
      if (obj.index == index) return &obj;
    }
  }
  return nullptr;
}

StructuralObject* Scene::find(int index) {
  return const_cast<StructuralObject*>(std::as_const(*this).find(index));
}

bool Scene::is_interactable(int index) const {
  return std::any_of(interactable.begin(), interactable.end(),
                     [index](const StructuralObject& o) { return o.index == index; });
}

std::vector<StructuralObject> Scene::all_objects() const {
  std::vector<StructuralObject> all = interactable;
  all.insert(all.end(), obstacles.begin(), obstacles.end());
  return all;
}

void Scene::validate() const {
  std::set<int> seen;
  for (const auto& obj : all_objects()) {
    if (!seen.insert(obj.index).second) {
      throw Error(ErrorKind::InvalidInput,
                  "duplicate object index " + std::to_string(obj.index));
    }
  }
  for (const auto& obj : interactable) {
    if (obj.width > gripper_max_width) {
      throw Error(ErrorKind::InvalidInput, "interactable object wider than the gripper");
    }
  }
  effector.validate(gripper_max_width);
}

PointCloud reproject(const CameraIntrinsics& intrinsics, const DepthImage& depth,
                     const Mask& mask, std::size_t* skipped) {
  intrinsics.validate();
  if (depth.width != intrinsics.width || depth.height != intrinsics.height ||
      mask.width != intrinsics.width || mask.height != intrinsics.height) {
    throw Error(ErrorKind::InvalidInput, "depth, mask and intrinsics dimensions differ");
  }

  PointCloud cloud;
  cloud.frame = Frame::Camera;
  std::size_t dropped = 0;
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u) {
      if (!mask.at(u, v)) continue;
      const double z = depth.at(u, v);
      if (!std::isfinite(z) || z <= 0.0) {
        ++dropped;
        continue;
      }
      cloud.points.emplace_back((u - intrinsics.cx) * z / intrinsics.fx,
                                (v - intrinsics.cy) * z / intrinsics.fy, z);
    }
  }
  if (skipped) *skipped = dropped;
  if (cloud.points.empty()) {
    throw Error(ErrorKind::EmptyCluster, "mask has no pixel with valid depth");
  }
  return cloud;
}

PointCloud transform_points(const RigidTransform& camera_to_base, const PointCloud& cloud) {
  if (cloud.frame != Frame::Camera) {
    throw Error(ErrorKind::InvalidInput, "transform_points expects a camera-frame cloud");
  }
  PointCloud out;
  out.frame = Frame::Base;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(camera_to_base.apply(p));
  return out;
}

StructuralObject summarize(const PointCloud& cloud, int index, const AxisConvention& axes) {
  if (cloud.points.empty()) {
    throw Error(ErrorKind::EmptyCluster, "cannot summarize an empty cloud");
  }
  axes.validate();

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 sum = Vec3::Zero();
  for (const auto& p : cloud.points) {
    if (!finite(p)) throw Error(ErrorKind::InvalidInput, "cloud has non-finite point");
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
    sum += p;
  }
  const Vec3 span = hi - lo;

  StructuralObject obj;
  obj.index = index;
  obj.centroid = sum / static_cast<double>(cloud.points.size());
  // Rounding in the mean can leave it a ulp outside [lo, hi].
  obj.centroid = obj.centroid.cwiseMax(lo).cwiseMin(hi);
  obj.width = span[axes.width_axis];
  obj.height = span[axes.height_axis];
  obj.thickness = span[axes.thickness_axis];
  return obj;
}

Scene build_scene(std::span<const StructuralObject> objects, const EndEffectorState& effector,
                  double gripper_max_width) {
  if (!(gripper_max_width > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "gripper max width must be positive");
  }
  Scene scene;
  scene.effector = effector;
  scene.gripper_max_width = gripper_max_width;

  std::set<int> seen;
  for (const auto& obj : objects) {
    if (!seen.insert(obj.index).second) {
      throw Error(ErrorKind::InvalidInput,
                  "duplicate object index " + std::to_string(obj.index));
    }
    if (obj.width <= gripper_max_width) {
      scene.interactable.push_back(obj);
    } else {
      scene.obstacles.push_back(obj);
    }
  }
  scene.effector.validate(gripper_max_width);
  return scene;
}

}  // namespace hri
