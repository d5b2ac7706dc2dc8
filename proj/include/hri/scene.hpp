#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace hri {

using Vec3 = Eigen::Vector3d;

/// Pinhole model. Pixel (u, v) is column, row.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;

  /// 640x480, f = 525 px, principal point at the image centre.
  static CameraIntrinsics vga();
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  /// Throws InvalidInput unless `rotation` is orthonormal with det +1 (1e-9).
  static RigidTransform make(const Eigen::Matrix3d& rotation, const Vec3& translation);

  /// Camera-to-base pose of a camera at `eye` looking at `target`. Camera
  /// axes follow the optical convention: +z forward, +x right, +y down.
  static RigidTransform look_at(const Vec3& eye, const Vec3& target,
                                const Vec3& up = Vec3::UnitZ());

  void validate() const;
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
};

enum class Frame { Camera, Base };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::Camera;
};

/// Row-major depth in meters. Non-positive or non-finite entries are holes.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> meters;

  DepthImage() = default;
  DepthImage(int w, int h, double fill = 0.0)
      : width(w), height(h), meters(static_cast<std::size_t>(w) * h, fill) {}

  /// Converts integer depth (e.g. millimetres) using `unit_scale` meters/unit.
  static DepthImage from_units(int w, int h, std::span<const std::uint16_t> raw,
                               double unit_scale);

  double& at(int u, int v) { return meters[static_cast<std::size_t>(v) * width + u]; }
  double at(int u, int v) const { return meters[static_cast<std::size_t>(v) * width + u]; }
};

/// Row-major binary mask.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v, bool on = true) {
    bits[static_cast<std::size_t>(v) * width + u] = on ? 1 : 0;
  }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

/// Per-object structural record: index, width/height/thickness, centroid
/// (base frame).
struct StructuralObject {
  int index = 0;
  double width = 0.0;
  double height = 0.0;
  double thickness = 0.0;
  Vec3 centroid = Vec3::Zero();
};

/// Which base axis each extent is measured along, and which axis points up.
/// The default measures width on x, height on y and thickness on z, with z up.
struct AxisConvention {
  int width_axis = 0;
  int height_axis = 1;
  int thickness_axis = 2;
  int up_axis = 2;

  static AxisConvention literal() { return {}; }
  /// Height measured along the vertical for z-up bases.
  static AxisConvention z_up() { return {0, 2, 1, 2}; }

  void validate() const;
  /// Extents re-expressed per base axis (x, y, z).
  Vec3 extents_xyz(const StructuralObject& obj) const;
  double top(const StructuralObject& obj) const;
};

struct EndEffectorState {
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  double gripper_opening = 0.0;

  void validate(double gripper_max_width) const;
};

/// Environment tuple: structural objects plus effector state. `held` and
/// `pour_angles_deg` are execution state written by the simulator.
struct Scene {
  std::vector<StructuralObject> interactable;
  std::vector<StructuralObject> obstacles;
  EndEffectorState effector;
  double gripper_max_width = 0.085;
  std::optional<int> held;
  std::map<int, double> pour_angles_deg;

  const StructuralObject* find(int index) const;
  StructuralObject* find(int index);
  bool is_interactable(int index) const;
  /// Interactable then obstacles, each in stored order.
  std::vector<StructuralObject> all_objects() const;

  void validate() const;
};

/// Back-projects masked pixels with valid depth into the camera frame.
/// `skipped`, when given, receives the number of masked pixels dropped for
/// invalid depth.
PointCloud reproject(const CameraIntrinsics& intrinsics, const DepthImage& depth,
                     const Mask& mask, std::size_t* skipped = nullptr);

PointCloud transform_points(const RigidTransform& camera_to_base, const PointCloud& cloud);

StructuralObject summarize(const PointCloud& cloud, int index,
                           const AxisConvention& axes = AxisConvention::literal());

/// Splits objects by the gripper width: w <= gripper_max_width is
/// interactable, anything wider is kept as an obstacle.
Scene build_scene(std::span<const StructuralObject> objects, const EndEffectorState& effector,
                  double gripper_max_width);

}  // namespace hri
