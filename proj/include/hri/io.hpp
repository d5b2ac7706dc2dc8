#pragma once

// JSON conversions and file ingestion shared by the CLI, the HTTP service and
// scenario files. Lengths are meters and angles radians unless a field name
// says otherwise.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hri/scene.hpp"
#include "hri/segmentation.hpp"

namespace hri {

using json = nlohmann::json;

json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);

json to_json(const CameraIntrinsics& k);
CameraIntrinsics intrinsics_from_json(const json& j);

/// Accepts {rotation: 3x3 rows, translation}, {quaternion: [x,y,z,w],
/// translation} or {look_at: {eye, target, up?}}. Always writes the matrix form.
json to_json(const RigidTransform& t);
RigidTransform transform_from_json(const json& j);

/// Effector pose is [x, y, z, qx, qy, qz, qw].
json to_json(const EndEffectorState& e);
EndEffectorState effector_from_json(const json& j);

/// Scene snapshot:
/// {objects:[{index,w,h,d,centroid,interactable}], effector, gripper_max_width,
///  held?, pour_angles_deg?}
json to_json(const Scene& scene);
Scene scene_from_json(const json& j);

/// {camera?, camera_pose, boxes:[{id, center, extents}]}; camera defaults to VGA.
json to_json(const WorldSpec& world);
WorldSpec world_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

/// Binary 16-bit PGM (P5, maxval > 255, big-endian samples).
DepthImage read_pgm16(const std::filesystem::path& path, double unit_scale);
void write_pgm16(const std::filesystem::path& path, const DepthImage& depth, double unit_scale);

/// Raw little-endian buffer with a JSON sidecar {width, height, unit_scale,
/// dtype: "uint16" | "float32"}.
DepthImage read_raw_depth(const std::filesystem::path& raw_path,
                          const std::filesystem::path& sidecar_path);

}  // namespace hri
