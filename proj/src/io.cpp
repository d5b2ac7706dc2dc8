#include "hri/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hri/error.hpp"

namespace hri {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::InvalidInput, what); }

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) bad("expected a 3-vector");
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) bad("3-vector has non-finite entries");
  return v;
}

json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
          {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  try {
    CameraIntrinsics k{j.at("fx").get<double>(),  j.at("fy").get<double>(),
                       j.at("cx").get<double>(),  j.at("cy").get<double>(),
                       j.at("width").get<int>(),  j.at("height").get<int>()};
    k.validate();
    return k;
  } catch (const json::exception& e) {
    bad(std::string("intrinsics: ") + e.what());
  }
}

json to_json(const RigidTransform& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2)});
  }
  return {{"rotation", rows}, {"translation", vec3_to_json(t.translation)}};
}

RigidTransform transform_from_json(const json& j) {
  try {
    if (j.contains("look_at")) {
      const auto& la = j.at("look_at");
      const Vec3 up = la.contains("up") ? vec3_from_json(la.at("up")) : Vec3::UnitZ();
      return RigidTransform::look_at(vec3_from_json(la.at("eye")),
                                     vec3_from_json(la.at("target")), up);
    }
    const Vec3 translation =
        j.contains("translation") ? vec3_from_json(j.at("translation")) : Vec3::Zero();
    if (j.contains("quaternion")) {
      const auto& q = j.at("quaternion");
      Eigen::Quaterniond quat(q.at(3).get<double>(), q.at(0).get<double>(),
                              q.at(1).get<double>(), q.at(2).get<double>());
      if (std::abs(quat.norm() - 1.0) > 1e-6) bad("transform quaternion is not unit length");
      quat.normalize();
      return RigidTransform::make(quat.toRotationMatrix(), translation);
    }
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    if (j.contains("rotation")) {
      const auto& rows = j.at("rotation");
      if (rows.size() != 3) bad("rotation must have 3 rows");
      for (int i = 0; i < 3; ++i) {
        if (rows[i].size() != 3) bad("rotation rows must have 3 entries");
        for (int c = 0; c < 3; ++c) r(i, c) = rows[i][c].get<double>();
      }
    }
    return RigidTransform::make(r, translation);
  } catch (const json::exception& e) {
    bad(std::string("transform: ") + e.what());
  }
}

json to_json(const EndEffectorState& e) {
  const auto& q = e.orientation;
  return {{"pose", {e.position.x(), e.position.y(), e.position.z(), q.x(), q.y(), q.z(), q.w()}},
          {"gripper_opening", e.gripper_opening}};
}

EndEffectorState effector_from_json(const json& j) {
  try {
    const auto& pose = j.at("pose");
    if (pose.size() != 7) bad("effector pose must have 7 entries [x,y,z,qx,qy,qz,qw]");
    EndEffectorState e;
    e.position = Vec3(pose[0].get<double>(), pose[1].get<double>(), pose[2].get<double>());
    e.orientation = Eigen::Quaterniond(pose[6].get<double>(), pose[3].get<double>(),
                                       pose[4].get<double>(), pose[5].get<double>());
    e.gripper_opening = j.value("gripper_opening", 0.0);
    return e;
  } catch (const json::exception& ex) {
    bad(std::string("effector: ") + ex.what());
  }
}

json to_json(const Scene& scene) {
  json objects = json::array();
  auto emit = [&objects](const StructuralObject& o, bool interactable) {
    objects.push_back({{"index", o.index},
                       {"w", o.width},
                       {"h", o.height},
                       {"d", o.thickness},
                       {"centroid", vec3_to_json(o.centroid)},
                       {"interactable", interactable}});
  };
  for (const auto& o : scene.interactable) emit(o, true);
  for (const auto& o : scene.obstacles) emit(o, false);

  json j = {{"objects", objects},
            {"effector", to_json(scene.effector)},
            {"gripper_max_width", scene.gripper_max_width}};
  if (scene.held) j["held"] = *scene.held;
  if (!scene.pour_angles_deg.empty()) {
    json angles = json::object();
    for (const auto& [idx, deg] : scene.pour_angles_deg) angles[std::to_string(idx)] = deg;
    j["pour_angles_deg"] = angles;
  }
  return j;
}

Scene scene_from_json(const json& j) {
  try {
    Scene scene;
    scene.gripper_max_width = j.at("gripper_max_width").get<double>();
    scene.effector = effector_from_json(j.at("effector"));
    for (const auto& o : j.at("objects")) {
      StructuralObject obj;
      obj.index = o.at("index").get<int>();
      obj.width = o.at("w").get<double>();
      obj.height = o.at("h").get<double>();
      obj.thickness = o.at("d").get<double>();
      obj.centroid = vec3_from_json(o.at("centroid"));
      if (obj.width < 0 || obj.height < 0 || obj.thickness < 0) bad("negative object extent");
      (o.at("interactable").get<bool>() ? scene.interactable : scene.obstacles).push_back(obj);
    }
    if (j.contains("held") && !j["held"].is_null()) scene.held = j["held"].get<int>();
    if (j.contains("pour_angles_deg")) {
      for (const auto& [key, val] : j["pour_angles_deg"].items()) {
        scene.pour_angles_deg[std::stoi(key)] = val.get<double>();
      }
    }
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    bad(std::string("scene snapshot: ") + e.what());
  }
}

json to_json(const WorldSpec& world) {
  json boxes = json::array();
  for (const auto& b : world.boxes) {
    boxes.push_back({{"id", b.id}, {"center", vec3_to_json(b.center)},
                     {"extents", vec3_to_json(b.extents)}});
  }
  return {{"camera", to_json(world.camera)},
          {"camera_pose", to_json(world.camera_pose)},
          {"boxes", boxes}};
}

WorldSpec world_from_json(const json& j) {
  try {
    WorldSpec w;
    if (j.contains("camera")) w.camera = intrinsics_from_json(j.at("camera"));
    w.camera_pose = transform_from_json(j.at("camera_pose"));
    for (const auto& b : j.at("boxes")) {
      w.boxes.push_back({b.at("id").get<int>(), vec3_from_json(b.at("center")),
                         vec3_from_json(b.at("extents"))});
    }
    w.validate();
    return w;
  } catch (const json::exception& e) {
    bad(std::string("world: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::parse_error& e) {
    bad(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) bad("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

DepthImage read_pgm16(const std::filesystem::path& path, double unit_scale) {
  const std::string data = slurp(path);
  std::size_t pos = 0;
  // Header tokens are whitespace separated; '#' starts a comment line.
  auto next_token = [&]() {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };

  if (next_token() != "P5") bad(path.string() + ": not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    bad(path.string() + ": malformed PGM header");
  }
  ++pos;  // single whitespace byte before the raster
  if (maxval <= 255 || maxval > 65535) bad(path.string() + ": PGM is not 16-bit");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width <= 0 || height <= 0 || data.size() - pos < 2 * n) {
    bad(path.string() + ": truncated PGM raster");
  }
  std::vector<std::uint16_t> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = static_cast<unsigned char>(data[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(data[pos + 2 * i + 1]);
    raw[i] = static_cast<std::uint16_t>((hi << 8) | lo);
  }
  return DepthImage::from_units(width, height, raw, unit_scale);
}

void write_pgm16(const std::filesystem::path& path, const DepthImage& depth, double unit_scale) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("cannot write " + path.string());
  out << "P5\n" << depth.width << ' ' << depth.height << "\n65535\n";
  for (double m : depth.meters) {
    double units = std::isfinite(m) && m > 0.0 ? std::round(m / unit_scale) : 0.0;
    units = std::min(units, 65535.0);
    const auto v = static_cast<std::uint16_t>(units);
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

DepthImage read_raw_depth(const std::filesystem::path& raw_path,
                          const std::filesystem::path& sidecar_path) {
  const json meta = read_json_file(sidecar_path);
  int width = 0, height = 0;
  double scale = 1.0;
  std::string dtype;
  try {
    width = meta.at("width").get<int>();
    height = meta.at("height").get<int>();
    scale = meta.value("unit_scale", 1.0);
    dtype = meta.value("dtype", std::string("uint16"));
  } catch (const json::exception& e) {
    bad(std::string("depth sidecar: ") + e.what());
  }
  const std::string data = slurp(raw_path);
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (dtype == "uint16") {
    if (data.size() != 2 * n) bad("raw depth size does not match sidecar");
    std::vector<std::uint16_t> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] = static_cast<std::uint16_t>(static_cast<unsigned char>(data[2 * i]) |
                                          (static_cast<unsigned char>(data[2 * i + 1]) << 8));
    }
    return DepthImage::from_units(width, height, raw, scale);
  }
  if (dtype == "float32") {
    if (data.size() != 4 * n) bad("raw depth size does not match sidecar");
    DepthImage img(width, height);
    for (std::size_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, data.data() + 4 * i, sizeof f);
      img.meters[i] = static_cast<double>(f) * scale;
    }
    return img;
  }
  bad("unsupported depth dtype '" + dtype + "'");
}

}  // namespace hri
