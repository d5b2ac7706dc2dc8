#include "hri/segmentation.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "hri/error.hpp"

namespace hri {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Entry parameter of the ray o + t*d (t >= 0) into a closed box, or +inf.
double ray_box_entry(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double t0 = 0.0;
  double t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return kInf;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  return t0;
}

}  // namespace

void WorldSpec::validate() const {
  camera.validate();
  camera_pose.validate();
  std::set<int> ids;
  for (const auto& b : boxes) {
    if (!b.center.allFinite() || !b.extents.allFinite() || (b.extents.array() <= 0.0).any()) {
      throw Error(ErrorKind::InvalidInput,
                  "world box " + std::to_string(b.id) + " needs finite positive extents");
    }
    if (!ids.insert(b.id).second) {
      throw Error(ErrorKind::InvalidInput, "duplicate world box id " + std::to_string(b.id));
    }
  }
}

SyntheticRender synthesize(const WorldSpec& world) {
  world.validate();
  const auto& k = world.camera;
  const RigidTransform base_to_camera = world.camera_pose.inverse();

  struct Bounds {
    Vec3 lo, hi;
  };
  std::vector<Bounds> bounds;
  bounds.reserve(world.boxes.size());
  for (const auto& b : world.boxes) {
    const Vec3 half = 0.5 * b.extents;
    bounds.push_back({b.center - half, b.center + half});
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 p(corner & 1 ? bounds.back().hi.x() : bounds.back().lo.x(),
                   corner & 2 ? bounds.back().hi.y() : bounds.back().lo.y(),
                   corner & 4 ? bounds.back().hi.z() : bounds.back().lo.z());
      if (base_to_camera.apply(p).z() <= 1e-6) {
        throw Error(ErrorKind::InvalidInput,
                    "world box " + std::to_string(b.id) + " is not in front of the camera");
      }
    }
  }

  SyntheticRender out;
  out.depth = DepthImage(k.width, k.height, 0.0);
  std::vector<int> owner(static_cast<std::size_t>(k.width) * k.height, -1);
  const Vec3 origin = world.camera_pose.translation;

  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      // Camera-frame direction has unit z, so the ray parameter is the depth.
      const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Vec3 dir = world.camera_pose.rotation * dir_cam;
      double best = kInf;
      int best_box = -1;
      for (std::size_t i = 0; i < bounds.size(); ++i) {
        const double t = ray_box_entry(origin, dir, bounds[i].lo, bounds[i].hi);
        if (t < best) {
          best = t;
          best_box = static_cast<int>(i);
        }
      }
      if (best_box >= 0) {
        out.depth.at(u, v) = best;
        owner[static_cast<std::size_t>(v) * k.width + u] = best_box;
      }
    }
  }

  out.frame.width = k.width;
  out.frame.height = k.height;
  out.frame.source = MaskSource::Synthetic;
  for (std::size_t i = 0; i < world.boxes.size(); ++i) {
    Mask mask(k.width, k.height);
    bool any = false;
    for (std::size_t p = 0; p < owner.size(); ++p) {
      if (owner[p] == static_cast<int>(i)) {
        mask.bits[p] = 1;
        any = true;
      }
    }
    if (any) {
      out.frame.masks.push_back(std::move(mask));
      out.box_ids.push_back(world.boxes[i].id);
    }
  }
  return out;
}

std::vector<std::int64_t> rle_encode(const Mask& mask) {
  std::vector<std::int64_t> runs;
  std::uint8_t current = 0;
  std::int64_t length = 0;
  for (int u = 0; u < mask.width; ++u) {
    for (int v = 0; v < mask.height; ++v) {
      const std::uint8_t bit = mask.at(u, v) ? 1 : 0;
      if (bit != current) {
        runs.push_back(length);
        current = bit;
        length = 0;
      }
      ++length;
    }
  }
  runs.push_back(length);
  return runs;
}

Mask rle_decode(std::span<const std::int64_t> runs, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorKind::ProtocolError, "mask dimensions must be positive");
  }
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  std::int64_t sum = 0;
  for (const auto r : runs) {
    if (r < 0) throw Error(ErrorKind::ProtocolError, "negative RLE run");
    sum += r;
    if (sum > total) break;
  }
  if (sum != total) {
    throw Error(ErrorKind::ProtocolError,
                "RLE runs total " + std::to_string(sum) + ", expected " + std::to_string(total));
  }

  Mask mask(width, height);
  std::int64_t pos = 0;
  bool on = false;
  for (const auto r : runs) {
    if (on) {
      for (std::int64_t i = pos; i < pos + r; ++i) {
        // column-major position -> (u, v)
        mask.set(static_cast<int>(i / height), static_cast<int>(i % height));
      }
    }
    pos += r;
    on = !on;
  }
  return mask;
}

SegmentationFrame decode_external(const nlohmann::json& payload, int width, int height) {
  if (!payload.is_object() || !payload.contains("masks") || !payload["masks"].is_array()) {
    throw Error(ErrorKind::ProtocolError, "segmenter response lacks a masks array");
  }
  SegmentationFrame frame;
  frame.width = width;
  frame.height = height;
  frame.source = MaskSource::External;
  for (const auto& entry : payload["masks"]) {
    if (!entry.is_object() || !entry.contains("rle") || !entry["rle"].is_array()) {
      throw Error(ErrorKind::ProtocolError, "mask entry lacks an rle array");
    }
    std::vector<std::int64_t> runs;
    runs.reserve(entry["rle"].size());
    for (const auto& r : entry["rle"]) {
      if (!r.is_number_integer()) throw Error(ErrorKind::ProtocolError, "non-integer RLE run");
      runs.push_back(r.get<std::int64_t>());
    }
    Mask mask = rle_decode(runs, width, height);
    if (mask.count() > 0) frame.masks.push_back(std::move(mask));
  }
  return frame;
}

SegmentationFrame decode_external(const std::string& payload, int width, int height) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ProtocolError, std::string("segmenter response: ") + e.what());
  }
  return decode_external(j, width, height);
}

SegmentationFrame drop_small_masks(SegmentationFrame frame, std::size_t min_pixels) {
  std::erase_if(frame.masks, [min_pixels](const Mask& m) { return m.count() < min_pixels; });
  return frame;
}

nlohmann::json encode_external(const std::string& frame_id, const SegmentationFrame& frame) {
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& m : frame.masks) masks.push_back({{"rle", rle_encode(m)}});
  return {{"frame_id", frame_id}, {"masks", masks}};
}

}  // namespace hri
