#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hri/scene.hpp"

namespace hri {

/// Axis-aligned ground-truth box in the base frame. `extents` are full sizes.
struct WorldBox {
  int id = 0;
  Vec3 center = Vec3::Zero();
  Vec3 extents = Vec3::Zero();
};

struct WorldSpec {
  std::vector<WorldBox> boxes;
  CameraIntrinsics camera = CameraIntrinsics::vga();
  /// Camera pose in the base frame (maps camera points to base points).
  RigidTransform camera_pose;

  void validate() const;
};

enum class MaskSource { Synthetic, External };

/// Instance masks for one frame. There is deliberately no label field:
/// segmenter class names are untrusted and never reach the pipeline.
struct SegmentationFrame {
  int width = 0;
  int height = 0;
  std::vector<Mask> masks;
  MaskSource source = MaskSource::Synthetic;
};

struct SyntheticRender {
  DepthImage depth;
  SegmentationFrame frame;
  /// Ground-truth box id behind each mask; for scoring only.
  std::vector<int> box_ids;
};

/// Z-buffer render of the world's boxes: depth plus one mask per visible box,
/// occlusion resolved by the nearest surface.
SyntheticRender synthesize(const WorldSpec& world);

/// Column-major run lengths starting with a run of zeros (possibly empty).
std::vector<std::int64_t> rle_encode(const Mask& mask);
/// Throws ProtocolError when runs are negative or do not total width*height.
Mask rle_decode(std::span<const std::int64_t> runs, int width, int height);

/// Decodes a segmenter response {frame_id, masks:[{rle:[...], label?}]} for
/// an image of the given size. Labels are read past and dropped; empty masks
/// are omitted.
SegmentationFrame decode_external(const nlohmann::json& payload, int width, int height);
SegmentationFrame decode_external(const std::string& payload, int width, int height);

/// Removes masks below `min_pixels` set pixels.
SegmentationFrame drop_small_masks(SegmentationFrame frame, std::size_t min_pixels = 20);

/// Inverse of decode_external, used by test doubles and the bundled fake
/// segmenter.
nlohmann::json encode_external(const std::string& frame_id, const SegmentationFrame& frame);

}  // namespace hri
