#pragma once

#include <optional>
#include <vector>

#include "hri/scene.hpp"
#include "hri/segmentation.hpp"

namespace hri {

struct PerceptionOptions {
  AxisConvention axes;
  std::size_t min_mask_pixels = 20;
};

struct PerceivedObject {
  StructuralObject object;
  /// Ground-truth box id when the frame was synthesized.
  std::optional<int> box_id;
  std::size_t skipped_pixels = 0;
};

/// Masks -> camera clouds -> base clouds -> structural objects. Object
/// indices follow mask order after small masks are dropped.
std::vector<PerceivedObject> perceive(const SegmentationFrame& frame, const DepthImage& depth,
                                      const CameraIntrinsics& camera,
                                      const RigidTransform& camera_pose,
                                      const PerceptionOptions& options = {},
                                      const std::vector<int>& box_ids = {});

std::vector<PerceivedObject> perceive_world(const WorldSpec& world,
                                            const PerceptionOptions& options = {});

}  // namespace hri
