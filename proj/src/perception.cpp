#include "hri/perception.hpp"

#include "hri/error.hpp"

namespace hri {

std::vector<PerceivedObject> perceive(const SegmentationFrame& frame, const DepthImage& depth,
                                      const CameraIntrinsics& camera,
                                      const RigidTransform& camera_pose,
                                      const PerceptionOptions& options,
                                      const std::vector<int>& box_ids) {
  if (!box_ids.empty() && box_ids.size() != frame.masks.size()) {
    throw Error(ErrorKind::InvalidInput, "box id list does not match mask count");
  }
  std::vector<PerceivedObject> out;
  int next_index = 0;
  for (std::size_t i = 0; i < frame.masks.size(); ++i) {
    const Mask& mask = frame.masks[i];
    if (mask.count() < options.min_mask_pixels) continue;

    PerceivedObject po;
    PointCloud cam;
    try {
      cam = reproject(camera, depth, mask, &po.skipped_pixels);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EmptyCluster) continue;  // mask over a depth hole
      throw;
    }
    po.object = summarize(transform_points(camera_pose, cam), next_index++, options.axes);
    if (!box_ids.empty()) po.box_id = box_ids[i];
    out.push_back(std::move(po));
  }
  return out;
}

std::vector<PerceivedObject> perceive_world(const WorldSpec& world,
                                            const PerceptionOptions& options) {
  const SyntheticRender render = synthesize(world);
  return perceive(render.frame, render.depth, world.camera, world.camera_pose, options,
                  render.box_ids);
}

}  // namespace hri
