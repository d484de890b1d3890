#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "panfuse/camera.hpp"
#include "panfuse/image.hpp"
#include "panfuse/mask.hpp"

namespace panfuse {

/// One RGB-D observation: hole-filled depth, refined instance masks, camera
/// model and camera-to-world pose.
struct LabeledRgbdFrame {
  DepthMap depth;
  std::vector<InstanceMask> masks;
  CameraIntrinsics intrinsics;
  Pose pose;
  std::optional<RgbImage> rgb;

  void validate() const {
    intrinsics.validate();
    if (depth.width() != intrinsics.width || depth.height() != intrinsics.height)
      throw std::invalid_argument("LabeledRgbdFrame: depth/intrinsics dimensions differ");
    for (const InstanceMask& m : masks)
      if (!m.bitmap.same_size(depth))
        throw std::invalid_argument("LabeledRgbdFrame: mask/depth dimensions differ");
    if (rgb && !rgb->same_size(depth))
      throw std::invalid_argument("LabeledRgbdFrame: rgb/depth dimensions differ");
    if (!pose.is_rigid())
      throw std::invalid_argument("LabeledRgbdFrame: pose rotation is not orthonormal");
  }
};

}  // namespace panfuse
