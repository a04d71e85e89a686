#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/vec.hpp"

namespace voxcond {

/* Pinhole intrinsics. Camera frame: +z forward, +x right, +y down. */
struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

/* Camera pose in the ego frame: rotation maps camera to ego coordinates,
 * translation is the camera center. */
struct Extrinsics {
  Mat3 rotation;
  Vec3 translation;

  void validate() const;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

struct PixelProjection {
  double u = 0, v = 0;
  double ray_depth = 0;  // Euclidean distance camera center -> point
};

/* Ray through continuous pixel coordinates (u,v); direction is unit length
 * in the ego frame, origin is the camera center. */
Ray pixel_ray(const Intrinsics& intr, const Extrinsics& extr, double u, double v);

/* Project an ego-frame point; absent when behind the camera (z <= 0 in the
 * camera frame) or outside the image rectangle [0,w]x[0,h]. */
std::optional<PixelProjection> project(const Intrinsics& intr,
                                       const Extrinsics& extr, Vec3 point);

struct CameraView {
  std::string name;
  Intrinsics intrinsics;
  Extrinsics extrinsics;
};

struct CameraRig {
  std::vector<CameraView> views;

  const CameraView& view(const std::string& name) const;
  std::string to_json() const;
  static CameraRig from_json(const std::string& text);
  uint64_t content_hash() const;
};

/* Six cameras at 60 degree yaw steps with identical intrinsics, mounted
 * near the ego center, in the surround-rig style of street-scene datasets. */
CameraRig default_rig(int width = 160, int height = 96);

}  // namespace voxcond
