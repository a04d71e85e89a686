#include "core/camera.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/fnv.hpp"
#include "json.hpp"

namespace voxcond {

using nlohmann::json;

void Intrinsics::validate() const {
  require(std::isfinite(fx) && std::isfinite(fy) && fx > 0 && fy > 0,
          ErrorCode::InvalidArgument, "focal lengths must be positive");
  require(width > 0 && height > 0, ErrorCode::InvalidArgument,
          "image size must be positive");
  require(std::isfinite(cx) && std::isfinite(cy) && cx > 0 && cx < width &&
              cy > 0 && cy < height,
          ErrorCode::InvalidArgument,
          "principal point must lie inside the image");
}

void Extrinsics::validate() const {
  const double tol = 1e-9;
  Mat3 rtr = rotation.transposed() * rotation;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double want = i == j ? 1.0 : 0.0;
      require(std::fabs(rtr.at(i, j) - want) <= tol, ErrorCode::InvalidArgument,
              "rotation is not orthonormal");
    }
  require(std::fabs(rotation.det() - 1.0) <= tol, ErrorCode::InvalidArgument,
          "rotation determinant must be +1");
  require(std::isfinite(translation.x) && std::isfinite(translation.y) &&
              std::isfinite(translation.z),
          ErrorCode::InvalidArgument, "translation must be finite");
}

Ray pixel_ray(const Intrinsics& intr, const Extrinsics& extr, double u, double v) {
  require(std::isfinite(u) && std::isfinite(v), ErrorCode::InvalidArgument,
          "pixel coordinates must be finite");
  require(u >= 0 && u <= intr.width && v >= 0 && v <= intr.height,
          ErrorCode::InvalidArgument, "pixel outside the image rectangle");
  Vec3 dir_cam{(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0};
  Vec3 dir = (extr.rotation * dir_cam).normalized();
  return Ray{extr.translation, dir};
}

std::optional<PixelProjection> project(const Intrinsics& intr,
                                       const Extrinsics& extr, Vec3 point) {
  Vec3 p_cam = extr.rotation.transposed() * (point - extr.translation);
  if (p_cam.z <= 0.0) return std::nullopt;
  double u = intr.fx * p_cam.x / p_cam.z + intr.cx;
  double v = intr.fy * p_cam.y / p_cam.z + intr.cy;
  if (u < 0 || u > intr.width || v < 0 || v > intr.height) return std::nullopt;
  return PixelProjection{u, v, p_cam.norm()};
}

const CameraView& CameraRig::view(const std::string& name) const {
  for (const auto& v : views)
    if (v.name == name) return v;
  fail(ErrorCode::InvalidArgument, "no view named " + name);
}

std::string CameraRig::to_json() const {
  json arr = json::array();
  for (const auto& v : views) {
    json rot = json::array();
    for (double m : v.extrinsics.rotation.m) rot.push_back(m);
    arr.push_back({{"name", v.name},
                   {"fx", v.intrinsics.fx},
                   {"fy", v.intrinsics.fy},
                   {"cx", v.intrinsics.cx},
                   {"cy", v.intrinsics.cy},
                   {"width", v.intrinsics.width},
                   {"height", v.intrinsics.height},
                   {"rotation", rot},
                   {"translation",
                    {v.extrinsics.translation.x, v.extrinsics.translation.y,
                     v.extrinsics.translation.z}}});
  }
  return json{{"views", arr}}.dump(2);
}

CameraRig CameraRig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("rig json: ") + e.what());
  }
  CameraRig rig;
  try {
    for (const auto& item : j.at("views")) {
      CameraView v;
      v.name = item.at("name").get<std::string>();
      v.intrinsics.fx = item.at("fx").get<double>();
      v.intrinsics.fy = item.at("fy").get<double>();
      v.intrinsics.cx = item.at("cx").get<double>();
      v.intrinsics.cy = item.at("cy").get<double>();
      v.intrinsics.width = item.at("width").get<int>();
      v.intrinsics.height = item.at("height").get<int>();
      const auto& rot = item.at("rotation");
      require(rot.size() == 9, ErrorCode::ParseError,
              "rotation must have 9 row-major entries");
      for (int i = 0; i < 9; ++i)
        v.extrinsics.rotation.m[i] = rot.at(i).get<double>();
      const auto& t = item.at("translation");
      require(t.size() == 3, ErrorCode::ParseError,
              "translation must have 3 entries");
      v.extrinsics.translation = {t.at(0).get<double>(), t.at(1).get<double>(),
                                  t.at(2).get<double>()};
      v.intrinsics.validate();
      v.extrinsics.validate();
      rig.views.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("rig json: ") + e.what());
  }
  require(!rig.views.empty(), ErrorCode::ParseError, "rig has no views");
  for (size_t i = 0; i < rig.views.size(); ++i)
    for (size_t k = i + 1; k < rig.views.size(); ++k)
      require(rig.views[i].name != rig.views[k].name, ErrorCode::ParseError,
              "duplicate view name " + rig.views[i].name);
  return rig;
}

uint64_t CameraRig::content_hash() const { return fnv1a64(to_json()); }

CameraRig default_rig(int width, int height) {
  constexpr double kPi = 3.14159265358979323846;
  /* Camera axes in ego coordinates for a forward-looking camera:
   * z (forward) -> ego x, x (right) -> ego -y, y (down) -> ego -z. */
  Mat3 cam_to_ego_fwd;
  cam_to_ego_fwd.m[0] = 0;  cam_to_ego_fwd.m[1] = 0;  cam_to_ego_fwd.m[2] = 1;
  cam_to_ego_fwd.m[3] = -1; cam_to_ego_fwd.m[4] = 0;  cam_to_ego_fwd.m[5] = 0;
  cam_to_ego_fwd.m[6] = 0;  cam_to_ego_fwd.m[7] = -1; cam_to_ego_fwd.m[8] = 0;

  Intrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = intr.fy = 0.625 * width;
  intr.cx = width / 2.0;
  intr.cy = height / 2.0;
  intr.validate();

  static const char* names[6] = {"front",      "front_left", "back_left",
                                 "back",       "back_right", "front_right"};
  CameraRig rig;
  for (int i = 0; i < 6; ++i) {
    double yaw = i * (kPi / 3.0);
    CameraView v;
    v.name = names[i];
    v.intrinsics = intr;
    v.extrinsics.rotation = Mat3::yaw(yaw) * cam_to_ego_fwd;
    v.extrinsics.translation = {1.0 * std::cos(yaw), 1.0 * std::sin(yaw), 1.6};
    v.extrinsics.validate();
    rig.views.push_back(std::move(v));
  }
  return rig;
}

}  // namespace voxcond
