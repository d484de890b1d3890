#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

namespace panfuse {

/// Pinhole model with image size; depth_scale converts stored integer depth
/// units to meters (units per meter).
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  double depth_scale = 1000.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw std::invalid_argument("CameraIntrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("CameraIntrinsics: image size must be positive");
    if (!(cx > 0.0) || cx >= width || !(cy > 0.0) || cy >= height)
      throw std::invalid_argument("CameraIntrinsics: principal point outside image");
    if (!(depth_scale > 0.0))
      throw std::invalid_argument("CameraIntrinsics: depth scale must be positive");
  }
};

/// Camera-to-world rigid transform.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  bool is_rigid(double tol = 1e-6) const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    return (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(rotation.determinant() - 1.0) <= tol;
  }

  Eigen::Vector3d to_world(const Eigen::Vector3d& p_cam) const {
    return rotation * p_cam + translation;
  }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation.transpose() * (p_world - translation);
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static Pose from_matrix(const Eigen::Matrix4d& m) {
    return Pose{m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }
};

/// Camera-frame point for a pixel and its metric depth (z = depth).
inline Eigen::Vector3d backproject(const CameraIntrinsics& intr, double u, double v,
                                   double depth) {
  if (!(depth > 0.0)) throw std::invalid_argument("backproject: depth must be positive");
  return {(u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth};
}

/// Pixel coordinates of a camera-frame point, or nullopt when the point is
/// behind the camera or projects outside the image.
inline std::optional<Eigen::Vector2d> project_point(const CameraIntrinsics& intr,
                                                    const Eigen::Vector3d& p_cam) {
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  const double u = intr.fx * p_cam.x() / p_cam.z() + intr.cx;
  const double v = intr.fy * p_cam.y() / p_cam.z() + intr.cy;
  if (u < 0.0 || u > intr.width - 1 || v < 0.0 || v > intr.height - 1) return std::nullopt;
  return Eigen::Vector2d{u, v};
}

}  // namespace panfuse
