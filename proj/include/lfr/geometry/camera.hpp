#pragma once

#include <Eigen/Dense>
#include <optional>

#include "lfr/core/error.hpp"

namespace lfr {

/// World line with unnormalized direction: the depth parameter delta is
/// measured in units of the direction vector, so for camera rays delta
/// coincides with depth along the optical axis.
struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;
  std::optional<int> source_view;
};

inline Eigen::Vector3d point_at(const Ray& ray, double delta) {
  return ray.origin + delta * ray.direction;
}

/// Pinhole camera: intrinsics (zero skew) plus world-to-camera pose.
struct CameraModel {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();   // world -> camera
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();    // world -> camera
  int width = 1, height = 1;
  int view_id = 0;

  Eigen::Matrix3d intrinsics() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Eigen::Vector3d center() const {
    return -rotation.transpose() * translation;
  }

  /// Checks R orthonormal with det +1 and positive focal lengths.
  bool pose_valid(double tol = 1e-6) const {
    Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol && fx > 0.0 && fy > 0.0;
  }
};

/// Back-projects a (sub-)pixel to its world ray. The direction is
/// R^T K^{-1} [px, py, 1]^T, deliberately left unnormalized.
Ray ray_from_pixel(const CameraModel& camera, const Eigen::Vector2d& pixel);

struct Projection {
  Eigen::Vector2d pixel;
  double depth;  // z in the camera frame
};

/// Projects a world point; throws DegenerateProjection when the point lies
/// on the principal plane (|depth| < 1e-12).
Projection project(const CameraModel& camera, const Eigen::Vector3d& point);

}  // namespace lfr
