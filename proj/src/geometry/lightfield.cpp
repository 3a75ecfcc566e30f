#include "lfr/geometry/lightfield.hpp"

#include <cmath>

namespace lfr {

SlabCoords slab_coords(const Ray& ray, const SceneFrame& frame) {
  if (std::abs(ray.direction.z()) <= 1e-9) {
    throw Error(ErrorCode::ParallelRay, "ray parallel to the slab planes");
  }
  double d_st = (frame.z_st - ray.origin.z()) / ray.direction.z();
  double d_uv = (frame.z_uv - ray.origin.z()) / ray.direction.z();
  Eigen::Vector3d p_st = point_at(ray, d_st);
  Eigen::Vector3d p_uv = point_at(ray, d_uv);
  return {p_st.x(), p_st.y(), p_uv.x(), p_uv.y()};
}

namespace {

std::pair<double, double> angles_at(const Eigen::Vector3d& point,
                                    const SceneFrame& frame) {
  Eigen::Vector3d local = (point - frame.sphere_center) / frame.sphere_radius;
  double z = std::clamp(local.z(), -1.0, 1.0);
  double theta = std::acos(z);
  // Longitude is undefined at the poles; pinned to 0 there.
  double phi = std::sin(theta) < 1e-9 ? 0.0 : std::atan2(local.y(), local.x());
  if (phi <= -M_PI) phi = M_PI;
  return {theta, phi};
}

}  // namespace

std::pair<double, double> sphere_intersection_deltas(const Ray& ray,
                                                     const SceneFrame& frame) {
  Eigen::Vector3d oc = ray.origin - frame.sphere_center;
  double a = ray.direction.squaredNorm();
  double b = 2.0 * oc.dot(ray.direction);
  double c = oc.squaredNorm() - frame.sphere_radius * frame.sphere_radius;
  double disc = b * b - 4.0 * a * c;
  if (disc < -1e-12) {
    throw Error(ErrorCode::NoIntersection, "ray misses the bounding sphere");
  }
  if (disc <= 1e-12) {
    throw Error(ErrorCode::TangentRay, "ray tangent to the bounding sphere");
  }
  double sq = std::sqrt(disc);
  double d1 = (-b - sq) / (2.0 * a);
  double d2 = (-b + sq) / (2.0 * a);
  return {d1, d2};
}

SphereCoords sphere_coords(const Ray& ray, const SceneFrame& frame) {
  auto [d1, d2] = sphere_intersection_deltas(ray, frame);
  auto [theta1, phi1] = angles_at(point_at(ray, d1), frame);
  auto [theta2, phi2] = angles_at(point_at(ray, d2), frame);
  return {theta1, phi1, theta2, phi2};
}

PluckerCoords plucker_coords(const Ray& ray) {
  double norm = ray.direction.norm();
  if (norm <= 0.0 || !std::isfinite(norm)) {
    throw Error(ErrorCode::ZeroDirection, "ray direction has zero norm");
  }
  Eigen::Vector3d d = ray.direction / norm;
  return {d, ray.origin.cross(d)};
}

}  // namespace lfr
