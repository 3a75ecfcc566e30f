#pragma once

#include <Eigen/Dense>

#include "lfr/geometry/camera.hpp"

namespace lfr {

/// Scene-level geometry for the light-field parametrizations: the two slab
/// plane offsets, the bounding sphere, and the delta sampling range.
struct SceneFrame {
  double z_st = 1.0;  // plane z = z_st carries (s, t)
  double z_uv = 2.0;  // plane z = z_uv carries (u, v)
  Eigen::Vector3d sphere_center = Eigen::Vector3d::Zero();
  double sphere_radius = 1.0;
  double near = 0.5;
  double far = 10.0;
  double coord_scale = 1.0;  // optional scale applied to slab coords before encoding

  bool valid() const {
    return z_st != z_uv && sphere_radius > 0.0 && near > 0.0 && near < far;
  }
};

struct SlabCoords {
  double s, t, u, v;
  Eigen::Vector4d vec() const { return {s, t, u, v}; }
};

/// Colatitudes measured from +z in the sphere frame, longitudes in (-pi, pi].
struct SphereCoords {
  double theta1, phi1, theta2, phi2;
  Eigen::Vector4d vec() const { return {theta1, phi1, theta2, phi2}; }
};

struct PluckerCoords {
  Eigen::Vector3d direction;  // unit
  Eigen::Vector3d moment;     // origin x direction
  Eigen::Matrix<double, 6, 1> vec() const {
    Eigen::Matrix<double, 6, 1> out;
    out << direction, moment;
    return out;
  }
};

/// Intersections with the two slab planes. Throws ParallelRay when
/// |direction.z| <= 1e-9.
SlabCoords slab_coords(const Ray& ray, const SceneFrame& frame);

/// Entry/exit angles on the bounding sphere, entry first (smaller delta).
/// Throws NoIntersection or TangentRay. Longitude at a pole is fixed to 0.
SphereCoords sphere_coords(const Ray& ray, const SceneFrame& frame);

/// Normalized direction and moment; canonical for any point on the
/// oriented line. Throws ZeroDirection.
PluckerCoords plucker_coords(const Ray& ray);

/// Deltas of the two sphere intersections (entry, exit) along the ray.
std::pair<double, double> sphere_intersection_deltas(const Ray& ray,
                                                     const SceneFrame& frame);

}  // namespace lfr
