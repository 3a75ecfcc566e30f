#include "lfr/geometry/camera.hpp"

namespace lfr {

Ray ray_from_pixel(const CameraModel& camera, const Eigen::Vector2d& pixel) {
  Eigen::Vector3d dir_cam((pixel.x() - camera.cx) / camera.fx,
                          (pixel.y() - camera.cy) / camera.fy, 1.0);
  Ray ray;
  ray.origin = camera.center();
  ray.direction = camera.rotation.transpose() * dir_cam;
  ray.source_view = camera.view_id;
  return ray;
}

Projection project(const CameraModel& camera, const Eigen::Vector3d& point) {
  Eigen::Vector3d cam = camera.rotation * point + camera.translation;
  if (std::abs(cam.z()) < 1e-12) {
    throw Error(ErrorCode::DegenerateProjection,
                "point on the principal plane of view " +
                    std::to_string(camera.view_id));
  }
  Eigen::Vector2d pixel(camera.fx * cam.x() / cam.z() + camera.cx,
                        camera.fy * cam.y() / cam.z() + camera.cy);
  return {pixel, cam.z()};
}

}  // namespace lfr
