#include "lfr/scene/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "lfr/core/error.hpp"
#include "lfr/core/parallel.hpp"

namespace lfr {

namespace {

const Eigen::Vector3d kLightDir =
    Eigen::Vector3d(-0.3, 0.5, -0.8).normalized();  // surface-to-light
constexpr double kAmbient = 0.3;

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// World->camera rotation whose +z axis looks from `eye` toward `target`.
Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d& eye,
                                 const Eigen::Vector3d& target) {
  Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d world_up(0.0, 1.0, 0.0);
  if (std::abs(forward.dot(world_up)) > 0.999) world_up = {1.0, 0.0, 0.0};
  Eigen::Vector3d right = world_up.cross(forward).normalized();
  Eigen::Vector3d up = forward.cross(right);
  Eigen::Matrix3d r;  // rows are the camera axes in world coordinates
  r.row(0) = right;
  r.row(1) = up;
  r.row(2) = forward;
  return r;
}

CameraModel make_camera(const SyntheticSceneSpec& spec, int view_id,
                        const Eigen::Vector3d& center,
                        const Eigen::Matrix3d& rotation) {
  CameraModel cam;
  cam.view_id = view_id;
  cam.width = cam.height = spec.image_size;
  cam.fx = cam.fy = spec.focal;
  cam.cx = (spec.image_size - 1) / 2.0;
  cam.cy = (spec.image_size - 1) / 2.0;
  cam.rotation = rotation;
  cam.translation = -rotation * center;
  return cam;
}

std::vector<CameraModel> build_rig(const SyntheticSceneSpec& spec) {
  std::vector<CameraModel> cams;
  const int n = spec.num_cameras;
  for (int i = 0; i < n; ++i) {
    double s = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);  // 0..1
    switch (spec.rig) {
      case RigKind::Line: {
        Eigen::Vector3d c((2.0 * s - 1.0) * spec.rig_extent, 0.0, 0.0);
        cams.push_back(make_camera(spec, i, c, Eigen::Matrix3d::Identity()));
        break;
      }
      case RigKind::Arc: {
        double radius = (spec.look_at.z());
        double angle = (2.0 * s - 1.0) * spec.rig_extent;  // radians
        Eigen::Vector3d c = spec.look_at + radius * Eigen::Vector3d(
                                               std::sin(angle), 0.0,
                                               -std::cos(angle));
        cams.push_back(make_camera(spec, i, c, look_at_rotation(c, spec.look_at)));
        break;
      }
      case RigKind::Hemisphere: {
        // Spiral over the upper hemisphere around look_at.
        double t = n == 1 ? 0.5 : s;
        double colat = 0.25 * M_PI + 0.35 * M_PI * t;  // keep away from pole
        double lon = 2.0 * M_PI * 0.618 * i;
        Eigen::Vector3d offset(std::sin(colat) * std::cos(lon),
                               std::cos(colat),
                               std::sin(colat) * std::sin(lon));
        Eigen::Vector3d c = spec.look_at - spec.rig_extent * offset;
        cams.push_back(make_camera(spec, i, c, look_at_rotation(c, spec.look_at)));
        break;
      }
    }
  }
  return cams;
}

bool hit_plane(const PlaneSpec& plane, const Ray& ray, Hit& hit) {
  if (std::abs(ray.direction.z()) <= 1e-12) return false;
  double delta = (plane.depth - ray.origin.z()) / ray.direction.z();
  if (delta <= 1e-9 || delta >= hit.depth) return false;
  Eigen::Vector3d p = point_at(ray, delta);
  if (p.x() < plane.x_min || p.x() > plane.x_max || p.y() < plane.y_min ||
      p.y() > plane.y_max) {
    return false;
  }
  long ix = static_cast<long>(std::floor(p.x() / plane.cell_size));
  long iy = static_cast<long>(std::floor(p.y() / plane.cell_size));
  hit.depth = delta;
  hit.color = ((ix + iy) % 2 + 2) % 2 == 0 ? plane.color_a : plane.color_b;
  return true;
}

bool hit_sphere(const SphereSpec& sphere, const Ray& ray, Hit& hit) {
  Eigen::Vector3d oc = ray.origin - sphere.center;
  double a = ray.direction.squaredNorm();
  double b = 2.0 * oc.dot(ray.direction);
  double c = oc.squaredNorm() - sphere.radius * sphere.radius;
  double disc = b * b - 4.0 * a * c;
  if (disc <= 0.0) return false;
  double delta = (-b - std::sqrt(disc)) / (2.0 * a);
  if (delta <= 1e-9 || delta >= hit.depth) return false;
  Eigen::Vector3d p = point_at(ray, delta);
  Eigen::Vector3d normal = (p - sphere.center).normalized();
  double diffuse = kAmbient + (1.0 - kAmbient) * std::max(0.0, normal.dot(kLightDir));
  Eigen::Vector3d color = diffuse * sphere.albedo;
  if (sphere.specular) {
    Eigen::Vector3d view = (ray.origin - p).normalized();
    Eigen::Vector3d reflect = 2.0 * normal.dot(kLightDir) * normal - kLightDir;
    double s = std::pow(std::max(0.0, reflect.dot(view)), sphere.phong_exponent);
    color += sphere.highlight_strength * s * Eigen::Vector3d::Ones();
  }
  hit.depth = delta;
  hit.color = color.cwiseMin(1.0).cwiseMax(0.0);
  return true;
}

void validate(const SyntheticSceneSpec& spec) {
  if (spec.planes.empty() && spec.spheres.empty()) {
    throw Error(ErrorCode::InvalidSpec, "scene needs at least one primitive");
  }
  if (spec.num_cameras < 1 || spec.image_size < 1 || spec.focal <= 0.0) {
    throw Error(ErrorCode::InvalidSpec, "bad camera rig parameters");
  }
  if (!spec.frame.valid()) {
    throw Error(ErrorCode::InvalidSpec, "invalid scene frame");
  }
  for (const auto& pl : spec.planes) {
    if (pl.depth < spec.frame.near || pl.depth > spec.frame.far) {
      throw Error(ErrorCode::InvalidSpec, "plane outside the near/far range");
    }
    if (pl.cell_size <= 0.0) {
      throw Error(ErrorCode::InvalidSpec, "checker cell size must be positive");
    }
  }
  for (const auto& sp : spec.spheres) {
    if (sp.radius <= 0.0) {
      throw Error(ErrorCode::InvalidSpec, "sphere radius must be positive");
    }
    if (sp.center.z() - sp.radius < spec.frame.near ||
        sp.center.z() + sp.radius > spec.frame.far) {
      throw Error(ErrorCode::InvalidSpec, "sphere outside the near/far range");
    }
  }
  std::set<int> seen;
  for (int id : spec.test_ids) {
    if (id < 0 || id >= spec.num_cameras || !seen.insert(id).second) {
      throw Error(ErrorCode::InvalidSpec,
                  "bad test id " + std::to_string(id));
    }
  }
}

}  // namespace

Scene generate_synthetic(const SyntheticSceneSpec& spec) {
  validate(spec);

  Scene scene;
  scene.parametrization = spec.parametrization;
  scene.frame = spec.frame;

  std::vector<CameraModel> cams = build_rig(spec);
  scene.views.resize(cams.size());
  for (size_t v = 0; v < cams.size(); ++v) {
    SceneView& view = scene.views[v];
    view.camera = cams[v];
    view.image = Image::zeros(cams[v].width, cams[v].height);
    view.depth = Eigen::VectorXd::Zero(cams[v].width * cams[v].height);
    parallel_for(0, cams[v].height, [&](int y) {
      for (int x = 0; x < cams[v].width; ++x) {
        Ray ray = ray_from_pixel(cams[v], {double(x), double(y)});
        Hit hit;
        for (const auto& pl : spec.planes) hit_plane(pl, ray, hit);
        for (const auto& sp : spec.spheres) hit_sphere(sp, ray, hit);
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        double depth = 0.0;
        if (std::isfinite(hit.depth)) {
          // Snap to the 8-bit sRGB grid so the PNG round trip is exact.
          color = {quantize_srgb8(hit.color.x()), quantize_srgb8(hit.color.y()),
                   quantize_srgb8(hit.color.z())};
          depth = hit.depth;
        }
        view.image.set_pixel(x, y, color);
        view.depth[view.image.index(x, y)] = depth;
      }
    });
  }

  std::set<int> test(spec.test_ids.begin(), spec.test_ids.end());
  for (int i = 0; i < spec.num_cameras; ++i) {
    (test.count(i) ? scene.test_ids : scene.train_ids).push_back(i);
  }
  return scene;
}

SyntheticSceneSpec synthetic_spec_from_json(const std::string& text) {
  using nlohmann::json;
  SyntheticSceneSpec spec;
  try {
    json j = json::parse(text);
    auto vec3 = [](const json& a) {
      return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(),
                             a.at(2).get<double>());
    };
    for (const auto& jp : j.value("planes", json::array())) {
      PlaneSpec p;
      p.depth = jp.value("depth", p.depth);
      p.cell_size = jp.value("cell_size", p.cell_size);
      if (jp.contains("color_a")) p.color_a = vec3(jp.at("color_a"));
      if (jp.contains("color_b")) p.color_b = vec3(jp.at("color_b"));
      p.x_min = jp.value("x_min", p.x_min);
      p.x_max = jp.value("x_max", p.x_max);
      p.y_min = jp.value("y_min", p.y_min);
      p.y_max = jp.value("y_max", p.y_max);
      spec.planes.push_back(p);
    }
    for (const auto& js : j.value("spheres", json::array())) {
      SphereSpec s;
      if (js.contains("center")) s.center = vec3(js.at("center"));
      s.radius = js.value("radius", s.radius);
      if (js.contains("albedo")) s.albedo = vec3(js.at("albedo"));
      s.specular = js.value("specular", s.specular);
      s.phong_exponent = js.value("phong_exponent", s.phong_exponent);
      s.highlight_strength = js.value("highlight_strength", s.highlight_strength);
      spec.spheres.push_back(s);
    }
    std::string rig = j.value("rig", "line");
    if (rig == "line") spec.rig = RigKind::Line;
    else if (rig == "arc") spec.rig = RigKind::Arc;
    else if (rig == "hemisphere") spec.rig = RigKind::Hemisphere;
    else throw Error(ErrorCode::ParseError, "unknown rig '" + rig + "'");
    spec.num_cameras = j.value("num_cameras", spec.num_cameras);
    spec.rig_extent = j.value("rig_extent", spec.rig_extent);
    if (j.contains("look_at")) spec.look_at = vec3(j.at("look_at"));
    spec.image_size = j.value("image_size", spec.image_size);
    spec.focal = j.value("focal", spec.focal);
    std::string param = j.value("parametrization", "slab");
    if (param == "slab") spec.parametrization = Parametrization::Slab;
    else if (param == "two_sphere") spec.parametrization = Parametrization::TwoSphere;
    else throw Error(ErrorCode::ParseError, "unknown parametrization '" + param + "'");
    if (j.contains("frame")) {
      const auto& jf = j.at("frame");
      spec.frame.z_st = jf.value("z_st", spec.frame.z_st);
      spec.frame.z_uv = jf.value("z_uv", spec.frame.z_uv);
      if (jf.contains("sphere_center"))
        spec.frame.sphere_center = vec3(jf.at("sphere_center"));
      spec.frame.sphere_radius = jf.value("sphere_radius", spec.frame.sphere_radius);
      spec.frame.near = jf.value("near", spec.frame.near);
      spec.frame.far = jf.value("far", spec.frame.far);
      spec.frame.coord_scale = jf.value("coord_scale", spec.frame.coord_scale);
    }
    for (const auto& id : j.value("test_ids", json::array())) {
      spec.test_ids.push_back(id.get<int>());
    }
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError,
                std::string("synthetic scene spec: ") + e.what());
  }
  return spec;
}

}  // namespace lfr
