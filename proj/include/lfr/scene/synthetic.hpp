#pragma once

#include <limits>
#include <vector>

#include "lfr/scene/scene.hpp"

namespace lfr {

/// Fronto-parallel checkerboard plane at z = depth; cell_size is the edge
/// length of one checker cell in world units.
struct PlaneSpec {
  double depth = 2.0;
  double cell_size = 0.25;
  Eigen::Vector3d color_a = {0.9, 0.9, 0.9};
  Eigen::Vector3d color_b = {0.1, 0.1, 0.1};
  double x_min = -std::numeric_limits<double>::infinity();
  double x_max = std::numeric_limits<double>::infinity();
  double y_min = -std::numeric_limits<double>::infinity();
  double y_max = std::numeric_limits<double>::infinity();
};

struct SphereSpec {
  Eigen::Vector3d center = {0.0, 0.0, 3.0};
  double radius = 0.5;
  Eigen::Vector3d albedo = {0.8, 0.3, 0.2};
  bool specular = false;           // adds a Phong highlight
  double phong_exponent = 32.0;
  double highlight_strength = 0.6;
};

enum class RigKind { Line, Arc, Hemisphere };

struct SyntheticSceneSpec {
  std::vector<PlaneSpec> planes;
  std::vector<SphereSpec> spheres;

  RigKind rig = RigKind::Line;
  int num_cameras = 3;
  double rig_extent = 0.5;     // line half-length / arc half-angle scale / radius
  Eigen::Vector3d look_at = {0.0, 0.0, 2.0};  // used by arc and hemisphere rigs

  int image_size = 32;
  double focal = 32.0;         // pixels

  Parametrization parametrization = Parametrization::Slab;
  SceneFrame frame;
  std::vector<int> test_ids;   // remaining cameras become the train split
  uint64_t seed = 0;           // reserved for jittered rigs; generation is analytic
};

/// Ray-casts the analytic primitives into every camera (flat-shaded
/// checkerboards, Lambertian/Phong spheres under one directional light),
/// snapping colors to the 8-bit sRGB grid so a PNG round trip is lossless.
/// Ground-truth depth maps are kept on each view. Throws InvalidSpec.
Scene generate_synthetic(const SyntheticSceneSpec& spec);

/// Parses a JSON scene description (see scenes/SCHEMA.md). Throws
/// ParseError.
SyntheticSceneSpec synthetic_spec_from_json(const std::string& text);

}  // namespace lfr
