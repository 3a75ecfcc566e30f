#pragma once

#include <string>
#include <vector>

#include "lfr/geometry/lightfield.hpp"
#include "lfr/io/image.hpp"
#include "lfr/sampler/epipolar.hpp"

namespace lfr {

struct SceneView {
  CameraModel camera;
  Image image;
  std::string image_path;          // relative to the manifest directory
  Eigen::VectorXd depth;           // H*W ground-truth depths; empty if unknown
  std::string depth_path;
};

struct Scene {
  Parametrization parametrization = Parametrization::Slab;
  SceneFrame frame;
  std::vector<SceneView> views;    // indexed by view_id
  std::vector<int> train_ids;
  std::vector<int> test_ids;

  const SceneView& view(int id) const;  // throws UnknownView
  std::vector<CameraModel> cameras() const;
  std::vector<CameraModel> cameras_for(const std::vector<int>& ids) const;
};

/// Reads a manifest (see scenes/SCHEMA.md) and decodes every image to
/// linear floats. Throws ParseError, MissingImage, InvalidPose.
Scene load_scene(const std::string& manifest_path);

/// Writes manifest.json, the view PNGs, and any depth maps into out_dir.
void save_scene(const Scene& scene, const std::string& out_dir);

}  // namespace lfr
