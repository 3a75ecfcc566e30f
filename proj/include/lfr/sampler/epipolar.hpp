#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "lfr/core/rng.hpp"
#include "lfr/geometry/lightfield.hpp"
#include "lfr/io/image.hpp"

namespace lfr {

enum class Parametrization { Slab, TwoSphere };

/// Ray coordinate representation attached to epipolar points and the
/// target ray: the scene parametrization, or Plucker when overridden.
enum class CoordKind { Slab, TwoSphere, Plucker };

enum class DepthSpacing { UniformDelta, UniformInverseDepth };

struct SamplerConfig {
  int num_reference_views = 4;   // K
  int candidate_pool = 8;        // N
  int points_per_view = 32;      // P
  DepthSpacing depth_spacing = DepthSpacing::UniformInverseDepth;
  bool training_mode = false;
};

/// Per target ray: K reference views x P epipolar samples.
struct EpipolarSampleGrid {
  std::vector<int> view_ids;                 // K
  Eigen::VectorXd deltas;                    // P, strictly increasing
  Eigen::MatrixXd points3d;                  // P x 3, shared across views
  std::vector<Eigen::MatrixXd> pixels;       // K of P x 2
  std::vector<Eigen::MatrixXd> ray_coords;   // K of P x (4 or 6)
  std::vector<Eigen::MatrixXd> colors;       // K of P x 3, zero where invalid
  std::vector<Eigen::MatrixXd> features;     // K of P x C, zero where invalid
  std::vector<std::vector<uint8_t>> valid;   // K of P

  int num_views() const { return static_cast<int>(view_ids.size()); }
  int num_points() const { return static_cast<int>(deltas.size()); }
  bool view_has_valid_point(int j) const {
    for (uint8_t v : valid[j]) {
      if (v) return true;
    }
    return false;
  }
};

/// K reference view ids for a target camera. Training mode draws a random
/// K-subset of the N nearest candidates (camera-center distance, ties by
/// ascending view_id); otherwise the K nearest. The target's own view_id is
/// never a candidate. Throws InsufficientViews.
std::vector<int> select_reference_views(const CameraModel& target,
                                        const std::vector<CameraModel>& all,
                                        const SamplerConfig& config, Rng& rng);

/// Same selection for a free ray (EPI queries): candidates ranked by
/// distance from the ray origin.
std::vector<int> select_reference_views_for_point(
    const Eigen::Vector3d& origin, const std::vector<CameraModel>& all,
    const SamplerConfig& config, Rng& rng);

/// Geometry-only grid: deltas, 3D points, projections, per-point ray
/// coordinates and validity. Colors/features are left zero. Per-point
/// geometry failures become valid = false.
EpipolarSampleGrid sample_epipolar_points(
    const Ray& ray, const SceneFrame& frame, Parametrization parametrization,
    const std::vector<CameraModel>& references,
    const std::vector<int>& view_ids, const SamplerConfig& config,
    CoordKind coord_kind);

/// Bilinear taps (row index into an (H*W) x C map, weight) for a sub-pixel
/// location. Requires x in [0, width-1], y in [0, height-1].
std::array<std::pair<int, double>, 4> bilinear_taps(double x, double y,
                                                    int width, int height);

/// Fills grid colors and features by bilinear interpolation; feature maps
/// are (H*W) x C with the same spatial size as the images. Throws
/// ShapeMismatch.
void gather_colors_and_features(EpipolarSampleGrid& grid,
                                const std::vector<const Image*>& images,
                                const std::vector<const Eigen::MatrixXd*>& feature_maps);

}  // namespace lfr
