#pragma once

#include <array>
#include <map>

#include "lfr/model/network.hpp"
#include "lfr/scene/scene.hpp"

namespace lfr {

/// Inference-time state shared across rays: the scene, configs, and the
/// convolution feature maps of every training view (pure functions of the
/// images, computed once).
struct RenderContext {
  const Scene* scene = nullptr;
  ModelConfig model;
  SamplerConfig sampler;  // inference mode (deterministic K nearest)
  std::map<int, Eigen::MatrixXd> feature_maps;  // train view id -> (H*W) x C
};

RenderContext make_render_context(const Scene& scene, const ModelConfig& model,
                                  const SamplerConfig& sampler,
                                  const ModelParams& params);

struct RenderRequest {
  CameraModel camera;
  int block_size = 4096;         // rays per batch; never affects values
  bool want_disparity = false;
  bool want_beta = false;        // requires K = 3
  bool debug_magenta = false;    // flagged pixels magenta instead of zero
};

struct RenderOutputs {
  Image color;
  Eigen::VectorXd depth;      // weighted putative depth, 0 at flagged pixels
  Eigen::VectorXd disparity;  // 1 / depth
  Image beta_map;
  std::vector<int> flagged;   // pixel indices that could not be rendered
};

/// One forward pass per pixel ray; reference views are the K nearest
/// training cameras (target view excluded). Unrenderable rays become
/// flagged pixels rather than hard failures.
RenderOutputs render_image(const ModelParams& params, const RenderContext& ctx,
                           const RenderRequest& request);

/// Forward for one free ray; reference views picked by ray-origin distance.
PlainForward render_ray(const ModelParams& params, const RenderContext& ctx,
                        const Ray& ray);

/// Index of the strongest epipolar attention weight in view j (ascending
/// index tie-break) plus the full distribution. Throws AllPointsMasked.
std::pair<int, Eigen::VectorXd> correspondence_map(const RenderTrace& trace,
                                                   int view_j);

/// Log-scale, max-normalized rendering of an attention distribution for
/// visualization (zeros stay zero).
Eigen::VectorXd log_normalized(const Eigen::VectorXd& distribution);

/// Epipolar-plane image over slab coordinates: two fixed coordinates, one
/// swept per output row and one per output column.
struct EpiRequest {
  std::array<int, 2> fixed_indices{1, 3};  // of (s, t, u, v)
  std::array<double, 2> fixed_values{0.0, 0.0};
  int row_index = 0;
  double row_min = -0.5, row_max = 0.5;
  int rows = 32;
  int col_index = 2;
  double col_min = -0.5, col_max = 0.5;
  int cols = 32;

  void validate() const;  // throws ConfigError
};

Image epi_slice(const ModelParams& params, const RenderContext& ctx,
                const EpiRequest& request);

/// Per-pixel view attention weights as RGB; requires exactly K = 3
/// reference views (ConfigError otherwise).
Image view_attention_image(const ModelParams& params, const RenderContext& ctx,
                           const CameraModel& camera);

}  // namespace lfr
