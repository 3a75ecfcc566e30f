#pragma once

#include <map>
#include <optional>
#include <vector>

#include "lfr/ad/tape.hpp"
#include "lfr/model/params.hpp"
#include "lfr/sampler/epipolar.hpp"

namespace lfr {

/// Per-ray attention record: epipolar weights alpha (K x P, zero at masked
/// points and for fully masked views), view weights beta (K), putative
/// depths, and the intermediate features named by the two stages.
struct RenderTrace {
  Eigen::MatrixXd alpha;                 // K x P
  Eigen::VectorXd beta;                  // K
  Eigen::VectorXd deltas;                // P
  Eigen::MatrixXd target_epi_features;   // K x D, transformed target per view
  Eigen::MatrixXd view_features;         // K x D, z^j
  Eigen::MatrixXd view_features_out;     // K x D, transformed z^j
  Eigen::RowVectorXd target_view_feature;  // transformed target, view stage
  std::vector<uint8_t> view_valid;       // K
};

/// Parameter tensors bound to a tape as gradient-tracking leaves.
struct ParamVars {
  std::map<std::string, ad::Var> vars;
  ad::Var at(const std::string& name) const;
};

ParamVars bind_params(ad::Tape& tape, const ModelParams& params,
                      bool requires_grad = true);

/// Zero-padded 5x5 (or config.conv_kernel) patch matrix: row per pixel,
/// columns ordered (dy, dx, channel). Pure function of the image; cacheable.
Eigen::MatrixXd im2col(const Image& image, int kernel);

/// Single-layer convolutional features, (H*W) x conv_channels.
Eigen::MatrixXd conv_features(const Image& image, const ModelParams& params,
                              const ModelConfig& config);

/// Same convolution on-tape so gradients reach the filter.
ad::Var conv_features_var(ad::Tape& tape, const Eigen::MatrixXd& patches,
                          const ParamVars& params);

/// Encoded target-ray coordinates (Fourier or spherical-harmonic).
Eigen::VectorXd encode_target_ray(const Ray& ray, const SceneFrame& frame,
                                  const ModelConfig& config);

struct ForwardResult {
  ad::Var rgb;       // 1 x 3, strictly inside (0, 1)
  ad::Var aux;       // 1 x 3 attention-weighted color (invalid for variants
                     // without attention)
  RenderTrace trace;
};

/// Full forward pass for one target ray. Feature maps, when provided (one
/// (H*W) x C tape var per reference view), are sampled on-tape; otherwise
/// grid.features must be pre-populated and enters as a constant. Throws
/// AllViewsMasked.
ForwardResult forward_ray(ad::Tape& tape, const ModelConfig& config,
                          const ParamVars& params,
                          const EpipolarSampleGrid& grid,
                          const Eigen::VectorXd& target_encoding,
                          const std::vector<ad::Var>* feature_maps,
                          const std::vector<std::pair<int, int>>* map_sizes);

/// Convenience wrapper: untracked forward returning plain values.
struct PlainForward {
  Eigen::Vector3d rgb;
  RenderTrace trace;
};
PlainForward forward_ray_plain(const ModelConfig& config,
                               const ModelParams& params,
                               const EpipolarSampleGrid& grid,
                               const Eigen::VectorXd& target_encoding);

}  // namespace lfr
