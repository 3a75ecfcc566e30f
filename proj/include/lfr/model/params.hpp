#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

#include "lfr/core/rng.hpp"
#include "lfr/model/config.hpp"

namespace lfr {

/// Named learnable tensors. std::map keeps enumeration order stable for the
/// optimizer, checkpoints, and deterministic gradient reductions.
struct ModelParams {
  std::map<std::string, Eigen::MatrixXd> tensors;

  Eigen::MatrixXd& at(const std::string& name);
  const Eigen::MatrixXd& at(const std::string& name) const;
  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  bool all_finite() const;

  /// Weights and the embedding table from a truncated normal (sigma 0.02,
  /// clipped at two sigma); biases and LayerNorm shifts zero, LayerNorm
  /// scales one.
  static ModelParams init(const ModelConfig& config, Rng& rng);
};

/// Coarse parameter grouping used by gradient checks and flow tests:
/// conv, embed, token_proj, target_proj, epi.stack, epi.pool, view.stack,
/// view.pool, head, vanilla, onemlp.
std::string param_group(const std::string& name);

}  // namespace lfr
