#pragma once

#include "lfr/encoding/fourier.hpp"
#include "lfr/encoding/spherical.hpp"
#include "lfr/sampler/epipolar.hpp"

namespace lfr {

enum class ModelVariant { Full, Vanilla, OneMlp, TwoMlp };

struct ModelConfig {
  ModelVariant variant = ModelVariant::Full;
  Parametrization parametrization = Parametrization::Slab;
  bool use_plucker = false;  // swaps the 4D ray coords for 6D Plucker

  int model_dim = 64;
  int num_blocks = 2;        // per transformer stack
  int mlp_hidden = 0;        // 0 selects 4 * model_dim
  int num_heads = 1;         // single-headed attention throughout

  int conv_channels = 32;
  int conv_kernel = 5;

  int cam_embed_dim = 256;
  int num_views = 0;  // rows of the camera embedding table

  FourierConfig fourier;        // defaults: 5 frequencies
  SphericalConfig spherical;    // defaults: max degree 4

  int vanilla_layers = 8;   // skip connection every fourth layer
  int one_mlp_layers = 12;  // likewise
  // The single-MLP baseline contracts fixed point/view axes, so their
  // sizes are baked into its parameters.
  int one_mlp_points = 0;
  int one_mlp_views = 0;

  int hidden_dim() const { return mlp_hidden > 0 ? mlp_hidden : 4 * model_dim; }

  CoordKind coord_kind() const {
    if (use_plucker) return CoordKind::Plucker;
    return parametrization == Parametrization::Slab ? CoordKind::Slab
                                                    : CoordKind::TwoSphere;
  }

  int ray_coord_dim() const { return use_plucker ? 6 : 4; }

  /// Encoded dimension of one ray's coordinates.
  int ray_encoding_dim() const {
    if (!use_plucker && parametrization == Parametrization::TwoSphere) {
      return spherical.output_dim();
    }
    return fourier.output_dim(ray_coord_dim());
  }

  int point_encoding_dim() const { return fourier.output_dim(3); }

  /// Raw epipolar-point token width (ray enc | point enc | embedding |
  /// visual features | color).
  int token_dim() const {
    return ray_encoding_dim() + point_encoding_dim() + cam_embed_dim +
           conv_channels + 3;
  }
};

}  // namespace lfr
