#pragma once

#include <Eigen/Dense>

#include "lfr/geometry/lightfield.hpp"

namespace lfr {

/// Real orthonormal spherical harmonics without the Condon-Shortley phase.
/// Only the zonal (m = 0) and sectoral (m = l) terms are emitted; sectoral
/// terms are the cos(m phi) harmonics, with the sin(m phi) partners behind
/// include_sine_sectoral.
struct SphericalConfig {
  int max_degree = 4;
  bool include_sine_sectoral = false;

  int terms_per_point() const {
    return (max_degree + 1) + max_degree * (include_sine_sectoral ? 2 : 1);
  }
  int output_dim() const { return 2 * terms_per_point(); }
};

/// Harmonics at one direction, ordered [Y_0^0 .. Y_L^0, Y_1^1 .. Y_L^L]
/// (sin sectorals appended when configured).
Eigen::VectorXd sh_basis(double theta, double phi, const SphericalConfig& config);

/// Concatenation of sh_basis at the entry and exit intersections.
Eigen::VectorXd sh_encode(const SphereCoords& coords, const SphericalConfig& config);

}  // namespace lfr
