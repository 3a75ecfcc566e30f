#include "lfr/encoding/spherical.hpp"

#include <cmath>

namespace lfr {

namespace {

// Legendre polynomial P_l(x) by the three-term recurrence.
double legendre(int l, double x) {
  if (l == 0) return 1.0;
  double p0 = 1.0, p1 = x;
  for (int n = 2; n <= l; ++n) {
    double p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

}  // namespace

Eigen::VectorXd sh_basis(double theta, double phi,
                         const SphericalConfig& config) {
  const int lmax = config.max_degree;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  Eigen::VectorXd out(config.terms_per_point());
  int idx = 0;
  for (int l = 0; l <= lmax; ++l) {
    out[idx++] = std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI)) * legendre(l, ct);
  }
  // Sectoral: P_l^l(cos t) = (2l-1)!! sin^l t (no Condon-Shortley phase),
  // normalization sqrt(2 (2l+1) / (4 pi (2l)!)).
  double dfact = 1.0;   // (2l-1)!!
  double fact2l = 1.0;  // (2l)!
  double stl = 1.0;     // sin^l t
  for (int l = 1; l <= lmax; ++l) {
    dfact *= 2.0 * l - 1.0;
    fact2l *= (2.0 * l - 1.0) * (2.0 * l);
    stl *= st;
    double norm = std::sqrt(2.0 * (2.0 * l + 1.0) / (4.0 * M_PI * fact2l));
    out[idx++] = norm * dfact * stl * std::cos(l * phi);
  }
  if (config.include_sine_sectoral) {
    double df = 1.0, f2 = 1.0, sl = 1.0;
    for (int l = 1; l <= lmax; ++l) {
      df *= 2.0 * l - 1.0;
      f2 *= (2.0 * l - 1.0) * (2.0 * l);
      sl *= st;
      double norm = std::sqrt(2.0 * (2.0 * l + 1.0) / (4.0 * M_PI * f2));
      out[idx++] = norm * df * sl * std::sin(l * phi);
    }
  }
  return out;
}

Eigen::VectorXd sh_encode(const SphereCoords& coords,
                          const SphericalConfig& config) {
  Eigen::VectorXd a = sh_basis(coords.theta1, coords.phi1, config);
  Eigen::VectorXd b = sh_basis(coords.theta2, coords.phi2, config);
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace lfr
