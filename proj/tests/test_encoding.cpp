#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lfr/core/rng.hpp"
#include "lfr/encoding/fourier.hpp"
#include "lfr/encoding/spherical.hpp"

using namespace lfr;

namespace {

// Independent oracle: associated Legendre P_l^m via the standard recurrences
// (no Condon-Shortley phase), then orthonormal real harmonics.
double assoc_legendre(int l, int m, double x) {
  double pmm = 1.0;
  if (m > 0) {
    double somx2 = std::sqrt((1.0 - x) * (1.0 + x));
    double fact = 1.0;
    for (int i = 1; i <= m; ++i) {
      pmm *= fact * somx2;
      fact += 2.0;
    }
  }
  if (l == m) return pmm;
  double pmmp1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pmmp1;
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

double real_sh_oracle(int l, int m, double theta, double phi) {
  double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * M_PI) * factorial(l - m) /
                          factorial(l + m));
  double p = assoc_legendre(l, m, std::cos(theta));
  if (m == 0) return norm * p;
  return std::sqrt(2.0) * norm * p * std::cos(m * phi);
}

}  // namespace

TEST_CASE("fourier encoding exact angle examples") {
  FourierConfig c5;
  c5.num_frequencies = 5;
  Eigen::VectorXd zero = fourier_encode(Eigen::VectorXd::Zero(1), c5);
  REQUIRE(zero.size() == 10);
  for (int i = 0; i < 5; ++i) CHECK(zero[i] == 0.0);
  for (int i = 5; i < 10; ++i) CHECK(zero[i] == 1.0);

  FourierConfig c2;
  c2.num_frequencies = 2;
  Eigen::VectorXd half_pi =
      fourier_encode(Eigen::VectorXd::Constant(1, M_PI / 2), c2);
  CHECK(half_pi[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(half_pi[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(half_pi[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(half_pi[3] == doctest::Approx(-1.0).epsilon(1e-12));

  Eigen::VectorXd w = fourier_encode(Eigen::VectorXd::Constant(1, 0.5), c2);
  CHECK(w[0] == doctest::Approx(0.4794).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.8415).epsilon(1e-4));
  CHECK(w[2] == doctest::Approx(0.8776).epsilon(1e-4));
  CHECK(w[3] == doctest::Approx(0.5403).epsilon(1e-4));
}

TEST_CASE("fourier dimension and range contracts") {
  FourierConfig config;
  config.num_frequencies = 5;
  CHECK(config.output_dim(4) == 40);
  CHECK(config.output_dim(3) == 30);
  CHECK(config.output_dim(6) == 60);

  Rng rng(5);
  Eigen::VectorXd v(4);
  for (int i = 0; i < 4; ++i) v[i] = rng.uniform(-20.0, 20.0);
  Eigen::VectorXd enc = fourier_encode(v, config);
  REQUIRE(enc.size() == 40);
  CHECK(enc.minCoeff() >= -1.0);
  CHECK(enc.maxCoeff() <= 1.0);

  // Per-scalar blocks concatenate in input order.
  FourierConfig c1;
  c1.num_frequencies = 1;
  Eigen::Vector2d two(0.3, 0.7);
  Eigen::VectorXd e = fourier_encode(two, c1);
  CHECK(e[0] == doctest::Approx(std::sin(0.3)));
  CHECK(e[1] == doctest::Approx(std::cos(0.3)));
  CHECK(e[2] == doctest::Approx(std::sin(0.7)));
  CHECK(e[3] == doctest::Approx(std::cos(0.7)));
}

TEST_CASE("spherical harmonics basics") {
  SphericalConfig config;
  CHECK(config.terms_per_point() == 9);
  CHECK(config.output_dim() == 18);

  Eigen::VectorXd b = sh_basis(1.1, -0.3, config);
  REQUIRE(b.size() == 9);
  CHECK(b[0] == doctest::Approx(0.28209479177).epsilon(1e-9));

  // At a pole all sectoral entries vanish.
  Eigen::VectorXd pole = sh_basis(0.0, 0.0, config);
  for (int i = 5; i < 9; ++i) CHECK(pole[i] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("spherical harmonics match the associated-Legendre oracle") {
  SphericalConfig config;
  double theta = M_PI / 3, phi = M_PI / 4;
  Eigen::VectorXd b = sh_basis(theta, phi, config);
  for (int l = 0; l <= 4; ++l) {
    CHECK(b[l] == doctest::Approx(real_sh_oracle(l, 0, theta, phi)).epsilon(1e-9));
  }
  for (int l = 1; l <= 4; ++l) {
    CHECK(b[4 + l] ==
          doctest::Approx(real_sh_oracle(l, l, theta, phi)).epsilon(1e-9));
  }
  // And at a handful of random angles.
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    double t = rng.uniform(0.0, M_PI);
    double p = rng.uniform(-M_PI, M_PI);
    Eigen::VectorXd v = sh_basis(t, p, config);
    for (int l = 0; l <= 4; ++l) {
      CHECK(v[l] == doctest::Approx(real_sh_oracle(l, 0, t, p)).epsilon(1e-9));
    }
    for (int l = 1; l <= 4; ++l) {
      CHECK(v[4 + l] == doctest::Approx(real_sh_oracle(l, l, t, p)).epsilon(1e-9));
    }
  }
}

TEST_CASE("sh_encode concatenates entry then exit and swaps blocks") {
  SphericalConfig config;
  SphereCoords c{0.7, 0.2, 2.1, -1.4};
  Eigen::VectorXd enc = sh_encode(c, config);
  REQUIRE(enc.size() == 18);
  CHECK((enc.head(9) - sh_basis(0.7, 0.2, config)).norm() == 0.0);
  CHECK((enc.tail(9) - sh_basis(2.1, -1.4, config)).norm() == 0.0);

  SphereCoords swapped{2.1, -1.4, 0.7, 0.2};
  Eigen::VectorXd enc2 = sh_encode(swapped, config);
  CHECK((enc2.head(9) - enc.tail(9)).norm() == 0.0);
  CHECK((enc2.tail(9) - enc.head(9)).norm() == 0.0);
}

TEST_CASE("sh basis is continuous across the longitude seam") {
  SphericalConfig config;
  double eps = 1e-7;
  Eigen::VectorXd a = sh_basis(1.0, M_PI - eps, config);
  Eigen::VectorXd b = sh_basis(1.0, -M_PI + eps, config);
  CHECK((a - b).norm() < 1e-5);
}

TEST_CASE("sine sectoral flag appends the second real pair") {
  SphericalConfig config;
  config.include_sine_sectoral = true;
  CHECK(config.terms_per_point() == 13);
  Eigen::VectorXd b = sh_basis(1.0, 0.6, config);
  REQUIRE(b.size() == 13);
  // The sin-type sectoral of degree l relates to the cos-type by the
  // tangent of l*phi.
  for (int l = 1; l <= 4; ++l) {
    CHECK(b[9 + l - 1] ==
          doctest::Approx(b[4 + l] * std::tan(l * 0.6)).epsilon(1e-9));
  }
}
