#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "nngp/errors.hpp"
#include "nngp/measures.hpp"

using namespace nngp;

namespace {

SpectralMeasure point_mass(double x) { return SpectralMeasure({{x, 1.0}}, {}, {}); }

double mp_density_ref(double gamma, double lambda) {
  const double a = std::pow(1 - std::sqrt(gamma), 2), b = std::pow(1 + std::sqrt(gamma), 2);
  if (lambda <= a || lambda >= b) return 0.0;
  return std::sqrt((b - lambda) * (lambda - a)) / (2 * std::numbers::pi * gamma * lambda);
}

}  // namespace

TEST_CASE("measure invariants are validated") {
  CHECK_THROWS_AS(SpectralMeasure({{0.0, 0.5}}, {}, {}), InvalidArgument);
  CHECK_THROWS_AS(SpectralMeasure({{0.0, 1.5}}, {}, {}), InvalidArgument);
  CHECK_THROWS_AS(SpectralMeasure({}, {0.0, 1.0, 0.5}, {1.0, 1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(SpectralMeasure({}, {0.0, 1.0}, {-1.0, 3.0}), InvalidArgument);
  const SpectralMeasure u({}, {0.0, 1.0}, {1.0, 1.0});
  CHECK(u.total_mass() == doctest::Approx(1.0));
  CHECK(u.cdf(0.25) == doctest::Approx(0.25));
  CHECK(u.density_at(2.0) == 0.0);
}

TEST_CASE("empirical measure merges repeated eigenvalues") {
  const std::vector<double> ev{0.0, 0.0, 1.0, 2.0};
  const SpectralMeasure m = empirical_spectral_measure(ev);
  CHECK(m.atoms().size() == 3);
  CHECK(m.zero_atom_weight() == doctest::Approx(0.5));
  CHECK(m.cdf(1.5) == doctest::Approx(0.75));
}

TEST_CASE("stieltjes of a point mass") {
  const Complex z(0.3, 0.7);
  const Complex s = stieltjes(point_mass(2.0), z);
  CHECK(std::abs(s - 1.0 / (2.0 - z)) < 1e-14);
  CHECK_THROWS_AS(stieltjes(point_mass(2.0), Complex(2.0, 0.0)), SingularEvaluation);
}

TEST_CASE("stieltjes of a uniform density is exact off the axis") {
  const SpectralMeasure u({}, {1.0, 3.0}, {0.5, 0.5});
  for (double y : {1e-6, 1e-3, 1.0}) {
    const Complex z(2.0, y);
    const Complex ref = 0.5 * std::log((3.0 - z) / (1.0 - z));
    CHECK(std::abs(stieltjes(u, z) - ref) < 1e-12);
  }
}

TEST_CASE("inversion recovers a known density") {
  const SpectralMeasure u({}, {1.0, 3.0}, {0.5, 0.5});
  std::vector<double> grid;
  for (int i = 0; i <= 400; ++i) grid.push_back(0.5 + 3.0 * i / 400);
  const SpectralMeasure r =
      invert_stieltjes([&](Complex z) { return stieltjes(u, z); }, grid, 1e-5);
  CHECK(r.density_at(2.0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(r.density_at(0.6) < 1e-3);
}

TEST_CASE("closed-form MP density") {
  for (double g : {0.25, 0.5, 1.0, 2.0})
    for (double l : {0.05, 0.4, 1.0, 1.7, 3.0})
      CHECK(mp_closed_form(g, l) == doctest::Approx(mp_density_ref(g, l)).epsilon(1e-12));
  const SpectralMeasure m = mp_law(2.0);
  CHECK(m.zero_atom_weight() == doctest::Approx(0.5));
  CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mp_map of a point mass is the MP law") {
  for (double gamma : {0.5, 2.0 / 3.0}) {
    MpMapParams p;
    p.gamma = gamma;
    p.eval_offset_y = 1e-4;
    p.grid_points = 400;
    const SpectralMeasure m = mp_map(point_mass(1.0), p);
    double worst = 0.0;
    const double a = std::pow(1 - std::sqrt(gamma), 2), b = std::pow(1 + std::sqrt(gamma), 2);
    for (double l = a + 0.05; l < b - 0.05; l += 0.01)
      worst = std::max(worst, std::abs(m.density_at(l) - mp_density_ref(gamma, l)));
    CHECK(worst < 1e-2);
  }
}

TEST_CASE("mp_map of a point mass away from 1 rescales") {
  // rho_MP^gamma boxtimes delta_c is rho_MP^gamma dilated by c.
  MpMapParams p;
  p.gamma = 0.5;
  p.eval_offset_y = 1e-4;
  p.grid_points = 400;
  const SpectralMeasure m = mp_map(point_mass(3.0), p);
  for (double l : {1.0, 2.0, 4.0, 6.0})
    CHECK(m.density_at(l) == doctest::Approx(mp_density_ref(0.5, l / 3.0) / 3.0).epsilon(2e-2));
}

TEST_CASE("mp_map places the rank-deficiency atom for gamma > 1") {
  MpMapParams p;
  p.gamma = 2.0;
  p.grid_points = 400;
  const SpectralMeasure m = mp_map(point_mass(1.0), p);
  CHECK(m.zero_atom_weight() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(m.total_mass() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("fixed point satisfies its own equation") {
  const SpectralMeasure mu({{0.5, 0.3}, {2.0, 0.7}}, {}, {});
  MpMapParams p;
  p.gamma = 0.7;
  const Complex z(1.2, 0.05);
  const Complex s = mp_fixed_point(mu, p.gamma, z, p);
  const Complex rhs = 0.3 / (0.5 * (1.0 - p.gamma - p.gamma * z * s) - z) +
                      0.7 / (2.0 * (1.0 - p.gamma - p.gamma * z * s) - z);
  CHECK(std::abs(s - rhs) < 1e-7 * std::max(1.0, std::abs(s)));
}

TEST_CASE("parameter validation") {
  MpMapParams p;
  p.gamma = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p.gamma = 1.0;
  p.eval_offset_y = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
}

TEST_CASE("non-convergence is reported") {
  MpMapParams p;
  p.gamma = 1.0;
  p.max_iters = 2;
  p.tol = 1e-15;
  CHECK_THROWS_AS(mp_fixed_point(point_mass(1.0), 1.0, Complex(0.5, 1e-6), p),
                  ConvergenceFailure);
}

TEST_CASE("integration and KS distance") {
  const SpectralMeasure m = mp_law(0.5);
  // int 1/lambda drho_MP^psi = 1/(1 - psi); int 1/lambda^2 = 1/(1 - psi)^3
  CHECK(integrate_against(m, [](double l) { return 1.0 / l; }) ==
        doctest::Approx(2.0).epsilon(5e-3));
  CHECK(integrate_against(m, [](double l) { return 1.0 / (l * l); }) ==
        doctest::Approx(8.0).epsilon(1e-2));
  CHECK(integrate_against(m, [](double l) { return l; }) == doctest::Approx(1.0).epsilon(1e-3));

  const SpectralMeasure u({}, {0.0, 1.0}, {1.0, 1.0});
  std::vector<double> s;
  for (int i = 0; i < 1000; ++i) s.push_back((i + 0.5) / 1000.0);
  CHECK(ks_distance(s, u) < 1e-3);
  std::vector<double> shifted(s);
  for (double& v : shifted) v = 0.5 + 0.5 * v;
  CHECK(ks_distance(shifted, u) == doctest::Approx(0.5).epsilon(1e-2));
}
