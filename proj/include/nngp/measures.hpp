#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace nngp {

using Complex = std::complex<double>;

struct Atom {
  double location = 0.0;
  double weight = 0.0;
};

// A probability measure on the real line: point masses plus a density sampled
// on a strictly increasing grid and linearly interpolated between nodes (zero
// outside the grid). Immutable once constructed.
class SpectralMeasure {
 public:
  // Validates the invariants: weights in [0, 1], densities >= 0, grid strictly
  // increasing, total mass 1 within mass_tolerance.
  SpectralMeasure(std::vector<Atom> atoms, std::vector<double> grid,
                  std::vector<double> density, double mass_tolerance = 1e-3);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::span<const double> grid() const { return grid_; }
  std::span<const double> density() const { return density_; }
  bool has_density() const { return grid_.size() >= 2; }

  double atom_mass() const;
  double density_mass() const;
  double total_mass() const { return atom_mass() + density_mass(); }

  // Weight of atoms with |location| <= tol.
  double zero_atom_weight(double tol = 0.0) const;

  double support_min() const;
  double support_max() const;

  // Interpolated density at x (0 outside the grid).
  double density_at(double x) const;
  double cdf(double x) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> grid_;
  std::vector<double> density_;
  std::vector<double> cumulative_;  // density mass up to each grid node
};

struct MpMapParams {
  double gamma = 1.0;
  double eval_offset_y = 1e-3;
  std::vector<double> grid;  // empty: default_mp_grid(mu, gamma, grid_points)
  int grid_points = 2000;
  int max_iters = 10000;
  double damping = 0.5;
  double tol = 1e-9;

  void validate() const;
};

// Atomic measure (1/n) sum delta_{lambda_i}; repeated values merge into one atom.
SpectralMeasure empirical_spectral_measure(std::span<const double> eigenvalues);

// S(z) = int dF(lambda) / (lambda - z). The density part is integrated exactly
// for the piecewise-linear interpolant, so evaluations close to the real axis
// stay accurate. Throws SingularEvaluation for real z on the support.
Complex stieltjes(const SpectralMeasure& measure, Complex z);

// density(x) = Im S(x + i*y0) / pi with the contribution -w0/z of a declared
// zero atom removed first; clipped at 0 and rescaled to mass 1 - w0. The zero
// atom, when w0 > 0, is added explicitly.
SpectralMeasure invert_stieltjes(const std::function<Complex(Complex)>& transform,
                                 std::span<const double> grid, double y0,
                                 double zero_atom_weight = 0.0);

// Stieltjes transform of rho_MP^gamma (boxtimes) mu at z, by damped fixed-point
// iteration from S0 = -1/z, polished by Newton steps once the iteration has
// warmed up. Throws ConvergenceFailure.
Complex mp_fixed_point(const SpectralMeasure& mu, double gamma, Complex z,
                       const MpMapParams& params);

// rho_MP^gamma (boxtimes) mu on params.grid (or the default grid).
SpectralMeasure mp_map(const SpectralMeasure& mu, const MpMapParams& params);

// 2000 uniform points on [1e-4, lambda_max], lambda_max =
// (1 + sqrt(gamma))^2 * max(supp mu) * 1.2.
std::vector<double> default_mp_grid(const SpectralMeasure& mu, double gamma,
                                    int points = 2000);

// Marchenko-Pastur bulk density with ratio gamma and unit variance; the point
// mass 1 - 1/gamma at 0 for gamma > 1 is not included.
double mp_closed_form(double gamma, double lambda);

// rho_MP^gamma as a SpectralMeasure: bulk density on a uniform grid clipped
// 1e-4 inside the support, plus the zero atom when gamma > 1.
SpectralMeasure mp_law(double gamma, int grid_points = 2000);

// Atoms contribute weight * f(location); the density contributes trapezoid
// quadrature on its grid. With exclude_zero_atom, atoms at 0 and grid nodes at
// lambda <= 0 are skipped (integration over the strictly positive part).
double integrate_against(const SpectralMeasure& measure,
                         const std::function<double(double)>& f,
                         bool exclude_zero_atom = false);

// Kolmogorov-Smirnov distance between the empirical CDF of samples and the
// measure's CDF.
double ks_distance(std::span<const double> samples, const SpectralMeasure& measure);

}  // namespace nngp
