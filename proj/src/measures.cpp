#include "nngp/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

namespace {

constexpr double kPi = std::numbers::pi;

std::string describe(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Exact integral of the piecewise-linear interpolant of (grid, density)
// against 1/(t - w).
Complex density_stieltjes(std::span<const double> grid, std::span<const double> density,
                          Complex w) {
  Complex sum = 0.0;
  Complex prev = grid[0] - w;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const Complex next = grid[i + 1] - w;
    const double r0 = density[i];
    const double r1 = density[i + 1];
    if (r0 != 0.0 || r1 != 0.0) {
      const double h = grid[i + 1] - grid[i];
      const double q = (r1 - r0) / h;
      sum += (r0 - q * prev) * std::log(next / prev) + q * h;
    }
    prev = next;
  }
  return sum;
}

}  // namespace

ConvergenceFailure::ConvergenceFailure(double grid_point, double residual, int iterations)
    : NumericalFailure("fixed-point iteration did not converge at grid point " +
                       describe(grid_point) + " (residual " + describe(residual) +
                       " after " + std::to_string(iterations) + " iterations)"),
      grid_point_(grid_point),
      residual_(residual),
      iterations_(iterations) {}

SpectralMeasure::SpectralMeasure(std::vector<Atom> atoms, std::vector<double> grid,
                                 std::vector<double> density, double mass_tolerance)
    : atoms_(std::move(atoms)), grid_(std::move(grid)), density_(std::move(density)) {
  if (grid_.size() != density_.size())
    throw InvalidArgument("density grid and values differ in length");
  if (grid_.size() == 1) throw InvalidArgument("density grid needs at least two nodes");
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.location) || !(a.weight >= 0.0 && a.weight <= 1.0 + 1e-12))
      throw InvalidArgument("atom weight outside [0, 1] or non-finite location");
  }
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (!std::isfinite(grid_[i]) || !std::isfinite(density_[i]) || density_[i] < 0.0)
      throw InvalidArgument("density must be finite and non-negative");
    if (i > 0 && !(grid_[i] > grid_[i - 1]))
      throw InvalidArgument("density grid must be strictly increasing");
  }
  std::sort(atoms_.begin(), atoms_.end(),
            [](const Atom& a, const Atom& b) { return a.location < b.location; });

  cumulative_.assign(grid_.size(), 0.0);
  for (std::size_t i = 1; i < grid_.size(); ++i)
    cumulative_[i] = cumulative_[i - 1] +
                     0.5 * (density_[i] + density_[i - 1]) * (grid_[i] - grid_[i - 1]);

  const double mass = total_mass();
  if (std::abs(mass - 1.0) > mass_tolerance)
    throw InvalidArgument("total mass " + describe(mass) + " differs from 1");
}

double SpectralMeasure::atom_mass() const {
  double m = 0.0;
  for (const auto& a : atoms_) m += a.weight;
  return m;
}

double SpectralMeasure::density_mass() const {
  return cumulative_.empty() ? 0.0 : cumulative_.back();
}

double SpectralMeasure::zero_atom_weight(double tol) const {
  double w = 0.0;
  for (const auto& a : atoms_)
    if (std::abs(a.location) <= tol) w += a.weight;
  return w;
}

double SpectralMeasure::support_min() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& a : atoms_)
    if (a.weight > 0.0) lo = std::min(lo, a.location);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    if (density_[i] > 0.0 || (i + 1 < grid_.size() && density_[i + 1] > 0.0)) {
      lo = std::min(lo, grid_[i]);
      break;
    }
  }
  return lo;
}

double SpectralMeasure::support_max() const {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& a : atoms_)
    if (a.weight > 0.0) hi = std::max(hi, a.location);
  for (std::size_t i = grid_.size(); i-- > 0;) {
    if (density_[i] > 0.0 || (i > 0 && density_[i - 1] > 0.0)) {
      hi = std::max(hi, grid_[i]);
      break;
    }
  }
  return hi;
}

double SpectralMeasure::density_at(double x) const {
  if (!has_density() || x < grid_.front() || x > grid_.back()) return 0.0;
  auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.end()) return density_.back();
  const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double u = (x - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return density_[i] + u * (density_[i + 1] - density_[i]);
}

double SpectralMeasure::cdf(double x) const {
  double f = 0.0;
  for (const auto& a : atoms_) {
    if (a.location > x) break;
    f += a.weight;
  }
  if (!has_density() || x < grid_.front()) return f;
  if (x >= grid_.back()) return f + cumulative_.back();
  auto it = std::upper_bound(grid_.begin(), grid_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid_.begin()) - 1;
  const double dx = x - grid_[i];
  const double q = (density_[i + 1] - density_[i]) / (grid_[i + 1] - grid_[i]);
  return f + cumulative_[i] + density_[i] * dx + 0.5 * q * dx * dx;
}

void MpMapParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  if (!(eval_offset_y > 0.0)) throw InvalidArgument("eval_offset_y must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("tol must be > 0");
  if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("damping must lie in (0, 1]");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  if (grid.empty() && grid_points < 2) throw InvalidArgument("grid_points must be >= 2");
}

SpectralMeasure empirical_spectral_measure(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) throw InvalidArgument("empirical spectral measure of an empty list");
  std::vector<double> sorted(eigenvalues.begin(), eigenvalues.end());
  for (double v : sorted)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite eigenvalue");
  std::sort(sorted.begin(), sorted.end());

  const double n = static_cast<double>(sorted.size());
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    atoms.push_back({sorted[i], static_cast<double>(j - i) / n});
    i = j;
  }
  return SpectralMeasure(std::move(atoms), {}, {});
}

Complex stieltjes(const SpectralMeasure& measure, Complex z) {
  if (z.imag() == 0.0) {
    const double x = z.real();
    for (const auto& a : measure.atoms())
      if (a.weight > 0.0 && a.location == x)
        throw SingularEvaluation("Stieltjes transform evaluated on an atom at " + describe(x));
    if (measure.has_density()) {
      const auto grid = measure.grid();
      const auto dens = measure.density();
      if (x >= grid.front() && x <= grid.back()) {
        auto it = std::upper_bound(grid.begin(), grid.end(), x);
        std::size_t i = static_cast<std::size_t>(it - grid.begin());
        i = i == 0 ? 0 : i - 1;
        const std::size_t j = std::min(i + 1, grid.size() - 1);
        if (dens[i] > 0.0 || dens[j] > 0.0)
          throw SingularEvaluation("Stieltjes transform evaluated on the support at " +
                                   describe(x));
      }
    }
  }

  Complex s = 0.0;
  for (const auto& a : measure.atoms())
    if (a.weight > 0.0) s += a.weight / (a.location - z);
  if (measure.has_density()) s += density_stieltjes(measure.grid(), measure.density(), z);
  return s;
}

SpectralMeasure invert_stieltjes(const std::function<Complex(Complex)>& transform,
                                 std::span<const double> grid, double y0,
                                 double zero_atom_weight) {
  if (!(y0 > 0.0)) throw InvalidArgument("inversion offset y0 must be > 0");
  if (grid.size() < 2) throw InvalidArgument("inversion grid needs at least two nodes");
  if (!(zero_atom_weight >= 0.0 && zero_atom_weight <= 1.0))
    throw InvalidArgument("zero atom weight outside [0, 1]");

  std::vector<double> density(grid.size(), 0.0);
  parallel_for(grid.size(), [&](std::size_t i) {
    const Complex z(grid[i], y0);
    const Complex s = transform(z) + zero_atom_weight / z;
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw NumericalFailure("non-finite Stieltjes value at grid point " + describe(grid[i]));
    density[i] = std::max(0.0, s.imag() / kPi);
  });

  std::vector<double> nodes(grid.begin(), grid.end());
  double mass = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i)
    mass += 0.5 * (density[i] + density[i - 1]) * (nodes[i] - nodes[i - 1]);

  const double target = 1.0 - zero_atom_weight;
  if (target > 0.0) {
    if (!(mass > 0.0))
      throw NumericalFailure("inverted density has no mass on the grid");
    for (double& v : density) v *= target / mass;
  } else {
    std::fill(density.begin(), density.end(), 0.0);
  }

  std::vector<Atom> atoms;
  if (zero_atom_weight > 0.0) atoms.push_back({0.0, zero_atom_weight});
  return SpectralMeasure(std::move(atoms), std::move(nodes), std::move(density));
}

Complex mp_fixed_point(const SpectralMeasure& mu, double gamma, Complex z,
                       const MpMapParams& params) {
  const bool with_density = mu.has_density();
  const auto grid = mu.grid();
  const auto dens = mu.density();
  const double density_mass = mu.density_mass();

  // int dmu(t) / (t a - z) with a = 1 - gamma - gamma z S.
  auto integrand = [&](Complex s) {
    const Complex a = 1.0 - gamma - gamma * z * s;
    Complex total = 0.0;
    for (const auto& atom : mu.atoms())
      if (atom.weight > 0.0) total += atom.weight / (atom.location * a - z);
    if (with_density) {
      if (std::abs(a) < 1e-300)
        total -= density_mass / z;
      else
        total += density_stieltjes(grid, dens, z / a) / a;
    }
    return total;
  };

  // Damped Picard from S0 = -1/z. Near the support edges the map contracts
  // ever more weakly as y0 -> 0, so after a short warm-up the iteration
  // switches to Newton on F(S) - S (derivative by a complex difference),
  // falling back to a Picard step whenever Newton fails to reduce the residual.
  constexpr int kWarmup = 5;
  const double im_sign = z.imag() >= 0.0 ? 1.0 : -1.0;
  Complex s = -1.0 / z;
  double residual = 0.0;
  for (int it = 1; it <= params.max_iters; ++it) {
    const Complex fs = integrand(s);
    const Complex g = fs - s;
    residual = std::abs(g);
    if (!std::isfinite(residual)) break;
    if (residual < params.tol * std::max(1.0, std::abs(s))) return fs;
    if (it > kWarmup) {
      const double h = 1e-7 * std::max(1.0, std::abs(s));
      const Complex dg = (integrand(s + h) - (s + h) - g) / h;
      if (std::abs(dg) > 0.0 && std::isfinite(std::abs(dg))) {
        Complex step = -g / dg;
        bool accepted = false;
        for (int half = 0; half < 8 && !accepted; ++half, step *= 0.5) {
          const Complex trial = s + step;
          if (im_sign * trial.imag() < 0.0) continue;
          const double r = std::abs(integrand(trial) - trial);
          if (std::isfinite(r) && r < residual) {
            s = trial;
            accepted = true;
          }
        }
        if (accepted) continue;
      }
    }
    s = (1.0 - params.damping) * s + params.damping * fs;
  }
  throw ConvergenceFailure(z.real(), residual, params.max_iters);
}

std::vector<double> default_mp_grid(const SpectralMeasure& mu, double gamma, int points) {
  if (points < 2) throw InvalidArgument("grid needs at least two points");
  const double top = mu.support_max();
  if (!(top > 0.0)) throw InvalidArgument("measure must have positive support for the MP grid");
  const double lambda_max = std::pow(1.0 + std::sqrt(gamma), 2) * top * 1.2;
  const double lo = 1e-4;
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] = lo + (lambda_max - lo) * i / (points - 1);
  return grid;
}

SpectralMeasure mp_map(const SpectralMeasure& mu, const MpMapParams& params) {
  params.validate();
  const double gamma = params.gamma;
  std::vector<double> grid =
      params.grid.empty() ? default_mp_grid(mu, gamma, params.grid_points) : params.grid;

  // Zero eigenvalue mass of the product: rank is min(rank of mu's matrix, N).
  const double mu_zero = mu.zero_atom_weight(0.0);
  const double zero_weight = std::max(mu_zero, gamma > 1.0 ? 1.0 - 1.0 / gamma : 0.0);

  return invert_stieltjes(
      [&](Complex z) { return mp_fixed_point(mu, gamma, z, params); }, grid,
      params.eval_offset_y, zero_weight);
}

double mp_closed_form(double gamma, double lambda) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  const double r = std::sqrt(gamma);
  const double lo = (1.0 - r) * (1.0 - r);
  const double hi = (1.0 + r) * (1.0 + r);
  if (!(lambda > lo && lambda < hi) || lambda <= 0.0) return 0.0;
  return std::sqrt((hi - lambda) * (lambda - lo)) / (2.0 * kPi * gamma * lambda);
}

SpectralMeasure mp_law(double gamma, int grid_points) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  if (grid_points < 3) throw InvalidArgument("grid_points must be >= 3");
  const double r = std::sqrt(gamma);
  const double lo = (1.0 - r) * (1.0 - r) + 1e-4;
  const double hi = (1.0 + r) * (1.0 + r) - 1e-4;

  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  std::vector<double> density(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
    density[i] = mp_closed_form(gamma, grid[i]);
  }

  const double zero = gamma > 1.0 ? 1.0 - 1.0 / gamma : 0.0;
  double mass = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    mass += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  for (double& v : density) v *= (1.0 - zero) / mass;

  std::vector<Atom> atoms;
  if (zero > 0.0) atoms.push_back({0.0, zero});
  return SpectralMeasure(std::move(atoms), std::move(grid), std::move(density));
}

double integrate_against(const SpectralMeasure& measure, const std::function<double(double)>& f,
                         bool exclude_zero_atom) {
  double total = 0.0;
  for (const auto& a : measure.atoms()) {
    if (a.weight == 0.0) continue;
    if (exclude_zero_atom && a.location == 0.0) continue;
    const double v = f(a.location);
    if (!std::isfinite(v))
      throw NumericalFailure("integrand is not finite at atom " + describe(a.location));
    total += a.weight * v;
  }

  const auto grid = measure.grid();
  const auto dens = measure.density();
  double prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double cur = 0.0;
    if (dens[i] > 0.0 && !(exclude_zero_atom && grid[i] <= 0.0)) {
      const double v = f(grid[i]);
      if (!std::isfinite(v))
        throw NumericalFailure("integrand is not finite at grid point " + describe(grid[i]));
      cur = v * dens[i];
    }
    if (i > 0) total += 0.5 * (prev + cur) * (grid[i] - grid[i - 1]);
    prev = cur;
  }
  return total;
}

double ks_distance(std::span<const double> samples, const SpectralMeasure& measure) {
  if (samples.empty()) throw InvalidArgument("KS distance of an empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double x = sorted[i];
    const double left = measure.cdf(std::nextafter(x, -std::numeric_limits<double>::infinity()));
    const double right = measure.cdf(x);
    worst = std::max({worst, std::abs(left - static_cast<double>(i) / n),
                      std::abs(right - static_cast<double>(j) / n)});
    i = j;
  }
  return worst;
}

}  // namespace nngp
