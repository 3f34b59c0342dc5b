#include "nngp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nngp/errors.hpp"
#include "nngp/histogram.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate(const SpectralMeasure& mu, const std::function<double(double)>& f) {
  return integrate_against(mu, f, false);
}

// Bisection for a decreasing/increasing scalar equation on [lo, hi] given the
// sign at lo. 200 halvings exhaust double precision for any bracket.
template <class F>
double bisect(F&& f, double lo, double hi) {
  const bool lo_negative = f(lo) < 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((f(mid) < 0.0) == lo_negative)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double mc_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double mc_stderr(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / double(v.size() - 1) / double(v.size()));
}

// Weighted least squares y = alpha + beta / d; returns (alpha, se(alpha)).
std::pair<double, double> extrapolate(const std::vector<AbcRung>& ladder,
                                      double AbcRung::*value, double AbcRung::*se) {
  if (ladder.size() == 1) return {ladder[0].*value, ladder[0].*se};
  // Exact rungs (zero standard error, e.g. a zero teacher) get a floor
  // relative to the noisiest rung; if every rung is exact the fit is unweighted.
  double se_max = 0.0;
  for (const auto& r : ladder) se_max = std::max(se_max, r.*se);
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : ladder) {
    const double s = std::max(r.*se, 1e-8 * se_max);
    const double w = se_max > 0.0 ? 1.0 / (s * s) : 1.0;
    const double x = 1.0 / r.d;
    sw += w;
    sx += w * x;
    sy += w * r.*value;
    sxx += w * x * x;
    sxy += w * x * r.*value;
  }
  const double det = sw * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) return {sy / sw, se_max > 0.0 ? std::sqrt(1.0 / sw) : 0.0};
  const double alpha = (sxx * sy - sx * sxy) / det;
  return {alpha, se_max > 0.0 ? std::sqrt(sxx / det) : 0.0};
}

// K^{phi, depth}(x, x') for the rows of a small input block. The identity
// activation keeps the input inner products at every depth.
Eigen::MatrixXd small_kernel(const Eigen::MatrixXd& x, const Activation& phi, int depth,
                             const QuadratureRule& quad) {
  Eigen::MatrixXd k = x * x.transpose();
  if (phi.tag() == ActivationTag::identity) return k;
  for (int layer = 1; layer < depth; ++layer) {
    Eigen::MatrixXd next(k.rows(), k.cols());
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      next(i, i) = kernel_step(k(i, i), k(i, i), k(i, i), phi, quad);
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      for (Eigen::Index j = i + 1; j < k.rows(); ++j)
        next(i, j) = next(j, i) = kernel_step(k(i, i), k(i, j), k(j, j), phi, quad);
    k = next;
  }
  return k;
}

}  // namespace

SpectralIntegral spectral_g(const SpectralMeasure& measure, double sigma_eps, int order,
                            bool exclude_zero_atom, double ceiling) {
  if (order != 1 && order != 2) throw InvalidArgument("spectral_g order must be 1 or 2");
  if (!(sigma_eps >= 0.0)) throw InvalidArgument("sigma_eps must be >= 0");
  const double shift = sigma_eps * sigma_eps;
  if (shift == 0.0 && !exclude_zero_atom && measure.zero_atom_weight() > 0.0)
    throw InvalidArgument("sigma_eps = 0 with a zero atom requires exclude_zero_atom");

  SpectralIntegral out;
  try {
    out.value = integrate_against(
        measure, [&](double l) { return std::pow(l + shift, -order); }, exclude_zero_atom);
  } catch (const NumericalFailure&) {
    out.value = kInf;
  }
  out.divergent = !std::isfinite(out.value) || out.value > ceiling;
  return out;
}

std::string_view to_string(AbcMode mode) {
  return mode == AbcMode::closed_form ? "closed-form" : "monte-carlo";
}

AbcRung estimate_abc(const TeacherModel& teacher, const Activation& phi, int depth, int n,
                     int samples, int quadrature_order, const RngSpec& spec) {
  if (samples < 2) throw InvalidArgument("abc Monte-Carlo needs at least 2 samples");
  const QuadratureRule quad(quadrature_order);
  const int chunks = std::min(samples, 64);
  std::vector<std::vector<double>> a(chunks), b(chunks), c(chunks);
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t ch) {
    const int begin = static_cast<int>(std::int64_t(samples) * ch / chunks);
    const int end = static_cast<int>(std::int64_t(samples) * (ch + 1) / chunks);
    Rng rng(spec.child(ch));
    for (int s = begin; s < end; ++s) {
      const Eigen::MatrixXd x = sample_inputs(teacher, 3, rng);  // rows x, x', x''
      const Eigen::VectorXd f = teacher.f(x);
      const double tau = teacher.sigma_tau() * rng.normal();
      const Eigen::MatrixXd k = small_kernel(x, phi, depth, quad);
      a[ch].push_back(n * f(0) * f(1) * k(0, 1));
      b[ch].push_back(n * (f(1) * f(1) + tau * tau) * k(0, 1) * k(0, 1));
      c[ch].push_back(double(n) * (n - 1) * f(1) * f(2) * k(0, 1) * k(0, 2));
    }
  });
  auto flatten = [](const std::vector<std::vector<double>>& parts) {
    std::vector<double> all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
  };
  const auto av = flatten(a), bv = flatten(b), cv = flatten(c);
  AbcRung r;
  r.d = teacher.d();
  r.n = n;
  r.a = mc_mean(av);
  r.b = mc_mean(bv);
  r.c = mc_mean(cv);
  r.a_se = mc_stderr(av, r.a);
  r.b_se = mc_stderr(bv, r.b);
  r.c_se = mc_stderr(cv, r.c);
  return r;
}

AbcConstants abc_constants(const TeacherFactory& teacher, const Activation& phi, int depth,
                           double psi, AbcMode mode, const AbcMcParams& params) {
  if (!(psi > 0.0)) throw InvalidArgument("psi must be > 0");
  AbcConstants out;
  out.provenance = mode;
  if (mode == AbcMode::closed_form) {
    const TeacherModel probe = teacher(params.ladder.empty() ? 100 : params.ladder.front());
    if (phi.tag() != ActivationTag::identity || probe.target() != TargetKind::linear ||
        probe.input_law() != InputLaw::isotropic)
      throw UnsupportedConfiguration(
          "closed-form A, B, C exist only for the linear teacher with identity activation");
    out.a = psi;
    out.b = 0.0;
    out.c = psi * psi;
    return out;
  }
  if (params.ladder.empty()) throw InvalidArgument("abc ladder must not be empty");
  for (std::size_t i = 0; i < params.ladder.size(); ++i) {
    const int d = params.ladder[i];
    const int n = std::max(1, static_cast<int>(std::lround(psi * d)));
    out.ladder.push_back(estimate_abc(teacher(d), phi, depth, n, params.samples,
                                      params.quadrature_order, params.rng.child(i)));
  }
  std::tie(out.a, out.a_se) = extrapolate(out.ladder, &AbcRung::a, &AbcRung::a_se);
  std::tie(out.b, out.b_se) = extrapolate(out.ladder, &AbcRung::b, &AbcRung::b_se);
  std::tie(out.c, out.c_se) = extrapolate(out.ladder, &AbcRung::c, &AbcRung::c_se);
  return out;
}

double estimate_limit_f2(const TeacherModel& teacher, int samples, const RngSpec& spec) {
  if (samples < 1) throw InvalidArgument("limit_f2 needs at least one sample");
  Rng rng(spec);
  const Eigen::MatrixXd x = sample_inputs(teacher, samples, rng);
  return teacher.f(x).squaredNorm() / samples;
}

LimitingSpectrum limiting_kernel_spectrum(double psi, const Activation& phi, int depth,
                                          const SpectrumEstimateParams& params) {
  if (!(psi > 0.0)) throw InvalidArgument("psi must be > 0");
  if (phi.tag() == ActivationTag::identity && !params.input_law)
    return {mp_law(psi, params.grid_points), "closed-form"};

  const int n = params.estimate_n;
  const int d = std::max(1, static_cast<int>(std::lround(n / psi)));
  const QuadratureRule quad(params.quadrature_order);
  const TeacherModel law = params.input_law ? params.input_law(d) : TeacherModel::zero(d, 0.0);
  std::vector<double> pooled;
  for (int draw = 0; draw < params.draws; ++draw) {
    const Eigen::MatrixXd x = sample_inputs(law, n, params.rng.child(draw));
    const auto values =
        eigenvalues(phi.tag() == ActivationTag::identity
                        ? input_gram(x).entries
                        : conjugate_kernel_matrix(x, depth, phi, quad).entries);
    pooled.insert(pooled.end(), values.begin(), values.end());
  }
  std::sort(pooled.begin(), pooled.end());
  const double total = double(pooled.size());
  const double top = pooled.back();

  // Zero modes and far outliers become atoms; the bulk becomes a density.
  std::vector<Atom> atoms;
  std::vector<double> bulk;
  double zero_weight = 0.0;
  const double q1 = quantile(pooled, 0.25), q3 = quantile(pooled, 0.75);
  const double fence = q3 + 3.0 * (q3 - q1);
  for (double v : pooled) {
    if (v <= 1e-8 * top)
      zero_weight += 1.0 / total;
    else if (v > fence)
      atoms.push_back({v, 1.0 / total});
    else
      bulk.push_back(v);
  }
  if (zero_weight > 0.0) atoms.insert(atoms.begin(), Atom{0.0, zero_weight});

  std::vector<double> grid, density;
  if (!bulk.empty()) {
    const Histogram h = make_histogram(bulk);
    const double bulk_mass = double(bulk.size()) / total;
    grid.push_back(h.edges.front());
    density.push_back(0.0);
    for (std::size_t b = 0; b < h.bins(); ++b) {
      const double width = h.edges[b + 1] - h.edges[b];
      grid.push_back(0.5 * (h.edges[b] + h.edges[b + 1]));
      density.push_back(double(h.counts[b]) / (double(bulk.size()) * width));
    }
    grid.push_back(h.edges.back());
    density.push_back(0.0);
    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      mass += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
    for (double& v : density) v *= bulk_mass / mass;
  }
  return {SpectralMeasure(std::move(atoms), std::move(grid), std::move(density)),
          "estimated: exact conjugate-kernel spectra, n=" + std::to_string(n) +
              ", draws=" + std::to_string(params.draws)};
}

GPair spectral_pair(const SpectralMeasure& mu, double gamma, double sigma_eps) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  const double s2 = sigma_eps * sigma_eps;
  GPair out;

  if (s2 == 0.0) {
    if (gamma == 1.0) return {kInf, kInf};
    if (gamma < 1.0) {
      double m1, m2;
      try {
        m1 = integrate(mu, [](double t) { return 1.0 / t; });
        m2 = integrate(mu, [](double t) { return 1.0 / (t * t); });
      } catch (const NumericalFailure&) {
        return {kInf, kInf};
      }
      out.g = m1 / (1.0 - gamma);
      out.g2 = (gamma * out.g * m1 + m2) / ((1.0 - gamma) * (1.0 - gamma));
      return out;
    }
    // gamma > 1: companion transform s at z = 0 solves
    // int dmu / (1 + t s) = 1 - 1/gamma.
    const double target = 1.0 - 1.0 / gamma;
    if (mu.zero_atom_weight() >= target) return {kInf, kInf};
    auto excess = [&](double s) {
      return integrate(mu, [s](double t) { return 1.0 / (1.0 + t * s); }) - target;
    };
    double hi = 1.0;
    while (excess(hi) > 0.0) {
      hi *= 2.0;
      if (hi > 1e300) return {kInf, kInf};
    }
    const double s = bisect(excess, 0.0, hi);
    const double slope =
        1.0 / (s * s) - gamma * integrate(mu, [s](double t) {
                          const double q = 1.0 + t * s;
                          return t * t / (q * q);
                        });
    out.g = s / gamma;
    out.g2 = (1.0 / slope) / gamma;
    return out;
  }

  const double z = -s2;
  if (gamma <= 1.0) {
    // S = int dmu / (t (1 - gamma - gamma z S) - z), decreasing residual on [0, 1/s2].
    auto residual = [&](double s) {
      const double a = 1.0 - gamma + gamma * s2 * s;
      return integrate(mu, [&](double t) { return 1.0 / (t * a + s2); }) - s;
    };
    const double s = bisect(residual, 0.0, 1.0 / s2);
    const double a = 1.0 - gamma + gamma * s2 * s;
    const double p = integrate(mu, [&](double t) {
      const double den = t * a + s2;
      return (t * gamma * s + 1.0) / (den * den);
    });
    const double q = integrate(mu, [&](double t) {
      const double den = t * a + s2;
      return t * gamma * z / (den * den);
    });
    out.g = s;
    out.g2 = p / (1.0 - q);
    return out;
  }
  // gamma > 1: companion transform solves z = -1/s + gamma int t dmu / (1 + t s)
  // on its increasing branch in (0, 1/s2]. The rank-deficiency atom at 0 is
  // left out: test cross-kernels lie in the range of K, so those modes never
  // reach the predictor.
  auto level = [&](double s) {
    if (s <= 0.0) return -kInf;
    return -1.0 / s + gamma * integrate(mu, [s](double t) { return t / (1.0 + t * s); }) - z;
  };
  const double s = bisect(level, 0.0, 1.0 / s2);
  const double slope = 1.0 / (s * s) - gamma * integrate(mu, [s](double t) {
                                            const double q = 1.0 + t * s;
                                            return t * t / (q * q);
                                          });
  out.g = s / gamma;
  out.g2 = (1.0 / slope) / gamma;
  return out;
}

double five_term(const DescentTheoryInputs& in, double g, double g2) {
  return in.limit_f2 + in.sigma_tau * in.sigma_tau + in.abc.c * g * g + in.abc.b * g2 -
         2.0 * in.abc.a * g;
}

void check_integrability(const SpectralMeasure& mu) {
  if (mu.zero_atom_weight(1e-12) > 0.0)
    throw HypothesisViolation("limiting kernel spectrum has an atom at 0 (weight " +
                              std::to_string(mu.zero_atom_weight(1e-12)) +
                              "); 1/lambda is not integrable");
  if (mu.support_min() <= 1e-3 * mu.support_max())
    throw HypothesisViolation(
        "limiting kernel spectrum reaches 0; 1/lambda^2 is not integrable");
}

TheoryPoint theoretical_generalisation_error(const DescentTheoryInputs& in, double gamma,
                                             const TheoryOptions& options) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be > 0");
  TheoryPoint pt;
  pt.gamma = gamma;
  try {
    check_integrability(in.mu.measure);
  } catch (const HypothesisViolation&) {
    pt.non_integrable = true;
  }

  if (options.route == TheoryRoute::transform) {
    const GPair gp = spectral_pair(in.mu.measure, gamma, in.sigma_eps);
    pt.g = gp.g;
    pt.g2 = gp.g2;
  } else {
    MpMapParams mp = options.mp;
    mp.gamma = gamma;
    const SpectralMeasure nu = mp_map(in.mu.measure, mp);
    pt.g = spectral_g(nu, in.sigma_eps, 1, true, kInf).value;
    pt.g2 = spectral_g(nu, in.sigma_eps, 2, true, kInf).value;
  }
  pt.diverged = !std::isfinite(pt.g2) || pt.g2 > options.divergence_ceiling;
  pt.eg = five_term(in, pt.g, pt.g2);
  if (!std::isfinite(pt.eg)) pt.eg = kInf;
  return pt;
}

AsymptoticLimits asymptotic_limits(const DescentTheoryInputs& in) {
  check_integrability(in.mu.measure);
  AsymptoticLimits out;
  out.underparam = in.limit_f2 + in.sigma_tau * in.sigma_tau;
  const double s2 = in.sigma_eps * in.sigma_eps;
  out.m1 = integrate(in.mu.measure, [s2](double t) { return 1.0 / (t + s2); });
  out.m2 = integrate(in.mu.measure, [s2](double t) { return 1.0 / ((t + s2) * (t + s2)); });
  out.overparam = five_term(in, out.m1, out.m2);
  return out;
}

}  // namespace nngp
