#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nngp/measures.hpp"
#include "nngp/nngp_kernel.hpp"
#include "nngp/rng.hpp"
#include "nngp/sampler.hpp"

namespace nngp {

struct SpectralIntegral {
  double value = 0.0;
  bool divergent = false;
};

// int (lambda + sigma^2)^{-order} dmeasure. sigma = 0 requires
// exclude_zero_atom (integration over the strictly positive part). The result
// is flagged divergent when it exceeds `ceiling`.
SpectralIntegral spectral_g(const SpectralMeasure& measure, double sigma_eps, int order,
                            bool exclude_zero_atom, double ceiling = 1e6);

enum class AbcMode { closed_form, monte_carlo };

std::string_view to_string(AbcMode mode);

struct AbcRung {
  int d = 0;
  int n = 0;
  double a = 0.0, b = 0.0, c = 0.0;
  double a_se = 0.0, b_se = 0.0, c_se = 0.0;
};

struct AbcConstants {
  double a = 0.0, b = 0.0, c = 0.0;
  double a_se = 0.0, b_se = 0.0, c_se = 0.0;
  AbcMode provenance = AbcMode::closed_form;
  std::vector<AbcRung> ladder;  // monte-carlo only: raw finite-d estimates
};

struct AbcMcParams {
  std::vector<int> ladder{100, 200, 400};
  int samples = 200000;
  int quadrature_order = 64;
  RngSpec rng{};
};

// Builds the teacher at input dimension d (the MC ladder varies d at fixed psi).
using TeacherFactory = std::function<TeacherModel(int d)>;

// Finite-(n, d) Monte-Carlo estimate of
//   A_d = n E f(x) f(x') K(x, x'),
//   B_d = n E (f(x')^2 + tau^2) K(x, x')^2,
//   C_d = n (n - 1) E f(x') f(x'') K(x, x') K(x, x'').
AbcRung estimate_abc(const TeacherModel& teacher, const Activation& phi, int depth, int n,
                     int samples, int quadrature_order, const RngSpec& rng);

// closed_form: (psi, 0, psi^2) for the linear teacher with identity activation
// and isotropic inputs; otherwise UnsupportedConfiguration. monte_carlo:
// estimate_abc over the d-ladder at n = psi d, extrapolated linearly in 1/d.
AbcConstants abc_constants(const TeacherFactory& teacher, const Activation& phi, int depth,
                           double psi, AbcMode mode, const AbcMcParams& params = {});

// Monte-Carlo estimate of E f(x)^2 at the teacher's own dimension.
double estimate_limit_f2(const TeacherModel& teacher, int samples, const RngSpec& rng);

// Limiting conjugate-kernel spectrum mu_psi^phi. For the identity activation
// with isotropic inputs this is rho_MP^psi; otherwise it is estimated from
// exact conjugate-kernel spectra at n = estimate_n (pooled over `draws`): the
// bulk becomes a histogram density, eigenvalues far above the bulk stay atoms.
struct LimitingSpectrum {
  SpectralMeasure measure{{{1.0, 1.0}}, {}, {}};  // placeholder: delta_1
  std::string provenance;
};

struct SpectrumEstimateParams {
  int grid_points = 2000;
  int estimate_n = 1000;
  int draws = 10;
  int quadrature_order = 64;
  RngSpec rng{};
  TeacherFactory input_law;  // empty: isotropic N(0, I/d)
};

LimitingSpectrum limiting_kernel_spectrum(double psi, const Activation& phi, int depth,
                                          const SpectrumEstimateParams& params = {});

struct DescentTheoryInputs {
  double psi = 0.5;
  std::string activation = "identity";
  int depth = 2;
  double sigma_eps = 0.0;
  double sigma_tau = 0.0;
  double limit_f2 = 0.0;
  AbcConstants abc;
  LimitingSpectrum mu;
};

// How g and g2 are evaluated. transform: directly from the real-axis MP
// fixed point at z = -sigma^2 (and its derivative). grid: mp_map density on
// a grid followed by spectral_g, which smooths the spectrum by y0.
enum class TheoryRoute { transform, grid };

struct TheoryOptions {
  TheoryRoute route = TheoryRoute::transform;
  double divergence_ceiling = 1e6;
  MpMapParams mp;  // used by the grid route
};

struct TheoryPoint {
  double gamma = 0.0;
  double eg = 0.0;
  double g = 0.0;
  double g2 = 0.0;
  bool diverged = false;
  bool non_integrable = false;
};

// g and g2 of rho_MP^gamma boxtimes mu at regulariser sigma, by the transform
// route. Only the strictly positive part is integrated: the atom at 0 that
// appears for gamma > 1 carries modes the predictor never uses.
struct GPair {
  double g = 0.0;
  double g2 = 0.0;
};
GPair spectral_pair(const SpectralMeasure& mu, double gamma, double sigma_eps);

// limit_f2 + sigma_tau^2 + C g^2 + B g2 - 2 A g.
double five_term(const DescentTheoryInputs& in, double g, double g2);

TheoryPoint theoretical_generalisation_error(const DescentTheoryInputs& inputs, double gamma,
                                             const TheoryOptions& options = {});

// Throws HypothesisViolation unless 1/lambda and 1/lambda^2 are integrable
// against mu: no atom at 0 and support bounded away from 0.
void check_integrability(const SpectralMeasure& mu);

struct AsymptoticLimits {
  double underparam = 0.0;
  double overparam = 0.0;
  double m1 = 0.0;  // int 1/lambda dmu
  double m2 = 0.0;  // int 1/lambda^2 dmu
};

AsymptoticLimits asymptotic_limits(const DescentTheoryInputs& inputs);

}  // namespace nngp
