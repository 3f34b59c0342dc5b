#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace nngp {

enum class ActivationTag { identity, relu, tanh, erf, custom };

// Pointwise nonlinearity phi. Custom activations carry a user function and an
// explicit measurability assertion; finiteness of the induced second moments
// is checked at runtime by the quadrature.
class Activation {
 public:
  static Activation identity() { return Activation(ActivationTag::identity); }
  static Activation relu() { return Activation(ActivationTag::relu); }
  static Activation tanh() { return Activation(ActivationTag::tanh); }
  static Activation erf() { return Activation(ActivationTag::erf); }
  static Activation custom(std::function<double(double)> fn, bool measurable,
                           std::string name = "custom");
  static Activation from_name(std::string_view name);

  ActivationTag tag() const { return tag_; }
  const std::string& name() const { return name_; }

  double operator()(double u) const;

 private:
  explicit Activation(ActivationTag tag);

  ActivationTag tag_;
  std::string name_;
  std::function<double(double)> fn_;
};

// Gaussian expectation rule. Each 1-D expectation E f(z), z ~ N(0, 1), is split
// at the point where the preactivation crosses zero and each side is integrated
// by an order-point Gauss-Legendre rule on [-tail, tail]. Splitting there keeps
// kinked activations (relu) at spectral accuracy; plain Gauss-Hermite only
// converges algebraically across the kink.
class QuadratureRule {
 public:
  explicit QuadratureRule(int order = 64, double tail = 10.0);

  int order() const { return static_cast<int>(nodes_.size()); }
  double tail() const { return tail_; }
  // Reference Gauss-Legendre nodes/weights on [-1, 1].
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  // E f(z) with the integration range split at `split`.
  template <class F>
  double expectation(double split, F&& f) const;

 private:
  template <class F>
  double segment(double a, double b, F& f) const;

  std::vector<double> nodes_;
  std::vector<double> weights_;
  double tail_;
};

template <class F>
double QuadratureRule::segment(double a, double b, F& f) const {
  if (!(b > a)) return 0.0;
  constexpr double inv_sqrt_2pi = 0.398942280401432677939946;
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double z = mid + half * nodes_[i];
    const double value = f(z);
    if (value != 0.0) sum += weights_[i] * value * std::exp(-0.5 * z * z);
  }
  return sum * half * inv_sqrt_2pi;
}

template <class F>
double QuadratureRule::expectation(double split, F&& f) const {
  const double c = split < -tail_ ? -tail_ : (split > tail_ ? tail_ : split);
  return segment(-tail_, c, f) + segment(c, tail_, f);
}

enum class KernelProvenance { exact_conjugate, finite_width_sample, input_gram };

std::string_view to_string(KernelProvenance p);

struct KernelMatrix {
  Eigen::MatrixXd entries;
  KernelProvenance provenance = KernelProvenance::exact_conjugate;
  int depth = 0;
  std::string activation = "identity";

  Eigen::Index n() const { return entries.rows(); }
};

// E[phi(u1) phi(u2)] for (u1, u2) bivariate Gaussian with covariance
// [[k_xx, k_xy], [k_xy, k_yy]]; the correlation is clamped into [-1, 1].
double kernel_step(double k_xx, double k_xy, double k_yy, const Activation& phi,
                   const QuadratureRule& quad);

// One layer of the covariance recursion applied entrywise: diagonal first,
// then the off-diagonal entries that consume it.
Eigen::MatrixXd apply_layer(const Eigen::MatrixXd& k_prev, const Activation& phi,
                            const QuadratureRule& quad);

// K^0 = X X^T (depth 1 in the numbering where conjugate_kernel_matrix(X, L)
// applies L - 1 layers).
KernelMatrix input_gram(const Eigen::MatrixXd& x);

// Conjugate kernel K^{phi, L}: K^0 = X X^T followed by L - 1 applications of
// kernel_step. Throws DegenerateKernel naming the row whose diagonal is not
// positive.
KernelMatrix conjugate_kernel_matrix(const Eigen::MatrixXd& x, int depth, const Activation& phi,
                                     const QuadratureRule& quad);

// The kernel the last hidden layer's preactivations are drawn from:
// X X^T for depth 2, conjugate_kernel_matrix(X, depth - 1) otherwise.
KernelMatrix preactivation_kernel(const Eigen::MatrixXd& x, int depth, const Activation& phi,
                                  const QuadratureRule& quad);

}  // namespace nngp
