#include "nngp/nngp_kernel.hpp"

#include <algorithm>
#include <cmath>

#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

Activation::Activation(ActivationTag tag) : tag_(tag) {
  switch (tag) {
    case ActivationTag::identity: name_ = "identity"; break;
    case ActivationTag::relu: name_ = "relu"; break;
    case ActivationTag::tanh: name_ = "tanh"; break;
    case ActivationTag::erf: name_ = "erf"; break;
    case ActivationTag::custom: name_ = "custom"; break;
  }
}

Activation Activation::custom(std::function<double(double)> fn, bool measurable,
                              std::string name) {
  if (!fn) throw InvalidArgument("custom activation needs a function");
  if (!measurable)
    throw InvalidArgument("custom activation must be asserted measurable");
  Activation a(ActivationTag::custom);
  a.fn_ = std::move(fn);
  a.name_ = std::move(name);
  return a;
}

Activation Activation::from_name(std::string_view name) {
  if (name == "identity" || name == "linear") return identity();
  if (name == "relu") return relu();
  if (name == "tanh") return tanh();
  if (name == "erf") return erf();
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

double Activation::operator()(double u) const {
  switch (tag_) {
    case ActivationTag::identity: return u;
    case ActivationTag::relu: return u > 0.0 ? u : 0.0;
    case ActivationTag::tanh: return std::tanh(u);
    case ActivationTag::erf: return std::erf(u);
    case ActivationTag::custom: return fn_(u);
  }
  return u;
}

QuadratureRule::QuadratureRule(int order, double tail) : tail_(tail) {
  if (order < 2) throw InvalidArgument("quadrature order must be >= 2");
  if (!(tail > 0.0)) throw InvalidArgument("quadrature tail must be positive");
  // Golub-Welsch on the Legendre Jacobi matrix.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  nodes_.resize(static_cast<std::size_t>(order));
  weights_.resize(static_cast<std::size_t>(order));
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    const double v = eig.eigenvectors()(0, i);
    nodes_[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    weights_[static_cast<std::size_t>(i)] = v * v;
    total += v * v;
  }
  for (double& w : weights_) w *= 2.0 / total;
  // Symmetrize so odd integrands vanish exactly.
  for (int i = 0; i < order / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(order - 1 - i);
    const double x = 0.5 * (nodes_[hi] - nodes_[lo]);
    const double w = 0.5 * (weights_[hi] + weights_[lo]);
    nodes_[lo] = -x;
    nodes_[hi] = x;
    weights_[lo] = weights_[hi] = w;
  }
  if (order % 2 == 1) nodes_[static_cast<std::size_t>(order / 2)] = 0.0;
}

std::string_view to_string(KernelProvenance p) {
  switch (p) {
    case KernelProvenance::exact_conjugate: return "exact-conjugate";
    case KernelProvenance::finite_width_sample: return "finite-width-sample";
    case KernelProvenance::input_gram: return "input-gram";
  }
  return "unknown";
}

namespace {

// u1 = sx z1, u2 = sy (rho z1 + orth z2); both 1-D integrals are split where
// the respective preactivation changes sign.
template <class Phi>
double gaussian_product_expectation(double k_xx, double k_xy, double k_yy, Phi&& phi,
                                    const QuadratureRule& quad) {
  const double sx = std::sqrt(k_xx);
  const double sy = std::sqrt(k_yy);
  const double rho = std::clamp(k_xy / (sx * sy), -1.0, 1.0);
  const double orth = std::sqrt(std::max(0.0, 1.0 - rho * rho));

  if (orth == 0.0)
    return quad.expectation(0.0, [&](double z) { return phi(sx * z) * phi(sy * rho * z); });
  return quad.expectation(0.0, [&](double z1) {
    const double left = phi(sx * z1);
    if (left == 0.0) return 0.0;
    const double shift = rho * z1;
    return left * quad.expectation(-shift / orth,
                                   [&](double z2) { return phi(sy * (shift + orth * z2)); });
  });
}

}  // namespace

double kernel_step(double k_xx, double k_xy, double k_yy, const Activation& phi,
                   const QuadratureRule& quad) {
  if (!(k_xx > 0.0) || !(k_yy > 0.0))
    throw DegenerateKernel("kernel_step needs positive diagonal entries");
  double value = 0.0;
  switch (phi.tag()) {
    case ActivationTag::identity:
      value = gaussian_product_expectation(k_xx, k_xy, k_yy, [](double u) { return u; }, quad);
      break;
    case ActivationTag::relu:
      value = gaussian_product_expectation(
          k_xx, k_xy, k_yy, [](double u) { return u > 0.0 ? u : 0.0; }, quad);
      break;
    case ActivationTag::tanh:
      value = gaussian_product_expectation(
          k_xx, k_xy, k_yy, [](double u) { return std::tanh(u); }, quad);
      break;
    case ActivationTag::erf:
      value = gaussian_product_expectation(
          k_xx, k_xy, k_yy, [](double u) { return std::erf(u); }, quad);
      break;
    case ActivationTag::custom:
      value = gaussian_product_expectation(k_xx, k_xy, k_yy, phi, quad);
      break;
  }
  if (!std::isfinite(value))
    throw NumericalFailure("activation has no finite second moment under the layer Gaussian");
  return value;
}

Eigen::MatrixXd apply_layer(const Eigen::MatrixXd& k_prev, const Activation& phi,
                            const QuadratureRule& quad) {
  const Eigen::Index n = k_prev.rows();
  Eigen::MatrixXd next(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(k_prev(i, i) > 0.0))
      throw DegenerateKernel("degenerate kernel diagonal at row " + std::to_string(i));
  }
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    next(r, r) = kernel_step(k_prev(r, r), k_prev(r, r), k_prev(r, r), phi, quad);
  });
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(next(i, i) > 0.0))
      throw DegenerateKernel("degenerate kernel diagonal at row " + std::to_string(i));
  }
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index c = r + 1; c < n; ++c) {
      const double v = kernel_step(k_prev(r, r), k_prev(r, c), k_prev(c, c), phi, quad);
      // Quadrature can push |K(x,x')| a hair past the Cauchy-Schwarz bound.
      const double bound = std::sqrt(next(r, r) * next(c, c));
      next(r, c) = next(c, r) = std::clamp(v, -bound, bound);
    }
  });
  return next;
}

KernelMatrix input_gram(const Eigen::MatrixXd& x) {
  KernelMatrix k;
  k.entries = x * x.transpose();
  k.entries = 0.5 * (k.entries + k.entries.transpose()).eval();
  k.provenance = KernelProvenance::input_gram;
  k.depth = 1;
  k.activation = "none";
  return k;
}

KernelMatrix conjugate_kernel_matrix(const Eigen::MatrixXd& x, int depth, const Activation& phi,
                                     const QuadratureRule& quad) {
  if (depth < 2) throw InvalidArgument("conjugate kernel depth must be >= 2");
  if (!x.allFinite()) throw InvalidArgument("input matrix has non-finite entries");
  KernelMatrix k = input_gram(x);
  for (int layer = 1; layer < depth; ++layer) k.entries = apply_layer(k.entries, phi, quad);
  k.provenance = KernelProvenance::exact_conjugate;
  k.depth = depth;
  k.activation = phi.name();
  return k;
}

KernelMatrix preactivation_kernel(const Eigen::MatrixXd& x, int depth, const Activation& phi,
                                  const QuadratureRule& quad) {
  if (depth < 2) throw InvalidArgument("network depth must be >= 2");
  if (depth == 2) return input_gram(x);
  return conjugate_kernel_matrix(x, depth - 1, phi, quad);
}

}  // namespace nngp
