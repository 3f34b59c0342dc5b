#include "nngp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nngp/errors.hpp"

namespace nngp {

TeacherModel::TeacherModel(int d, TargetKind target, double sigma_tau)
    : d_(d), target_(target), sigma_tau_(sigma_tau) {
  if (d < 1) throw InvalidArgument("teacher input dimension must be >= 1");
  if (!(sigma_tau >= 0.0) || !std::isfinite(sigma_tau))
    throw InvalidArgument("sigma_tau must be finite and >= 0");
}

TeacherModel TeacherModel::linear(Eigen::VectorXd beta, double sigma_tau) {
  TeacherModel t(static_cast<int>(beta.size()), TargetKind::linear, sigma_tau);
  if (!beta.allFinite()) throw InvalidArgument("teacher coefficients must be finite");
  if (std::abs(beta.squaredNorm() - 1.0) > 1e-12)
    throw InvalidArgument("linear teacher needs beta^T beta = 1");
  t.beta_ = std::move(beta);
  return t;
}

TeacherModel TeacherModel::linear_random(int d, double sigma_tau, const RngSpec& spec) {
  if (d < 1) throw InvalidArgument("teacher input dimension must be >= 1");
  Rng rng(spec);
  Eigen::VectorXd beta = rng.normal_vector(d);
  beta /= beta.norm();
  return linear(std::move(beta), sigma_tau);
}

TeacherModel TeacherModel::zero(int d, double sigma_tau) {
  return TeacherModel(d, TargetKind::zero, sigma_tau);
}

TeacherModel TeacherModel::custom(int d, std::function<double(const Eigen::VectorXd&)> f,
                                  double sigma_tau) {
  if (!f) throw InvalidArgument("custom teacher needs a target function");
  TeacherModel t(d, TargetKind::custom, sigma_tau);
  t.fn_ = std::move(f);
  return t;
}

TeacherModel& TeacherModel::with_covariance(const Eigen::MatrixXd& covariance) {
  if (covariance.rows() != d_ || covariance.cols() != d_)
    throw InvalidArgument("covariance must be d x d");
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw InvalidArgument("covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
  if (eig.info() != Eigen::Success) throw NumericalFailure("covariance eigensolver failed");
  const double top = std::max(0.0, eig.eigenvalues().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(top, 1.0))
    throw InvalidArgument("covariance must be positive semi-definite");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
  law_ = InputLaw::custom_covariance;
  return *this;
}

double TeacherModel::f(const Eigen::VectorXd& x) const {
  switch (target_) {
    case TargetKind::linear: return beta_.dot(x);
    case TargetKind::zero: return 0.0;
    case TargetKind::custom: return fn_(x);
  }
  return 0.0;
}

Eigen::VectorXd TeacherModel::f(const Eigen::MatrixXd& x) const {
  if (x.cols() != d_) throw InvalidArgument("input width does not match teacher dimension");
  if (target_ == TargetKind::linear) return x * beta_;
  if (target_ == TargetKind::zero) return Eigen::VectorXd::Zero(x.rows());
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = fn_(x.row(i).transpose());
  return y;
}

Eigen::MatrixXd sample_inputs(const TeacherModel& teacher, int n, Rng& rng) {
  if (n < 1) throw InvalidArgument("sample count must be >= 1");
  Eigen::MatrixXd g = rng.normal_matrix(n, teacher.d());
  if (teacher.input_law() == InputLaw::isotropic) return g / std::sqrt(double(teacher.d()));
  return g * teacher.covariance_factor().transpose();
}

Eigen::MatrixXd sample_inputs(const TeacherModel& teacher, int n, const RngSpec& spec) {
  Rng rng(spec);
  return sample_inputs(teacher, n, rng);
}

Eigen::VectorXd sample_labels(const TeacherModel& teacher, const Eigen::MatrixXd& x, Rng& rng) {
  Eigen::VectorXd y = teacher.f(x);
  if (teacher.sigma_tau() > 0.0)
    y += teacher.sigma_tau() * rng.normal_vector(x.rows());
  return y;
}

Eigen::VectorXd sample_labels(const TeacherModel& teacher, const Eigen::MatrixXd& x,
                              const RngSpec& spec) {
  Rng rng(spec);
  return sample_labels(teacher, x, rng);
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& k) {
  const Eigen::Index n = k.rows();
  if (k.cols() != n) throw InvalidArgument("kernel matrix must be square");
  const double scale = std::max(k.trace() / double(n), std::numeric_limits<double>::min());
  for (double eps = 1e-12; eps <= 1e-6 * 1.0001; eps *= 10.0) {
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += eps * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw DegenerateKernel("Cholesky factorisation failed at the maximum jitter 1e-6 * tr(K)/n");
}

Eigen::MatrixXd sample_features(const Eigen::MatrixXd& k_prev, int width, const Activation& phi,
                                Rng& rng) {
  if (width < 1) throw InvalidArgument("layer width must be >= 1");
  const Eigen::MatrixXd chol = jittered_cholesky(k_prev);
  // Row k of H is h_k evaluated at the n inputs.
  Eigen::MatrixXd h = rng.normal_matrix(width, k_prev.rows()) * chol.transpose();
  if (phi.tag() != ActivationTag::identity) h = h.unaryExpr([&](double u) { return phi(u); });
  return h;
}

KernelMatrix sample_finite_width_kernel(const KernelMatrix& k_prev, int width,
                                        const Activation& phi, Rng& rng) {
  const Eigen::MatrixXd features = sample_features(k_prev.entries, width, phi, rng);
  KernelMatrix k;
  k.entries = (features.transpose() * features) / double(width);
  k.entries = (0.5 * (k.entries + k.entries.transpose())).eval();
  k.provenance = KernelProvenance::finite_width_sample;
  k.depth = k_prev.depth + 1;
  k.activation = phi.name();
  return k;
}

KernelMatrix sample_finite_width_kernel(const KernelMatrix& k_prev, int width,
                                        const Activation& phi, const RngSpec& spec) {
  Rng rng(spec);
  return sample_finite_width_kernel(k_prev, width, phi, rng);
}

std::vector<double> eigenvalues(const Eigen::MatrixXd& k, double negative_tol) {
  if (k.rows() != k.cols()) throw InvalidArgument("eigenvalues needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver did not converge");
  std::vector<double> values(eig.eigenvalues().data(),
                             eig.eigenvalues().data() + eig.eigenvalues().size());
  std::sort(values.begin(), values.end());
  const double top = values.empty() ? 0.0 : std::max(0.0, values.back());
  for (double& v : values) {
    if (v < 0.0) {
      if (v < -negative_tol * top)
        throw NumericalFailure("matrix is not PSD: eigenvalue " + std::to_string(v));
      v = 0.0;
    }
  }
  return values;
}

std::vector<double> eigenvalues(const KernelMatrix& k, double negative_tol) {
  return eigenvalues(k.entries, negative_tol);
}

}  // namespace nngp
