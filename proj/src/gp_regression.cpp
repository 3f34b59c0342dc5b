#include "nngp/gp_regression.hpp"

#include <algorithm>
#include <cmath>

#include "nngp/errors.hpp"
#include "nngp/parallel.hpp"

namespace nngp {

void GpConfig::validate() const {
  if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps))
    throw InvalidArgument("sigma_eps must be finite and >= 0");
  if (!(pinv_rcond > 0.0)) throw InvalidArgument("pinv_rcond must be > 0");
}

Eigen::VectorXd Posterior::solve(const Eigen::VectorXd& v) const {
  if (v.size() != alpha_.size()) throw InvalidArgument("vector length does not match posterior");
  if (method_ == SolveMethod::cholesky) return llt_.solve(v);
  return vectors_ * inv_eigenvalues_.cwiseProduct(vectors_.transpose() * v);
}

Posterior fit(const Eigen::MatrixXd& k, const Eigen::VectorXd& y, const GpConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = k.rows();
  if (k.cols() != n || y.size() != n) throw InvalidArgument("fit: dimension mismatch");
  if (!y.allFinite()) throw InvalidArgument("fit: labels must be finite");

  Posterior post;
  if (cfg.sigma_eps > 0.0) {
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += cfg.sigma_eps * cfg.sigma_eps;
    post.llt_.compute(shifted);
    if (post.llt_.info() != Eigen::Success)
      throw NumericalFailure("Cholesky of K + sigma_eps^2 I failed");
    post.method_ = SolveMethod::cholesky;
    post.alpha_ = post.llt_.solve(y);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
    if (eig.info() != Eigen::Success) throw NumericalFailure("eigensolver did not converge");
    const Eigen::VectorXd& values = eig.eigenvalues();
    const double cutoff = cfg.pinv_rcond * std::max(0.0, values.maxCoeff());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
      if (values(i) > cutoff) keep.push_back(i);
    post.method_ = SolveMethod::pseudo_inverse;
    post.vectors_.resize(n, static_cast<Eigen::Index>(keep.size()));
    post.inv_eigenvalues_.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) {
      post.vectors_.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(keep[j]);
      post.inv_eigenvalues_(static_cast<Eigen::Index>(j)) = 1.0 / values(keep[j]);
    }
    post.alpha_ = post.vectors_ * post.inv_eigenvalues_.cwiseProduct(post.vectors_.transpose() * y);
  }
  if (!post.alpha_.allFinite()) throw NumericalFailure("posterior weights are not finite");
  return post;
}

Posterior fit(const KernelMatrix& k_xx, const Eigen::VectorXd& y, const GpConfig& cfg) {
  return fit(k_xx.entries, y, cfg);
}

double predict_mean(const Posterior& post, const Eigen::VectorXd& k_star) {
  if (k_star.size() != post.n()) throw InvalidArgument("k_star length does not match posterior");
  return k_star.dot(post.alpha());
}

Eigen::VectorXd predict_mean(const Posterior& post, const Eigen::MatrixXd& k_star_rows) {
  if (k_star_rows.cols() != post.n())
    throw InvalidArgument("cross-kernel width does not match posterior");
  return k_star_rows * post.alpha();
}

double predict_variance(const Posterior& post, const Eigen::VectorXd& k_star, double k_star_star) {
  const double v = k_star_star - k_star.dot(post.solve(k_star));
  if (v < 0.0 && v >= -1e-8 * std::max(1.0, std::abs(k_star_star))) return 0.0;
  return v;
}

double generalisation_error_trial(const TeacherModel& teacher, const KernelRecipe& recipe, int n,
                                  const GpConfig& cfg, int n_test, const RngSpec& spec) {
  if (n < 1 || n_test < 1) throw InvalidArgument("n and n_test must be >= 1");
  Rng data_rng(spec.child(0));
  const Eigen::MatrixXd x_train = sample_inputs(teacher, n, data_rng);
  const Eigen::VectorXd y_train = sample_labels(teacher, x_train, data_rng);
  const Eigen::MatrixXd x_test = sample_inputs(teacher, n_test, data_rng);
  const Eigen::VectorXd y_test = sample_labels(teacher, x_test, data_rng);

  Eigen::MatrixXd joint(n + n_test, teacher.d());
  joint << x_train, x_test;
  const QuadratureRule quad(recipe.order);

  Eigen::MatrixXd k_joint;
  if (!recipe.width) {
    k_joint = conjugate_kernel_matrix(joint, recipe.depth, recipe.activation, quad).entries;
  } else {
    const KernelMatrix prev = preactivation_kernel(joint, recipe.depth, recipe.activation, quad);
    Rng feature_rng(spec.child(1));
    Eigen::MatrixXd features =
        sample_features(prev.entries, *recipe.width, recipe.activation, feature_rng);
    const Eigen::MatrixXd train = features.leftCols(n);
    k_joint.resize(n + n_test, n + n_test);
    k_joint.topLeftCorner(n, n) = train.transpose() * train / double(*recipe.width);
    if (recipe.cross == CrossKernel::shared_features) {
      k_joint.bottomLeftCorner(n_test, n) =
          features.rightCols(n_test).transpose() * train / double(*recipe.width);
    } else {
      k_joint.bottomLeftCorner(n_test, n) =
          conjugate_kernel_matrix(joint, recipe.depth, recipe.activation, quad)
              .entries.bottomLeftCorner(n_test, n);
    }
  }

  Eigen::MatrixXd k_train = k_joint.topLeftCorner(n, n);
  k_train = (0.5 * (k_train + k_train.transpose())).eval();
  const Posterior post = fit(k_train, y_train, cfg);
  const Eigen::VectorXd pred = predict_mean(post, Eigen::MatrixXd(k_joint.bottomLeftCorner(n_test, n)));
  return (pred - y_test).squaredNorm() / double(n_test);
}

ErrorEstimate empirical_generalisation_error(const TeacherModel& teacher,
                                             const KernelRecipe& recipe, int n,
                                             const GpConfig& cfg, int n_test, int trials,
                                             const RngSpec& rng) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  cfg.validate();
  ErrorEstimate out;
  out.trials = trials;
  out.per_trial.assign(static_cast<std::size_t>(trials), 0.0);
  parallel_for(static_cast<std::size_t>(trials), [&](std::size_t t) {
    out.per_trial[t] = generalisation_error_trial(teacher, recipe, n, cfg, n_test, rng.child(t));
  });
  double sum = 0.0;
  for (double v : out.per_trial) sum += v;
  out.mean = sum / trials;
  if (trials > 1) {
    double ss = 0.0;
    for (double v : out.per_trial) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (trials - 1) / trials);
  }
  return out;
}

}  // namespace nngp
