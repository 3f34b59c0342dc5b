#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "nngp/nngp_kernel.hpp"
#include "nngp/rng.hpp"
#include "nngp/sampler.hpp"

namespace nngp {

struct GpConfig {
  double sigma_eps = 0.0;
  double pinv_rcond = 1e-10;  // relative to the largest eigenvalue

  void validate() const;
};

enum class SolveMethod { cholesky, pseudo_inverse };

// Posterior weights alpha = (K + sigma^2 I)^{-1} Y, or K^+ Y when sigma = 0.
// Immutable; safe to share across threads for prediction.
class Posterior {
 public:
  const Eigen::VectorXd& alpha() const { return alpha_; }
  SolveMethod method() const { return method_; }
  Eigen::Index n() const { return alpha_.size(); }

  // (K + sigma^2 I)^{-1} v, or K^+ v.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

 private:
  friend Posterior fit(const KernelMatrix&, const Eigen::VectorXd&, const GpConfig&);
  friend Posterior fit(const Eigen::MatrixXd&, const Eigen::VectorXd&, const GpConfig&);

  Eigen::VectorXd alpha_;
  SolveMethod method_ = SolveMethod::cholesky;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd vectors_;         // pseudo-inverse: retained eigenvectors
  Eigen::VectorXd inv_eigenvalues_;
};

Posterior fit(const KernelMatrix& k_xx, const Eigen::VectorXd& y, const GpConfig& cfg);
Posterior fit(const Eigen::MatrixXd& k_xx, const Eigen::VectorXd& y, const GpConfig& cfg);

double predict_mean(const Posterior& post, const Eigen::VectorXd& k_star);
// Test points as rows of k_star_rows (m x n).
Eigen::VectorXd predict_mean(const Posterior& post, const Eigen::MatrixXd& k_star_rows);

// k** - k*^T (K + sigma^2 I)^{-1} k*, clipped to 0 when within -1e-8.
double predict_variance(const Posterior& post, const Eigen::VectorXd& k_star, double k_star_star);

// How test-point cross-kernels are produced at finite width.
enum class CrossKernel { shared_features, exact };

struct KernelRecipe {
  int depth = 2;
  Activation activation = Activation::identity();
  int order = 64;           // quadrature order
  std::optional<int> width;  // N; empty means the exact conjugate kernel
  CrossKernel cross = CrossKernel::shared_features;
};

struct ErrorEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;
  std::vector<double> per_trial;
};

// Monte-Carlo E[(mu_bar(x) - y)^2] over `trials` independent draws of training
// data, kernel realisation and n_test fresh test pairs. Trial t uses stream
// rng.child(t); results do not depend on the worker count.
ErrorEstimate empirical_generalisation_error(const TeacherModel& teacher,
                                             const KernelRecipe& recipe, int n,
                                             const GpConfig& cfg, int n_test, int trials,
                                             const RngSpec& rng);

// One trial of the above, exposed for testing.
double generalisation_error_trial(const TeacherModel& teacher, const KernelRecipe& recipe, int n,
                                  const GpConfig& cfg, int n_test, const RngSpec& rng);

}  // namespace nngp
