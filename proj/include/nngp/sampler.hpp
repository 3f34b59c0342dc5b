#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nngp/nngp_kernel.hpp"
#include "nngp/rng.hpp"

namespace nngp {

enum class InputLaw { isotropic, custom_covariance };
enum class TargetKind { linear, zero, custom };

// Teacher-student data model: x ~ P_d, y = f(x) + tau, tau ~ N(0, sigma_tau^2).
// The isotropic law has covariance I/d.
class TeacherModel {
 public:
  static TeacherModel linear(Eigen::VectorXd beta, double sigma_tau);
  static TeacherModel linear_random(int d, double sigma_tau, const RngSpec& rng);
  static TeacherModel zero(int d, double sigma_tau);
  static TeacherModel custom(int d, std::function<double(const Eigen::VectorXd&)> f,
                             double sigma_tau);

  // Replaces the isotropic law with N(0, covariance); must be symmetric PSD.
  TeacherModel& with_covariance(const Eigen::MatrixXd& covariance);

  int d() const { return d_; }
  InputLaw input_law() const { return law_; }
  TargetKind target() const { return target_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  double sigma_tau() const { return sigma_tau_; }
  const Eigen::MatrixXd& covariance_factor() const { return factor_; }

  double f(const Eigen::VectorXd& x) const;
  Eigen::VectorXd f(const Eigen::MatrixXd& x) const;

 private:
  TeacherModel(int d, TargetKind target, double sigma_tau);

  int d_;
  InputLaw law_ = InputLaw::isotropic;
  TargetKind target_;
  Eigen::VectorXd beta_;
  std::function<double(const Eigen::VectorXd&)> fn_;
  double sigma_tau_;
  Eigen::MatrixXd factor_;  // x = factor * g for custom covariance
};

Eigen::MatrixXd sample_inputs(const TeacherModel& teacher, int n, Rng& rng);
Eigen::MatrixXd sample_inputs(const TeacherModel& teacher, int n, const RngSpec& spec);

Eigen::VectorXd sample_labels(const TeacherModel& teacher, const Eigen::MatrixXd& x, Rng& rng);
Eigen::VectorXd sample_labels(const TeacherModel& teacher, const Eigen::MatrixXd& x,
                              const RngSpec& spec);

// Lower Cholesky factor of K + eps * tr(K)/n * I, escalating eps from 1e-12 by
// x10 up to 1e-6. Throws DegenerateKernel if every attempt fails.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& k);

// Post-activation features phi(h_k(x_i)) for N independent draws h_k ~ N(0,
// K_prev): an N x n matrix. Extending K_prev to test inputs extends the same
// realisation of the random features.
Eigen::MatrixXd sample_features(const Eigen::MatrixXd& k_prev, int width, const Activation& phi,
                                Rng& rng);

// (1/N) Phi^T Phi, tagged finite-width-sample.
KernelMatrix sample_finite_width_kernel(const KernelMatrix& k_prev, int width,
                                        const Activation& phi, Rng& rng);
KernelMatrix sample_finite_width_kernel(const KernelMatrix& k_prev, int width,
                                        const Activation& phi, const RngSpec& spec);

// Ascending eigenvalues; values in [-1e-8 * lambda_max, 0) are clipped to 0,
// anything more negative is an error.
std::vector<double> eigenvalues(const KernelMatrix& k, double negative_tol = 1e-8);
std::vector<double> eigenvalues(const Eigen::MatrixXd& k, double negative_tol = 1e-8);

}  // namespace nngp
