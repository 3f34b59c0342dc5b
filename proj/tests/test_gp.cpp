#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "nngp/errors.hpp"
#include "nngp/gp_regression.hpp"

using namespace nngp;

namespace {

// Gaussian elimination with partial pivoting on plain arrays.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

Eigen::MatrixXd rbf(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd k(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      k(i, j) = std::exp(-0.5 * (x.row(i) - x.row(j)).squaredNorm());
  return k;
}

}  // namespace

TEST_CASE("posterior mean matches elimination for small n") {
  Rng rng(RngSpec{1, 0});
  for (int n = 1; n <= 5; ++n)
    for (double sigma : {0.0, 0.3}) {
      const Eigen::MatrixXd x = rng.normal_matrix(n + 1, 2);
      const Eigen::MatrixXd all = rbf(x);
      const Eigen::MatrixXd k = all.topLeftCorner(n, n);
      const Eigen::VectorXd ks = all.block(0, n, n, 1);
      const Eigen::VectorXd y = rng.normal_vector(n);

      std::vector<std::vector<double>> a(n, std::vector<double>(n));
      std::vector<double> b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) a[i][j] = k(i, j) + (i == j ? sigma * sigma : 0.0);
        b[i] = y(i);
      }
      const std::vector<double> alpha = solve_dense(a, b);
      double ref = 0.0;
      for (int i = 0; i < n; ++i) ref += ks(i) * alpha[i];

      GpConfig cfg;
      cfg.sigma_eps = sigma;
      const Posterior post = fit(k, y, cfg);
      CHECK(post.method() == (sigma > 0 ? SolveMethod::cholesky : SolveMethod::pseudo_inverse));
      CHECK(std::abs(predict_mean(post, ks) - ref) < 1e-10);
    }
}

TEST_CASE("ridgeless fit interpolates and has zero variance at training points") {
  Rng rng(RngSpec{2, 0});
  const Eigen::MatrixXd x = rng.normal_matrix(6, 3);
  const Eigen::MatrixXd k = rbf(x);
  const Eigen::VectorXd y = rng.normal_vector(6);
  const Posterior post = fit(k, y, GpConfig{});
  CHECK((predict_mean(post, Eigen::MatrixXd(k)) - y).cwiseAbs().maxCoeff() < 1e-8);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(predict_variance(post, k.col(i), k(i, i))) < 1e-12);
}

TEST_CASE("pseudo-inverse handles rank deficiency") {
  // Rank-one kernel: the min-norm interpolant sees only the projection of y.
  Eigen::VectorXd v(3);
  v << 1.0, 2.0, 2.0;
  const Eigen::MatrixXd k = v * v.transpose();
  Eigen::VectorXd y(3);
  y << 1.0, 0.0, 0.0;
  const Posterior post = fit(k, y, GpConfig{});
  const Eigen::VectorXd expected = v * (v.dot(y) / v.squaredNorm());
  CHECK((predict_mean(post, Eigen::MatrixXd(k)) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("variance is non-negative and bounded by the prior") {
  Rng rng(RngSpec{3, 0});
  const Eigen::MatrixXd x = rng.normal_matrix(8, 2);
  const Eigen::MatrixXd all = rbf(x);
  GpConfig cfg;
  cfg.sigma_eps = 0.1;
  const Posterior post = fit(Eigen::MatrixXd(all.topLeftCorner(7, 7)), rng.normal_vector(7), cfg);
  const double v = predict_variance(post, all.block(0, 7, 7, 1), all(7, 7));
  CHECK(v >= 0.0);
  CHECK(v <= all(7, 7));
}

TEST_CASE("configuration and dimension errors") {
  GpConfig bad;
  bad.sigma_eps = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(fit(k, Eigen::VectorXd::Ones(2), GpConfig{}), InvalidArgument);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  y(1) = std::nan("");
  CHECK_THROWS_AS(fit(k, y, GpConfig{}), InvalidArgument);
  const Posterior post = fit(k, Eigen::VectorXd::Ones(3), GpConfig{});
  CHECK_THROWS_AS(predict_mean(post, Eigen::VectorXd(Eigen::VectorXd::Ones(4))), InvalidArgument);
}

TEST_CASE("empirical error is reproducible and thread-independent") {
  const TeacherModel t = TeacherModel::linear_random(20, 0.1, RngSpec{4, 0});
  KernelRecipe recipe;
  recipe.width = 15;
  const ErrorEstimate a = empirical_generalisation_error(t, recipe, 10, GpConfig{}, 20, 6, RngSpec{5, 0});
  const ErrorEstimate b = empirical_generalisation_error(t, recipe, 10, GpConfig{}, 20, 6, RngSpec{5, 0});
  CHECK(a.per_trial == b.per_trial);
  CHECK(a.trials == 6);
  CHECK(a.per_trial[2] == generalisation_error_trial(t, recipe, 10, GpConfig{}, 20, RngSpec{5, 0}.child(2)));
  double s = 0.0;
  for (double v : a.per_trial) s += v;
  CHECK(a.mean == doctest::Approx(s / 6));
}

TEST_CASE("exact kernel with a linear teacher learns well when overdetermined") {
  // n >> d with the identity kernel: least squares recovers beta, so the
  // error approaches the label noise.
  const TeacherModel t = TeacherModel::linear_random(5, 0.1, RngSpec{6, 0});
  KernelRecipe recipe;
  GpConfig cfg;
  cfg.sigma_eps = 1e-3;
  const ErrorEstimate e = empirical_generalisation_error(t, recipe, 80, cfg, 60, 4, RngSpec{7, 0});
  CHECK(e.mean == doctest::Approx(0.01).epsilon(0.2));
}
