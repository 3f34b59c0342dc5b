#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace nngp {

// (seed, stream) identifies an independent, reproducible random stream; the
// trial index is the usual stream id.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  RngSpec child(std::uint64_t sub) const { return {seed, stream * 1000003ULL + sub + 1}; }
};

class Rng {
 public:
  explicit Rng(const RngSpec& spec);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  // Fills in column-major order.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd normal_vector(Eigen::Index size);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nngp
