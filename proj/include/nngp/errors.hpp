#pragma once

#include <stdexcept>
#include <string>

namespace nngp {

// Every library failure derives from Error so the CLI can map categories to
// exit codes without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class SingularEvaluation : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class ConvergenceFailure : public NumericalFailure {
 public:
  ConvergenceFailure(double grid_point, double residual, int iterations);

  double grid_point() const { return grid_point_; }
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double grid_point_;
  double residual_;
  int iterations_;
};

class DegenerateKernel : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

// Analytic assumptions (integrability of 1/lambda, 1/lambda^2 against the
// limiting kernel spectrum) do not hold for the requested configuration.
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nngp
