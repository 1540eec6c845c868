#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace outlierlab {

using cd = std::complex<double>;
using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Error taxonomy shared by all modules.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
using InvalidArgument = std::invalid_argument;
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RetryExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularDraw : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientData : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularGram : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SkipTrial : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;

}  // namespace outlierlab
