#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace grape {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

/// Largest Hilbert-space dimension handled by the dense code paths.
inline constexpr int max_hilbert_dim = 64;

/// Requested system exceeds the dense-storage capacity limit.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A truncated series failed to reach its tolerance within the term cap.
class SeriesDivergenceError : public std::runtime_error {
 public:
  SeriesDivergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_norm_(residual) {}
  double residual_norm() const noexcept { return residual_norm_; }

 private:
  double residual_norm_;
};

/// Requested error threshold lies below the round-off floor.
class InfeasibleThresholdError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Derivative method not applicable to the given problem.
class InvalidMethodError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool is_hermitian(const Matrix& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace grape
