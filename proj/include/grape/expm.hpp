#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>

#include "grape/types.hpp"

namespace grape {

/// Controls for the scaled-and-squared Taylor exponential and the derivative
/// series built on top of it.
struct ExpmOptions {
  double taylor_tol = 1e-14;       // relative term-size cutoff
  double scaling_threshold = 2.0;  // no scaling below this 1-norm
  int max_terms = 64;              // series-length cap before divergence error

  /// Optional caller-owned counter incremented once per expm evaluation;
  /// used by operation-count assertions, never globally.
  std::atomic<std::uint64_t>* call_counter = nullptr;

  void validate() const {
    if (!(taylor_tol > 0.0) || taylor_tol > 1e-6)
      throw std::invalid_argument("ExpmOptions: taylor_tol must be in (0, 1e-6]");
    if (!(scaling_threshold > 0.0) || scaling_threshold > 30.0)
      throw std::invalid_argument("ExpmOptions: scaling_threshold must be in (0, 30]");
    if (max_terms < 2) throw std::invalid_argument("ExpmOptions: max_terms must be >= 2");
  }
};

namespace detail {

/// Scaling exponent: smallest s >= 0 with norm/2^s <= threshold.
inline int scaling_exponent(double norm, double threshold) {
  int s = 0;
  while (norm > threshold && s < 1024) {
    norm *= 0.5;
    ++s;
  }
  return s;
}

/// Plain Taylor sum of exp(a); caller guarantees the norm is tame.
inline Matrix expm_taylor(const Matrix& a, const ExpmOptions& opts) {
  const Eigen::Index d = a.rows();
  Matrix sum = Matrix::Identity(d, d);
  Matrix term = Matrix::Identity(d, d);
  Matrix next(d, d);
  double term_norm = 1.0;
  for (int m = 1; m <= opts.max_terms; ++m) {
    next.noalias() = term * a;
    term = next / static_cast<double>(m);
    sum += term;
    term_norm = term.cwiseAbs().maxCoeff();
    if (term_norm <= opts.taylor_tol * sum.cwiseAbs().maxCoeff()) return sum;
  }
  throw SeriesDivergenceError("expm: Taylor series unconverged after " +
                                  std::to_string(opts.max_terms) + " terms",
                              term_norm);
}

}  // namespace detail

/// Matrix exponential by scaling and squaring of the Taylor series.
inline Matrix expm(const Matrix& a, const ExpmOptions& opts = {}) {
  opts.validate();
  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  if (!a.allFinite()) throw std::invalid_argument("expm: entries must be finite");
  if (opts.call_counter) opts.call_counter->fetch_add(1, std::memory_order_relaxed);
  if (a.size() == 0) return a;

  const int s = detail::scaling_exponent(a.cwiseAbs().colwise().sum().maxCoeff(),
                                         opts.scaling_threshold);
  Matrix result = detail::expm_taylor(a / std::ldexp(1.0, s), opts);
  Matrix tmp(a.rows(), a.cols());
  for (int i = 0; i < s; ++i) {
    tmp.noalias() = result * result;
    result.swap(tmp);
  }
  return result;
}

namespace detail {

/// exp(z) - 1 without cancellation for small |z|.
inline Complex expm1_complex(Complex z) {
  const double x = z.real(), y = z.imag();
  const double half_sin = std::sin(0.5 * y);
  const double re = std::expm1(x) * std::cos(y) - 2.0 * half_sin * half_sin;
  const double im = std::exp(x) * std::sin(y);
  return {re, im};
}

}  // namespace detail

/// gamma(z) = (e^z - 1)/z, the scalar symbol of the directional-derivative
/// kernel; series sum(z^n/(n+1)!) below the 1e-2 crossover, stable closed
/// form above it.
inline Complex gamma_scalar(Complex z) {
  if (std::abs(z) < 1e-2) {
    Complex sum = 1.0;
    Complex term = 1.0;
    for (int n = 1; n < 32; ++n) {
      term *= z / static_cast<double>(n + 1);
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return detail::expm1_complex(z) / z;
}

}  // namespace grape
