#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "grape/expm.hpp"
#include "grape/liouville.hpp"
#include "grape/types.hpp"

namespace grape {

/// Step propagator exp(-i l dt) together with its derivative along one
/// control direction.
struct DerivativePair {
  Matrix propagator;
  Matrix derivative;
  int terms_used = 0;
};

/// Propagator plus one derivative per control direction; the shared
/// exponential work is done once.
struct DirectionalDerivatives {
  Matrix propagator;
  std::vector<Matrix> derivatives;
  std::vector<int> terms_used;
};

namespace detail {

/// gamma[-ad_A](B) summed by the nested-commutator recursion
/// T_0 = B, T_m = -[A, T_{m-1}]/(m+1); adds terms until the next one drops
/// below tol relative to the accumulated sum. truncate_terms > 0 instead
/// keeps exactly that many terms with no convergence requirement.
inline Matrix gamma_commutator_series(const Matrix& a, const Matrix& b, double tol, int max_terms,
                                      int truncate_terms, int* terms_out) {
  const Eigen::Index d = a.rows();
  Matrix sum = b;
  Matrix term = b;
  Matrix work(d, d);
  if (truncate_terms > 0) {
    for (int m = 1; m < truncate_terms; ++m) {
      work.noalias() = a * term;
      work.noalias() -= term * a;
      term = work / static_cast<double>(-(m + 1));
      sum += term;
    }
    if (terms_out) *terms_out = truncate_terms;
    return sum;
  }
  double term_norm = term.cwiseAbs().maxCoeff();
  for (int m = 1; m <= max_terms; ++m) {
    work.noalias() = a * term;
    work.noalias() -= term * a;
    term = work / static_cast<double>(-(m + 1));
    sum += term;
    term_norm = term.cwiseAbs().maxCoeff();
    if (term_norm <= tol * sum.cwiseAbs().maxCoeff()) {
      if (terms_out) *terms_out = m + 1;
      return sum;
    }
  }
  throw SeriesDivergenceError(
      "dexp_series: commutator series unconverged after " + std::to_string(max_terms) + " terms",
      term_norm);
}

}  // namespace detail

/// Derivatives of exp(-i l dt) along several directions lk via the
/// commutator series, with scaling and squaring. The generator is halved
/// until its 1-norm is below the threshold, the series is summed there, and
/// propagator and derivative are rebuilt through s squaring levels using
/// P -> P^2 and D -> P D + D P.
inline DirectionalDerivatives dexp_series_multi(const Matrix& l, const std::vector<Matrix>& lks,
                                                double dt, const ExpmOptions& opts = {}) {
  opts.validate();
  if (l.rows() != l.cols()) throw std::invalid_argument("dexp_series: generator must be square");
  for (const Matrix& lk : lks)
    if (lk.rows() != l.rows() || lk.cols() != l.cols())
      throw std::invalid_argument("dexp_series: direction dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("dexp_series: dt must be positive");

  const Eigen::Index d = l.rows();
  const Matrix a = Complex(0.0, -dt) * l;
  const int s =
      detail::scaling_exponent(a.cwiseAbs().colwise().sum().maxCoeff(), opts.scaling_threshold);
  const double scale = std::ldexp(1.0, s);
  const Matrix a_scaled = a / scale;

  // Propagator at every squaring level; levels below the top feed the
  // derivative product rule.
  std::vector<Matrix> p_levels;
  p_levels.reserve(static_cast<std::size_t>(s) + 1);
  p_levels.push_back(detail::expm_taylor(a_scaled, opts));
  Matrix work(d, d);
  for (int j = 0; j < s; ++j) {
    work.noalias() = p_levels.back() * p_levels.back();
    p_levels.push_back(work);
  }

  DirectionalDerivatives out;
  out.propagator = p_levels.back();
  out.derivatives.reserve(lks.size());
  out.terms_used.reserve(lks.size());
  for (const Matrix& lk : lks) {
    const Matrix b_scaled = (Complex(0.0, -dt) / scale) * lk;
    int terms = 0;
    const Matrix series = detail::gamma_commutator_series(a_scaled, b_scaled, opts.taylor_tol,
                                                          opts.max_terms, 0, &terms);
    Matrix deriv(d, d);
    deriv.noalias() = p_levels.front() * series;
    for (int j = 0; j < s; ++j) {
      work.noalias() = p_levels[static_cast<std::size_t>(j)] * deriv;
      work.noalias() += deriv * p_levels[static_cast<std::size_t>(j)];
      deriv.swap(work);
    }
    out.derivatives.push_back(std::move(deriv));
    out.terms_used.push_back(terms);
  }
  return out;
}

/// Single-direction wrapper around dexp_series_multi.
inline DerivativePair dexp_series(const Matrix& l, const Matrix& lk, double dt,
                                  const ExpmOptions& opts = {}) {
  DirectionalDerivatives multi = dexp_series_multi(l, {lk}, dt, opts);
  return {std::move(multi.propagator), std::move(multi.derivatives.front()),
          multi.terms_used.front()};
}

/// Commutator series evaluated at the full, unscaled generator. Intended for
/// truncation studies and for demonstrating where the plain series breaks
/// down; truncate_terms = 1 keeps only -i lk dt (the first-order rule),
/// 0 sums to tolerance. The propagator itself is still computed by the
/// scaled exponential.
inline DerivativePair dexp_series_unscaled(const Matrix& l, const Matrix& lk, double dt,
                                           const ExpmOptions& opts = {}, int truncate_terms = 0) {
  opts.validate();
  if (lk.rows() != l.rows() || lk.cols() != l.cols())
    throw std::invalid_argument("dexp_series_unscaled: dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("dexp_series_unscaled: dt must be positive");
  const Matrix a = Complex(0.0, -dt) * l;
  const Matrix b = Complex(0.0, -dt) * lk;
  int terms = 0;
  const Matrix series =
      detail::gamma_commutator_series(a, b, opts.taylor_tol, opts.max_terms, truncate_terms, &terms);
  DerivativePair pair;
  pair.propagator = expm(a, opts);
  pair.derivative.noalias() = pair.propagator * series;
  pair.terms_used = terms;
  return pair;
}

/// Eigenframe (Hadamard) derivative factor for the relaxation-free case:
/// with H = V diag(lambda) V^dagger, returns
///   D = V (G .* (V^dagger (-i hk dt) V)) V^dagger,
///   G_rs = gamma(i (lambda_r - lambda_s) dt),
/// so that d/dc exp(-i(h + c hk)dt) = exp(-i h dt) D at c = 0. The
/// Liouville-space factor is the commutator lift of D.
inline Matrix dexp_eig(const Matrix& h, const Matrix& hk, double dt) {
  if (h.rows() != h.cols() || hk.rows() != h.rows() || hk.cols() != h.cols())
    throw std::invalid_argument("dexp_eig: inputs must be square and of one dimension");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (!is_hermitian(h, 1e-10 * scale))
    throw InvalidMethodError("dexp_eig: generator must be Hermitian (no dissipation)");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success) throw std::runtime_error("dexp_eig: eigensolver failed");
  const Matrix& v = eig.eigenvectors();
  const RealVector& lambda = eig.eigenvalues();

  const Eigen::Index d = h.rows();
  Matrix b_frame = v.adjoint() * (Complex(0.0, -dt) * hk) * v;
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      b_frame(r, c) *= gamma_scalar(Complex(0.0, (lambda(r) - lambda(c)) * dt));
  return v * b_frame * v.adjoint();
}

/// dexp_eig for several directions, sharing one eigendecomposition of h.
inline std::vector<Matrix> dexp_eig_multi(const Matrix& h, const std::vector<Matrix>& hks,
                                          double dt) {
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (!is_hermitian(h, 1e-10 * scale))
    throw InvalidMethodError("dexp_eig: generator must be Hermitian (no dissipation)");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success) throw std::runtime_error("dexp_eig: eigensolver failed");
  const Matrix& v = eig.eigenvectors();
  const RealVector& lambda = eig.eigenvalues();
  const Eigen::Index d = h.rows();

  Matrix gamma_grid(d, d);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c)
      gamma_grid(r, c) = gamma_scalar(Complex(0.0, (lambda(r) - lambda(c)) * dt));

  std::vector<Matrix> out;
  out.reserve(hks.size());
  for (const Matrix& hk : hks) {
    if (hk.rows() != d || hk.cols() != d)
      throw std::invalid_argument("dexp_eig: direction dimension mismatch");
    Matrix b_frame = v.adjoint() * (Complex(0.0, -dt) * hk) * v;
    b_frame.array() *= gamma_grid.array();
    out.push_back(v * b_frame * v.adjoint());
  }
  return out;
}

enum class FdScheme { forward, central };

/// Finite-difference propagator derivative: O(h) forward or O(h^2) central
/// differencing of exp(-i (l + h lk) dt) in the direction lk.
inline Matrix dexp_fd(const Matrix& l, const Matrix& lk, double dt, double h_step, FdScheme scheme,
                      const ExpmOptions& opts = {}) {
  if (!(h_step > 0.0)) throw std::invalid_argument("dexp_fd: step must be positive");
  if (lk.rows() != l.rows() || lk.cols() != l.cols())
    throw std::invalid_argument("dexp_fd: dimension mismatch");
  const Complex factor(0.0, -dt);
  const Matrix plus = expm(factor * (l + h_step * lk), opts);
  if (scheme == FdScheme::forward) {
    const Matrix base = expm(factor * l, opts);
    return (plus - base) / h_step;
  }
  const Matrix minus = expm(factor * (l - h_step * lk), opts);
  return (plus - minus) / (2.0 * h_step);
}

/// Round-off model for one finite difference of f: absolute exponential
/// error eps_a, machine epsilon eps_m, and an order-of-magnitude estimate
/// of |f'|.
struct FdStepPolicy {
  double eps_a = 1e-13;
  double eps_m = 2.22e-16;
  double error_threshold = 1e-8;
  double fprime_estimate = 1.0;

  void validate() const {
    if (!(eps_m > 0.0) || eps_a < eps_m)
      throw std::invalid_argument("FdStepPolicy: need eps_a >= eps_m > 0");
    if (!(error_threshold > 0.0) || !(fprime_estimate >= 0.0))
      throw std::invalid_argument("FdStepPolicy: threshold and |f'| estimate must be positive");
  }
};

/// Round-off error bound of the forward difference at step h:
/// (2 eps_a + eps_m |f|)/h + eps_m |f'|.
inline double fd_roundoff_bound(const FdStepPolicy& policy, double f_norm, double h,
                                double fprime_norm) {
  return (2.0 * policy.eps_a + policy.eps_m * f_norm) / h + policy.eps_m * fprime_norm;
}

/// Smallest step whose round-off bound stays within the policy threshold.
inline double fd_step_select(const FdStepPolicy& policy, double f_norm) {
  policy.validate();
  if (!(f_norm >= 0.0)) throw std::invalid_argument("fd_step_select: f_norm must be >= 0");
  const double denom = policy.error_threshold - policy.eps_m * policy.fprime_estimate;
  if (denom <= 0.0)
    throw InfeasibleThresholdError(
        "fd_step_select: error threshold lies below the eps_m |f'| round-off floor");
  return (2.0 * policy.eps_a + policy.eps_m * f_norm) / denom;
}

/// A-posteriori check of a chosen step against the bound, using the computed
/// finite-difference magnitude as the |f'| estimate.
inline bool fd_step_validate(const FdStepPolicy& policy, double f_norm, double h,
                             double fprime_fd_norm) {
  policy.validate();
  if (!(h > 0.0)) throw std::invalid_argument("fd_step_validate: step must be positive");
  return fd_roundoff_bound(policy, f_norm, h, fprime_fd_norm) <= policy.error_threshold;
}

}  // namespace grape
