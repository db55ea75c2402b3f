#pragma once

#include <deque>

#include "grape/types.hpp"

namespace grape {

/// One quasi-Newton update pair: step s = x_next - x and gradient change
/// g = grad_next - grad, stored only when the curvature product is positive
/// (minimization convention).
struct CurvaturePair {
  RealVector s;
  RealVector g;
  double sg = 0.0;
};

/// DFP rank-two update of the inverse Hessian:
///   H + s s^T/(g^T s) - (H g)(H g)^T/(g^T H g).
/// Returns false (matrix untouched) when the curvature condition s^T g > 0
/// fails.
inline bool dfp_update_inverse(RealMatrix& h_inv, const RealVector& s, const RealVector& g) {
  const double sg = s.dot(g);
  if (!(sg > 0.0)) return false;
  const RealVector hg = h_inv * g;
  const double ghg = g.dot(hg);
  if (!(ghg > 0.0)) return false;
  h_inv += (s * s.transpose()) / sg;
  h_inv -= (hg * hg.transpose()) / ghg;
  h_inv = 0.5 * (h_inv + h_inv.transpose()).eval();
  return true;
}

/// BFGS inverse update (E - s g^T/rho) H (E - g s^T/rho) + s s^T/rho with
/// rho = g^T s; preserves symmetry and positive definiteness under the
/// curvature condition.
inline bool bfgs_update_inverse(RealMatrix& h_inv, const RealVector& s, const RealVector& g) {
  const double sg = s.dot(g);
  if (!(sg > 0.0)) return false;
  const RealVector hg = h_inv * g;
  const double ghg = g.dot(hg);
  h_inv -= (hg * s.transpose() + s * hg.transpose()) / sg;
  h_inv += ((1.0 + ghg / sg) / sg) * (s * s.transpose());
  h_inv = 0.5 * (h_inv + h_inv.transpose()).eval();
  return true;
}

/// Two-loop recursion: applies the inverse Hessian implied by the stored
/// pairs (oldest first) to -gradient, starting from gamma0 * identity.
/// With no history this is plain scaled steepest descent.
inline RealVector lbfgs_direction(const std::deque<CurvaturePair>& history,
                                  const RealVector& gradient, double gamma0) {
  RealVector q = gradient;
  const int m = static_cast<int>(history.size());
  std::vector<double> alpha(static_cast<std::size_t>(m));
  for (int i = m - 1; i >= 0; --i) {
    const CurvaturePair& pair = history[static_cast<std::size_t>(i)];
    alpha[static_cast<std::size_t>(i)] = pair.s.dot(q) / pair.sg;
    q -= alpha[static_cast<std::size_t>(i)] * pair.g;
  }
  RealVector r = gamma0 * q;
  for (int i = 0; i < m; ++i) {
    const CurvaturePair& pair = history[static_cast<std::size_t>(i)];
    const double beta = pair.g.dot(r) / pair.sg;
    r += (alpha[static_cast<std::size_t>(i)] - beta) * pair.s;
  }
  return -r;
}

}  // namespace grape
