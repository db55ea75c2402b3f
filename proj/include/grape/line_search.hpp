#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "grape/types.hpp"

namespace grape {

struct WolfeParams {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_evals = 20;
  double alpha_init = 1.0;
  double alpha_max = 1e12;
  // Bracketing rule while still descending: cubic-fit jumps, or plain
  // doubling (the classical expansion used with near-exact searches).
  bool cubic_extrapolation = true;

  void validate() const {
    if (!(c1 > 0.0) || !(c1 < c2) || !(c2 < 1.0))
      throw std::invalid_argument("WolfeParams: need 0 < c1 < c2 < 1");
    if (max_evals < 1) throw std::invalid_argument("WolfeParams: max_evals must be >= 1");
    if (!(alpha_init > 0.0)) throw std::invalid_argument("WolfeParams: alpha_init must be > 0");
  }
};

struct LineSearchResult {
  double alpha = 0.0;
  double f = 0.0;
  double dphi = 0.0;
  int evaluations = 0;
  bool wolfe_satisfied = false;
};

namespace detail {

/// Cubic-interpolation minimizer of the Hermite fit through (a, fa, da) and
/// (b, fb, db); NaN when the fit has no interior minimum.
inline double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double radicand = d1 * d1 - da * db;
  if (!(radicand >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(radicand), b - a);
  const double denom = db - da + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b - (b - a) * (db + d2 - d1) / denom;
}

}  // namespace detail

/// Strong-Wolfe line search with cubic interpolation: bracket by
/// extrapolation, then shrink the bracket with cubic fits. phi(alpha) must
/// return a pair-like {f, dphi} for the merit function along the ray.
/// If the evaluation budget runs out, the best point seen so far is returned
/// with wolfe_satisfied = false.
template <typename Phi>
LineSearchResult line_search(Phi&& phi, double f0, double dphi0, const WolfeParams& params) {
  params.validate();
  if (!(dphi0 < 0.0)) throw std::invalid_argument("line_search: not a descent direction");

  LineSearchResult best;  // lowest f seen at alpha > 0
  best.f = std::numeric_limits<double>::infinity();
  int evals = 0;

  auto probe = [&](double alpha) {
    auto [f, dphi] = phi(alpha);
    ++evals;
    if (f < best.f) best = {alpha, f, dphi, 0, false};
    return std::pair<double, double>(f, dphi);
  };
  auto out_of_budget = [&] { return evals >= params.max_evals; };
  auto finish = [&](double alpha, double f, double dphi, bool ok) {
    return LineSearchResult{alpha, f, dphi, evals, ok};
  };
  auto give_up = [&] {
    if (!std::isfinite(best.f)) return finish(0.0, f0, dphi0, false);
    return finish(best.alpha, best.f, best.dphi, false);
  };

  const double armijo_slope = params.c1 * dphi0;
  const double curvature_bound = -params.c2 * dphi0;

  // Bracket-shrinking phase on [lo, hi] where lo satisfies Armijo and the
  // minimizer is inside the interval.
  auto zoom = [&](double a_lo, double f_lo, double d_lo, double a_hi, double f_hi, double d_hi) {
    for (;;) {
      double alpha = detail::cubic_minimizer(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
      const double width = std::abs(a_hi - a_lo);
      const double lower = std::min(a_lo, a_hi) + 0.05 * width;
      const double upper = std::max(a_lo, a_hi) - 0.05 * width;
      if (!std::isfinite(alpha) || alpha < lower || alpha > upper)
        alpha = 0.5 * (a_lo + a_hi);  // cubic fit unusable, bisect
      if (out_of_budget()) return give_up();
      auto [f, d] = probe(alpha);
      if (f > f0 + alpha * armijo_slope || f >= f_lo) {
        a_hi = alpha;
        f_hi = f;
        d_hi = d;
      } else {
        if (std::abs(d) <= curvature_bound) return finish(alpha, f, d, true);
        if (d * (a_hi - a_lo) >= 0.0) {
          a_hi = a_lo;
          f_hi = f_lo;
          d_hi = d_lo;
        }
        a_lo = alpha;
        f_lo = f;
        d_lo = d;
      }
      if (std::abs(a_hi - a_lo) <= 1e-14 * std::max(1.0, std::abs(a_lo))) return give_up();
    }
  };

  double a_prev = 0.0, f_prev = f0, d_prev = dphi0;
  double alpha = std::min(params.alpha_init, params.alpha_max);
  for (int iter = 0;; ++iter) {
    if (out_of_budget()) return give_up();
    auto [f, d] = probe(alpha);
    if (f > f0 + alpha * armijo_slope || (iter > 0 && f >= f_prev))
      return zoom(a_prev, f_prev, d_prev, alpha, f, d);
    if (std::abs(d) <= curvature_bound) return finish(alpha, f, d, true);
    if (d >= 0.0) return zoom(alpha, f, d, a_prev, f_prev, d_prev);
    // Still descending: extrapolate, preferring the cubic fit when enabled
    // and landing ahead of the current point.
    double next = params.cubic_extrapolation
                      ? detail::cubic_minimizer(a_prev, f_prev, d_prev, alpha, f, d)
                      : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(next) || next <= alpha * 1.1) next = 2.0 * alpha;
    a_prev = alpha;
    f_prev = f;
    d_prev = d;
    alpha = std::min(next, params.alpha_max);
    if (alpha >= params.alpha_max && a_prev >= params.alpha_max) return give_up();
  }
}

}  // namespace grape
