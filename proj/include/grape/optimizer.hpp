#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "grape/control_problem.hpp"
#include "grape/gradient.hpp"
#include "grape/line_search.hpp"
#include "grape/quasi_newton.hpp"
#include "grape/types.hpp"

namespace grape {

enum class Algorithm { steepest, dfp, bfgs, lbfgs };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::steepest: return "steepest";
    case Algorithm::dfp: return "dfp";
    case Algorithm::bfgs: return "bfgs";
    case Algorithm::lbfgs: return "lbfgs";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& name) {
  if (name == "steepest") return Algorithm::steepest;
  if (name == "dfp") return Algorithm::dfp;
  if (name == "bfgs") return Algorithm::bfgs;
  if (name == "lbfgs") return Algorithm::lbfgs;
  throw std::invalid_argument("unknown optimizer algorithm '" + name + "'");
}

enum class StopReason { fidelity_target, gradient_tolerance, max_iterations, stalled };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::fidelity_target: return "fidelity_target";
    case StopReason::gradient_tolerance: return "gradient_tolerance";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::stalled: return "stalled";
  }
  return "?";
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::lbfgs;
  int max_iters = 200;
  double grad_tol = 1e-8;        // on the max-norm of the minimization gradient
  double fidelity_target = 1.0;  // early stop once fidelity reaches this
  int lbfgs_memory = 20;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  // Steepest descent uses a near-exact cubic search (tight curvature bound);
  // the quasi-Newton methods keep the loose one.
  double wolfe_c2_steepest = 0.05;
  int line_search_max_evals = 20;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (!(wolfe_c1 > 0.0) || !(wolfe_c1 < wolfe_c2) || !(wolfe_c2 < 1.0))
      throw std::invalid_argument("OptimizerConfig: need 0 < wolfe_c1 < wolfe_c2 < 1");
    if (!(wolfe_c1 < wolfe_c2_steepest) || !(wolfe_c2_steepest < 1.0))
      throw std::invalid_argument("OptimizerConfig: wolfe_c2_steepest out of range");
    if (lbfgs_memory < 1) throw std::invalid_argument("OptimizerConfig: lbfgs_memory must be >= 1");
    if (max_iters < 0) throw std::invalid_argument("OptimizerConfig: max_iters must be >= 0");
    if (line_search_max_evals < 1)
      throw std::invalid_argument("OptimizerConfig: line_search_max_evals must be >= 1");
  }
};

/// One accepted optimizer iteration. Iteration 0 is the evaluation of the
/// starting pulse.
struct IterationRecord {
  int iteration = 0;
  double fidelity = 0.0;
  double grad_max_norm = 0.0;
  double step_length = 0.0;
  int evaluations = 0;
  double wall_ms = 0.0;
};

struct OptimizeResult {
  PulseSequence pulse;
  std::vector<IterationRecord> log;
  double fidelity = 0.0;
  StopReason reason = StopReason::max_iterations;
  int curvature_rejections = 0;
  int line_search_failures = 0;
  int total_evaluations = 0;

  bool converged() const {
    return reason == StopReason::fidelity_target || reason == StopReason::gradient_tolerance;
  }
};

namespace detail {

inline RealVector flatten_pulse(const RealMatrix& amplitudes) {
  const int n = static_cast<int>(amplitudes.rows()), k = static_cast<int>(amplitudes.cols());
  RealVector x(n * k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) x(i * k + j) = amplitudes(i, j);
  return x;
}

inline RealMatrix unflatten_pulse(const RealVector& x, int n, int k) {
  RealMatrix amplitudes(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) amplitudes(i, j) = x(i * k + j);
  return amplitudes;
}

}  // namespace detail

/// Maximizes transfer fidelity over the pulse table by minimizing
/// f = 1 - fidelity with the selected algorithm. Iterates are kept inside
/// the amplitude box by clipping before every evaluation. Runs until the
/// gradient tolerance, the fidelity target or the iteration budget is hit.
inline OptimizeResult optimize(const ControlProblem& problem, const PulseSequence& init,
                               const GradientMethod& method, const OptimizerConfig& cfg) {
  cfg.validate();
  problem.check_pulse(init);
  for (int k = 0; k < init.n_controls(); ++k) {
    const double b = problem.bound_for(k);
    if (std::isfinite(b) && init.amplitudes.col(k).cwiseAbs().maxCoeff() > b * (1.0 + 1e-12))
      throw std::invalid_argument("optimize: initial pulse violates the amplitude bounds");
  }

  const int n = problem.n_steps;
  const int k_ctrl = problem.n_controls();
  const int dim = n * k_ctrl;

  struct Evaluation {
    double f = 0.0;
    double fid = 0.0;
    RealVector x;
    RealVector grad;  // of f = 1 - fidelity
  };

  OptimizeResult result;
  int iteration_index = 0;

  auto evaluate = [&](const RealVector& x_raw) {
    const PulseSequence pulse =
        problem.project(PulseSequence(detail::unflatten_pulse(x_raw, n, k_ctrl)));
    const GradientReport rep = gradient_and_fidelity_fused(problem, pulse, method, cfg.threads);
    ++result.total_evaluations;
    Evaluation ev;
    ev.fid = rep.fidelity;
    ev.f = 1.0 - rep.fidelity;
    ev.x = detail::flatten_pulse(pulse.amplitudes);
    ev.grad = -detail::flatten_pulse(rep.grad);
    if (!std::isfinite(ev.f) || !ev.grad.allFinite())
      throw std::runtime_error(
          "optimize: non-finite objective or gradient at iteration " +
          std::to_string(iteration_index) + " (fidelity = " + std::to_string(rep.fidelity) +
          ", |pulse|_max = " + std::to_string(pulse.amplitudes.cwiseAbs().maxCoeff()) + " Hz)");
    return ev;
  };

  using Clock = std::chrono::steady_clock;
  auto iter_start = Clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - iter_start).count();
  };

  Evaluation current = evaluate(detail::flatten_pulse(init.amplitudes));
  result.log.push_back({0, current.fid, current.grad.cwiseAbs().maxCoeff(), 0.0, 1, elapsed_ms()});

  auto finish = [&](StopReason reason) {
    result.pulse = PulseSequence(detail::unflatten_pulse(current.x, n, k_ctrl));
    result.fidelity = current.fid;
    result.reason = reason;
    return result;
  };

  if (current.fid >= cfg.fidelity_target) return finish(StopReason::fidelity_target);
  if (current.grad.cwiseAbs().maxCoeff() <= cfg.grad_tol)
    return finish(StopReason::gradient_tolerance);

  RealMatrix h_inv;  // dense inverse Hessian (dfp, bfgs)
  const bool dense_mode = cfg.algorithm == Algorithm::dfp || cfg.algorithm == Algorithm::bfgs;
  if (dense_mode)
    h_inv = RealMatrix::Identity(dim, dim) / std::max(current.grad.norm(), 1e-300);
  std::deque<CurvaturePair> history;
  // Dense modes pick up the curvature scale of the first stored pair before
  // updating (the same role the newest-pair gamma plays for lbfgs); the
  // first search direction is unaffected.
  bool dense_rescale_pending = dense_mode;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    iteration_index = iter;
    iter_start = Clock::now();

    RealVector direction;
    switch (cfg.algorithm) {
      case Algorithm::steepest: direction = -current.grad; break;
      case Algorithm::dfp:
      case Algorithm::bfgs: direction = -(h_inv * current.grad); break;
      case Algorithm::lbfgs: {
        double gamma0;
        if (history.empty()) {
          gamma0 = 1.0 / std::max(current.grad.norm(), 1e-300);
        } else {
          const CurvaturePair& newest = history.back();
          gamma0 = newest.sg / newest.g.squaredNorm();
        }
        direction = lbfgs_direction(history, current.grad, gamma0);
        break;
      }
    }

    double dphi0 = current.grad.dot(direction);
    if (!(dphi0 < 0.0)) {
      // Corrupted curvature model; fall back to steepest for this iteration.
      if (dense_mode)
        h_inv = RealMatrix::Identity(dim, dim) / std::max(current.grad.norm(), 1e-300);
      history.clear();
      direction = -current.grad;
      dphi0 = current.grad.dot(direction);
      if (!(dphi0 < 0.0)) return finish(StopReason::gradient_tolerance);
    }

    WolfeParams wolfe;
    wolfe.c1 = cfg.wolfe_c1;
    wolfe.c2 = cfg.algorithm == Algorithm::steepest ? cfg.wolfe_c2_steepest : cfg.wolfe_c2;
    wolfe.max_evals = cfg.line_search_max_evals;
    // Steepest descent restarts from an inverse-gradient trial and expands
    // the bracket by doubling, cubic interpolation refining the bracket:
    // the classical near-exact search. Quasi-Newton trials start at 1.
    wolfe.cubic_extrapolation = cfg.algorithm != Algorithm::steepest;
    wolfe.alpha_init = cfg.algorithm == Algorithm::steepest
                           ? 0.1 / std::max(current.grad.cwiseAbs().maxCoeff(), 1e-300)
                           : 1.0;

    std::map<double, Evaluation> trials;
    auto phi = [&](double alpha) {
      Evaluation ev = evaluate(current.x + alpha * direction);
      const double dphi = ev.grad.dot(direction);
      trials.emplace(alpha, std::move(ev));
      return std::pair<double, double>(trials.at(alpha).f, dphi);
    };

    const int evals_before = result.total_evaluations;
    const LineSearchResult ls = line_search(phi, current.f, dphi0, wolfe);
    if (!ls.wolfe_satisfied) ++result.line_search_failures;
    if (ls.alpha <= 0.0 || !trials.count(ls.alpha) || trials.at(ls.alpha).f >= current.f)
      return finish(StopReason::stalled);

    Evaluation next = trials.at(ls.alpha);
    const RealVector s = next.x - current.x;
    const RealVector g_diff = next.grad - current.grad;
    const double sg = s.dot(g_diff);

    bool stored = false;
    if (dense_mode && dense_rescale_pending && sg > 0.0) {
      h_inv = (sg / g_diff.squaredNorm()) * RealMatrix::Identity(dim, dim);
      dense_rescale_pending = false;
    }
    if (cfg.algorithm == Algorithm::dfp) {
      stored = dfp_update_inverse(h_inv, s, g_diff);
    } else if (cfg.algorithm == Algorithm::bfgs) {
      stored = bfgs_update_inverse(h_inv, s, g_diff);
    } else if (cfg.algorithm == Algorithm::lbfgs) {
      if (sg > 0.0) {
        history.push_back({s, g_diff, sg});
        if (static_cast<int>(history.size()) > cfg.lbfgs_memory) history.pop_front();
        stored = true;
      }
    } else {
      stored = true;  // steepest keeps no curvature state
    }
    if (!stored) ++result.curvature_rejections;

    current = std::move(next);
    result.log.push_back({iter, current.fid, current.grad.cwiseAbs().maxCoeff(), ls.alpha,
                          result.total_evaluations - evals_before, elapsed_ms()});

    if (current.fid >= cfg.fidelity_target) return finish(StopReason::fidelity_target);
    if (current.grad.cwiseAbs().maxCoeff() <= cfg.grad_tol)
      return finish(StopReason::gradient_tolerance);
  }
  return finish(StopReason::max_iterations);
}

}  // namespace grape
