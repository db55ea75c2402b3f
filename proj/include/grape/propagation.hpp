#pragma once

#include <vector>

#include "grape/control_problem.hpp"
#include "grape/expm.hpp"
#include "grape/parallel.hpp"
#include "grape/types.hpp"

namespace grape {

/// Forward states, backward costates and the step propagators of one pulse.
/// forward[n] is the state at t_n (forward[0] = rho0); backward[n] is the
/// target propagated back to t_n (backward[N] = sigma), so that
/// <backward[n]|forward[n]> is independent of n.
struct TrajectoryCache {
  std::vector<Vector> forward;
  std::vector<Vector> backward;
  std::vector<Matrix> propagators;

  int n_steps() const { return static_cast<int>(propagators.size()); }
};

/// Effective step generator L0 + sum_k c_k L_k for one pulse row.
inline Matrix step_generator(const ControlProblem& problem,
                             Eigen::Ref<const RealVector> pulse_row) {
  if (pulse_row.size() != problem.n_controls())
    throw std::invalid_argument("step_generator: pulse row length mismatch");
  Matrix l = problem.liouvillians.l0;
  for (int k = 0; k < problem.n_controls(); ++k)
    l += pulse_row(k) * problem.liouvillians.controls[static_cast<std::size_t>(k)];
  return l;
}

/// Step propagator exp[-i (L0 + sum_k c_k L_k) dt].
inline Matrix step_propagator(const ControlProblem& problem, Eigen::Ref<const RealVector> pulse_row,
                              const ExpmOptions& opts = {}) {
  return expm(Complex(0.0, -problem.dt) * step_generator(problem, pulse_row), opts);
}

/// Computes all step propagators, then sweeps the state forward from rho0
/// and the costate backward from sigma. Propagators are independent across
/// steps and may be computed concurrently; each lands in its own slot so the
/// result does not depend on the thread count.
inline TrajectoryCache propagate(const ControlProblem& problem, const PulseSequence& pulse,
                                 const ExpmOptions& opts = {}, int threads = 1) {
  problem.check_pulse(pulse);
  const int n = problem.n_steps;

  TrajectoryCache cache;
  cache.propagators.resize(static_cast<std::size_t>(n));
  parallel_for(n, threads, [&](int i) {
    cache.propagators[static_cast<std::size_t>(i)] =
        step_propagator(problem, pulse.amplitudes.row(i).transpose(), opts);
  });

  cache.forward.resize(static_cast<std::size_t>(n) + 1);
  cache.backward.resize(static_cast<std::size_t>(n) + 1);
  cache.forward[0] = problem.rho0;
  for (int i = 1; i <= n; ++i)
    cache.forward[static_cast<std::size_t>(i)].noalias() =
        cache.propagators[static_cast<std::size_t>(i - 1)] *
        cache.forward[static_cast<std::size_t>(i - 1)];
  cache.backward[static_cast<std::size_t>(n)] = problem.sigma;
  for (int i = n; i >= 1; --i)
    cache.backward[static_cast<std::size_t>(i - 1)].noalias() =
        cache.propagators[static_cast<std::size_t>(i - 1)].adjoint() *
        cache.backward[static_cast<std::size_t>(i)];
  return cache;
}

/// Transfer fidelity Re <sigma|rho(t_N)> of a computed trajectory; both
/// states were unit-normalized at problem construction, so 1 is perfect
/// transfer.
inline double fidelity(const ControlProblem& problem, const TrajectoryCache& cache) {
  if (cache.n_steps() != problem.n_steps || cache.forward.size() != cache.backward.size())
    throw std::invalid_argument("fidelity: cache does not match the problem");
  return cache.backward.back().dot(cache.forward.back()).real();
}

/// Propagate and fold in one call; the common objective evaluation.
inline double transfer_fidelity(const ControlProblem& problem, const PulseSequence& pulse,
                                const ExpmOptions& opts = {}, int threads = 1) {
  return fidelity(problem, propagate(problem, pulse, opts, threads));
}

}  // namespace grape
