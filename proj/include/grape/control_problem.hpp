#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "grape/liouville.hpp"
#include "grape/spin_system.hpp"
#include "grape/types.hpp"

namespace grape {

/// N x K table of piecewise-constant control amplitudes in Hz; row n holds
/// the amplitudes of step n.
struct PulseSequence {
  RealMatrix amplitudes;

  PulseSequence() = default;
  explicit PulseSequence(RealMatrix amps) : amplitudes(std::move(amps)) {}
  PulseSequence(int n_steps, int n_controls)
      : amplitudes(RealMatrix::Zero(n_steps, n_controls)) {}

  int n_steps() const { return static_cast<int>(amplitudes.rows()); }
  int n_controls() const { return static_cast<int>(amplitudes.cols()); }

  void validate() const {
    if (!amplitudes.allFinite())
      throw std::invalid_argument("PulseSequence: amplitudes must be finite");
  }
};

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit generator
/// output; avoids the implementation-defined std distribution so seeded
/// runs are identical across standard libraries.
class UniformRng {
 public:
  explicit UniformRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_symmetric(double amplitude) { return (2.0 * next_unit() - 1.0) * amplitude; }

 private:
  // xorshift* keeps the stream identical everywhere.
  std::uint64_t next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545f4914f6cdd1dULL;
  }
  std::uint64_t state_;
};

}  // namespace detail

/// Point-to-point transfer problem: generators, endpoint states, time grid
/// and amplitude box. States are normalized to unit 2-norm on construction.
struct ControlProblem {
  LiouvillianSet liouvillians;
  std::optional<HamiltonianSet> hamiltonians;  // present when lifted here
  Vector rho0;
  Vector sigma;
  int n_steps = 0;
  double dt = 0.0;
  std::vector<double> bounds;  // per-control |c| cap in Hz; empty = unbounded

  ControlProblem(HamiltonianSet hams, const Matrix& relaxation, const Vector& rho0_raw,
                 const Vector& sigma_raw, int steps, double step_seconds,
                 std::vector<double> amplitude_bounds = {})
      : ControlProblem(build_liouvillians(hams, relaxation), rho0_raw, sigma_raw, steps,
                       step_seconds, std::move(amplitude_bounds)) {
    hamiltonians = std::move(hams);
  }

  ControlProblem(LiouvillianSet louvs, const Vector& rho0_raw, const Vector& sigma_raw, int steps,
                 double step_seconds, std::vector<double> amplitude_bounds = {})
      : liouvillians(std::move(louvs)),
        rho0(rho0_raw),
        sigma(sigma_raw),
        n_steps(steps),
        dt(step_seconds),
        bounds(std::move(amplitude_bounds)) {
    if (n_steps < 1) throw std::invalid_argument("ControlProblem: n_steps must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("ControlProblem: dt must be positive");
    if (rho0.size() != liouvillians.dim() || sigma.size() != liouvillians.dim())
      throw std::invalid_argument("ControlProblem: state dimension mismatch");
    const double n0 = rho0.norm(), n1 = sigma.norm();
    if (!(n0 > 0.0) || !std::isfinite(n0) || !(n1 > 0.0) || !std::isfinite(n1))
      throw std::invalid_argument("ControlProblem: states must have finite nonzero norm");
    rho0 /= n0;
    sigma /= n1;
    if (!bounds.empty() && static_cast<int>(bounds.size()) != liouvillians.n_controls())
      throw std::invalid_argument("ControlProblem: one bound per control required");
    for (double b : bounds)
      if (std::isnan(b) || b < 0.0)
        throw std::invalid_argument("ControlProblem: bounds must be >= 0");
  }

  int dim() const { return liouvillians.dim(); }
  int n_controls() const { return liouvillians.n_controls(); }
  bool bounded() const {
    for (double b : bounds)
      if (std::isfinite(b)) return true;
    return false;
  }

  double bound_for(int k) const {
    if (bounds.empty()) return std::numeric_limits<double>::infinity();
    return bounds[static_cast<std::size_t>(k)];
  }

  void check_pulse(const PulseSequence& pulse) const {
    pulse.validate();
    if (pulse.n_steps() != n_steps || pulse.n_controls() != n_controls())
      throw std::invalid_argument("pulse shape does not match the problem");
  }

  /// Clip a pulse into the amplitude box, entry by entry.
  PulseSequence project(const PulseSequence& pulse) const {
    PulseSequence out = pulse;
    for (int k = 0; k < out.n_controls(); ++k) {
      const double b = bound_for(k);
      if (!std::isfinite(b)) continue;
      for (int n = 0; n < out.n_steps(); ++n) {
        double& v = out.amplitudes(n, k);
        v = std::clamp(v, -b, b);
      }
    }
    return out;
  }
};

/// Seeded uniform random pulse in +-amplitude, the customary optimization
/// starting point.
inline PulseSequence random_pulse(int n_steps, int n_controls, double amplitude,
                                  std::uint64_t seed) {
  detail::UniformRng rng(seed);
  PulseSequence pulse(n_steps, n_controls);
  for (int n = 0; n < n_steps; ++n)
    for (int k = 0; k < n_controls; ++k) pulse.amplitudes(n, k) = rng.next_symmetric(amplitude);
  return pulse;
}

/// Default initializer: uniform in +-(0.4 * bound) per control, or +-1000 Hz
/// where a control is unbounded.
inline PulseSequence default_initial_pulse(const ControlProblem& problem, std::uint64_t seed) {
  detail::UniformRng rng(seed);
  PulseSequence pulse(problem.n_steps, problem.n_controls());
  for (int n = 0; n < problem.n_steps; ++n)
    for (int k = 0; k < problem.n_controls(); ++k) {
      const double b = problem.bound_for(k);
      const double amp = std::isfinite(b) ? 0.4 * b : 1000.0;
      pulse.amplitudes(n, k) = rng.next_symmetric(amp);
    }
  return pulse;
}

}  // namespace grape
