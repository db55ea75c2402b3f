#pragma once

// Shared generators and independent reference computations for the test
// suites. Everything here deliberately avoids the library's production
// kernels wherever it serves as an oracle for them.

#include <cmath>
#include <cstdint>
#include <vector>

#include "grape/control_problem.hpp"
#include "grape/gradient.hpp"
#include "grape/propagation.hpp"
#include "grape/spin_system.hpp"
#include "grape/types.hpp"

namespace grape::testing {

/// Deterministic stream of doubles in [-1, 1); identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : rng_(seed) {}
  double sym() { return rng_.next_symmetric(1.0); }
  double unit() { return rng_.next_unit(); }
  Complex csym() { return {sym(), sym()}; }

 private:
  grape::detail::UniformRng rng_;
};

inline Matrix random_complex(int dim, std::uint64_t seed) {
  Rng rng(seed);
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.csym();
  return a;
}

inline Matrix random_hermitian(int dim, std::uint64_t seed) {
  const Matrix a = random_complex(dim, seed);
  return 0.5 * (a + a.adjoint());
}

inline RealMatrix random_real(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  RealMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = rng.sym();
  return a;
}

inline RealVector random_real_vector(int dim, std::uint64_t seed) {
  Rng rng(seed);
  RealVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.sym();
  return v;
}

inline double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

/// Eigendecomposition-based matrix exponential; reference for the Taylor
/// route (general matrices, Eigen's complex Schur solver).
inline Matrix expm_eig_reference(const Matrix& a) {
  Eigen::ComplexEigenSolver<Matrix> eig(a);
  const Matrix& v = eig.eigenvectors();
  Vector lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda(i) = std::exp(lambda(i));
  return v * lambda.asDiagonal() * v.inverse();
}

/// Truncated double-sum Taylor derivative of exp(-i l dt) in direction lk:
/// sum_p ((-i dt)^p / p!) sum_q l^q lk l^(p-q-1). Independent of the
/// commutator-series code path; usable only at modest norms.
inline Matrix dexp_double_sum_reference(const Matrix& l, const Matrix& lk, double dt, int terms) {
  const Eigen::Index d = l.rows();
  // Powers of l up to terms-1.
  std::vector<Matrix> pow_l;
  pow_l.push_back(Matrix::Identity(d, d));
  for (int p = 1; p < terms; ++p) pow_l.push_back(Matrix(pow_l.back() * l));

  Matrix sum = Matrix::Zero(d, d);
  Complex coeff(1.0, 0.0);  // (-i dt)^p / p!
  for (int p = 1; p <= terms; ++p) {
    coeff *= Complex(0.0, -dt) / static_cast<double>(p);
    Matrix inner = Matrix::Zero(d, d);
    for (int q = 0; q <= p - 1; ++q)
      inner += pow_l[static_cast<std::size_t>(q)] * lk *
               pow_l[static_cast<std::size_t>(p - q - 1)];
    sum += coeff * inner;
  }
  return sum;
}

/// Sixth-order central finite difference of a matrix-valued function.
template <typename F>
Matrix central_diff_6(F&& f, double h) {
  return (45.0 * (f(h) - f(-h)) - 9.0 * (f(2.0 * h) - f(-2.0 * h)) + (f(3.0 * h) - f(-3.0 * h))) /
         (60.0 * h);
}

/// Brute-force gradient of the transfer fidelity by objective differencing:
/// perturb one amplitude, re-run the state trajectory, difference. With
/// reuse_propagators the unperturbed step propagators are taken from a base
/// cache (bit-identical matrices); the trajectory itself is always re-run.
inline RealMatrix objective_fd_gradient(const ControlProblem& problem, const PulseSequence& pulse,
                                        double h, bool central = true,
                                        bool reuse_propagators = false, int threads = 1) {
  const int n = problem.n_steps, k_ctrl = problem.n_controls();
  RealMatrix grad(n, k_ctrl);

  TrajectoryCache base;
  if (reuse_propagators) base = propagate(problem, pulse, ExpmOptions{}, threads);

  auto objective = [&](const PulseSequence& p, int changed_step) {
    if (!reuse_propagators) return transfer_fidelity(problem, p, ExpmOptions{}, 1);
    Vector state = problem.rho0;
    for (int i = 0; i < n; ++i) {
      if (i == changed_step) {
        state = step_propagator(problem, p.amplitudes.row(i).transpose()) * state;
      } else {
        state = base.propagators[static_cast<std::size_t>(i)] * state;
      }
    }
    return problem.sigma.dot(state).real();
  };

  parallel_for(n * k_ctrl, threads, [&](int flat) {
    const int i = flat / k_ctrl, k = flat % k_ctrl;
    PulseSequence plus = pulse;
    plus.amplitudes(i, k) += h;
    const double f_plus = objective(plus, i);
    if (central) {
      PulseSequence minus = pulse;
      minus.amplitudes(i, k) -= h;
      grad(i, k) = (f_plus - objective(minus, i)) / (2.0 * h);
    } else {
      grad(i, k) = (f_plus - objective(pulse, i)) / h;
    }
  });
  return grad;
}

/// Direct-form (non-inverse) DFP and BFGS Hessian updates; oracles for the
/// inverse-form production updates.
inline RealMatrix dfp_update_direct(const RealMatrix& h, const RealVector& s, const RealVector& g) {
  const double gs = g.dot(s);
  const RealMatrix e = RealMatrix::Identity(h.rows(), h.cols());
  const RealMatrix left = e - (g * s.transpose()) / gs;
  return left * h * left.transpose() + (g * g.transpose()) / gs;
}

inline RealMatrix bfgs_update_direct(const RealMatrix& h, const RealVector& s,
                                     const RealVector& g) {
  const RealVector hs = h * s;
  return h + (g * g.transpose()) / g.dot(s) - (hs * hs.transpose()) / s.dot(hs);
}

/// Small transfer problems used across suites.
inline ControlProblem spin_chain_problem(int n_spins, const std::vector<double>& offsets,
                                         double j_hz, int n_steps, double dt,
                                         double bound_hz = 2500.0, double relaxation_rate = 0.0) {
  SpinChainSpec spec;
  spec.n_spins = n_spins;
  spec.offsets = offsets;
  spec.j_hz = j_hz;
  spec.b1_max_hz = bound_hz;
  HamiltonianSet hams = build_hamiltonians(spec);
  Matrix relax;
  if (relaxation_rate > 0.0) relax = uniform_damping(hams.hilbert_dim(), relaxation_rate);

  const SpinOperators ops = spin_operators(n_spins);
  Matrix sum_sz = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
  for (const Matrix& sz : ops.z) sum_sz += sz;
  const Vector rho0 = vectorize(sum_sz);
  const Vector sigma = vectorize(Matrix(-sum_sz));
  std::vector<double> bounds;
  if (std::isfinite(bound_hz)) bounds.assign(hams.controls.size(), bound_hz);
  return ControlProblem(std::move(hams), relax, rho0, sigma, n_steps, dt, std::move(bounds));
}

/// The benchmark system shared by the gradient and optimizer suites:
/// 3 spins at -1000/0/+1000 Hz, J = 20 Hz, x/y controls capped at 2500 Hz.
inline ControlProblem benchmark_problem(int n_steps = 50, double dt = 1e-4) {
  return spin_chain_problem(3, {-1000.0, 0.0, 1000.0}, 20.0, n_steps, dt);
}

/// The optimizer-comparison benchmark: same chain, but with the control
/// amplitude capped at 1000 Hz so the problem is not over-actuated and the
/// algorithms separate within a 100-iteration budget.
inline ControlProblem optimizer_benchmark_problem(int n_steps = 50, double dt = 1e-4) {
  return spin_chain_problem(3, {-1000.0, 0.0, 1000.0}, 20.0, n_steps, dt, 1000.0);
}

/// Same chain but with a generic (non-antiparallel) transfer pair,
/// sum-Sz -> Sx of spin 1. With the inversion target sigma = -rho0 the
/// leading first-order error term folds to zero by symmetry; step-scaling
/// studies need this generic pair to expose the quadratic law.
inline ControlProblem generic_transfer_problem(int n_steps, double dt) {
  SpinChainSpec spec;
  spec.n_spins = 3;
  spec.offsets = {-1000.0, 0.0, 1000.0};
  spec.j_hz = 20.0;
  spec.b1_max_hz = 2500.0;
  HamiltonianSet hams = build_hamiltonians(spec);
  const SpinOperators ops = spin_operators(3);
  Matrix sum_sz = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
  for (const Matrix& sz : ops.z) sum_sz += sz;
  return ControlProblem(std::move(hams), Matrix(), vectorize(sum_sz), vectorize(ops.x[0]),
                        n_steps, dt, {2500.0, 2500.0});
}

}  // namespace grape::testing
