#include "grape/gradient.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace grape {
namespace {

using testing::max_abs;

PulseSequence test_pulse(int n, int k, std::uint64_t seed, double amp = 1000.0) {
  return PulseSequence(testing::random_real(n, k, seed) * amp);
}

TEST(Gradient, FidelityFieldIdenticalAcrossMethods) {
  ControlProblem problem = testing::spin_chain_problem(2, {200.0, -400.0}, 15.0, 6, 1e-4);
  const PulseSequence pulse = test_pulse(6, 2, 201);
  const double reference =
      gradient(problem, pulse, GradientMethod::series_exact()).fidelity;
  for (GradientMethod m : {GradientMethod::first_order(), GradientMethod::eigen_exact(),
                           GradientMethod::fd_forward(), GradientMethod::fd_central()}) {
    EXPECT_EQ(gradient(problem, pulse, m).fidelity, reference) << to_string(m.kind);
  }
}

TEST(Gradient, FusedEqualsUnfusedBitForBit) {
  ControlProblem problem = testing::spin_chain_problem(2, {100.0, 300.0}, 10.0, 5, 1e-4);
  const PulseSequence pulse = test_pulse(5, 2, 202);
  const GradientReport a = gradient(problem, pulse, GradientMethod::series_exact());
  const GradientReport b =
      gradient_and_fidelity_fused(problem, pulse, GradientMethod::series_exact());
  EXPECT_EQ(a.fidelity, b.fidelity);
  EXPECT_EQ((a.grad - b.grad).cwiseAbs().maxCoeff(), 0.0);
  // Purity: a repeated call is bit-identical.
  const GradientReport c = gradient(problem, pulse, GradientMethod::series_exact());
  EXPECT_EQ((a.grad - c.grad).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, SeriesMatchesObjectiveDifferencingOracle) {
  ControlProblem problem = testing::benchmark_problem(10, 1e-4);
  const PulseSequence pulse = test_pulse(10, 2, 203);
  const GradientReport report = gradient(problem, pulse, GradientMethod::series_exact());

  const double h = fd_step_select(FdStepPolicy{}, 1.0);
  const RealMatrix oracle = testing::objective_fd_gradient(problem, pulse, h, true, false);
  const double scale = oracle.cwiseAbs().maxCoeff();
  EXPECT_GT(scale, 0.0);
  EXPECT_LT((report.grad - oracle).cwiseAbs().maxCoeff() / scale, 1e-6);
}

TEST(Gradient, OracleWithPropagatorReuseIsTheSameOracle) {
  ControlProblem problem = testing::spin_chain_problem(2, {150.0, -250.0}, 12.0, 5, 1e-4);
  const PulseSequence pulse = test_pulse(5, 2, 204);
  const double h = 1e-4;
  const RealMatrix full = testing::objective_fd_gradient(problem, pulse, h, true, false);
  const RealMatrix reused = testing::objective_fd_gradient(problem, pulse, h, true, true);
  EXPECT_LT((full - reused).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradient, SeriesAgreesWithEigenExact) {
  ControlProblem problem = testing::spin_chain_problem(2, {-500.0, 800.0}, 25.0, 8, 1e-4);
  const PulseSequence pulse = test_pulse(8, 2, 205);
  const GradientReport series = gradient(problem, pulse, GradientMethod::series_exact());
  const GradientReport eig = gradient(problem, pulse, GradientMethod::eigen_exact());
  const double scale = series.grad.cwiseAbs().maxCoeff();
  EXPECT_LT((series.grad - eig.grad).cwiseAbs().maxCoeff() / scale, 1e-9);
}

TEST(Gradient, FdCentralWithinPolicyThresholdOfSeries) {
  ControlProblem problem = testing::spin_chain_problem(2, {350.0, -120.0}, 18.0, 6, 1e-4);
  const PulseSequence pulse = test_pulse(6, 2, 206);
  GradientMethod fd = GradientMethod::fd_central();
  const GradientReport fd_report = gradient(problem, pulse, fd);
  const GradientReport series = gradient(problem, pulse, GradientMethod::series_exact());
  EXPECT_LT((fd_report.grad - series.grad).cwiseAbs().maxCoeff(),
            fd.fd_policy.error_threshold);
}

TEST(Gradient, FirstOrderErrorShrinksQuadraticallyWithDt) {
  // log-log slope of |first_order - series| over dt, on a transfer pair
  // without the antiparallel symmetry (which cancels the quadratic term).
  const PulseSequence pulse = test_pulse(8, 2, 207);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const std::vector<double> dts = {1e-6, 2e-6, 5e-6, 1e-5, 2e-5};
  for (double dt : dts) {
    ControlProblem problem = testing::generic_transfer_problem(8, dt);
    const GradientReport first = gradient(problem, pulse, GradientMethod::first_order());
    const GradientReport series = gradient(problem, pulse, GradientMethod::series_exact());
    const double err = (first.grad - series.grad).cwiseAbs().maxCoeff();
    const double lx = std::log(dt), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = static_cast<double>(dts.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, 2.0, 0.3);
}

TEST(Gradient, FirstOrderFailsAgainstOracleAtLargeDt) {
  // The cheap rule must be visibly wrong at 100 us stepping.
  ControlProblem problem = testing::benchmark_problem(10, 1e-4);
  const PulseSequence pulse = test_pulse(10, 2, 208);
  const GradientReport first = gradient(problem, pulse, GradientMethod::first_order());
  const GradientReport series = gradient(problem, pulse, GradientMethod::series_exact());
  const double scale = series.grad.cwiseAbs().maxCoeff();
  EXPECT_GT((first.grad - series.grad).cwiseAbs().maxCoeff() / scale, 1e-3);
}

TEST(Gradient, StationaryAtTheOptimumForCommutingGenerators) {
  // Single spin, x control only, no drift: every generator commutes. Set the
  // target to the exactly evolved state; the overlap is maximal there and
  // the gradient must vanish.
  SpinChainSpec spec;
  spec.n_spins = 1;
  spec.offsets = {0.0};
  HamiltonianSet hams = build_hamiltonians(spec);
  hams.controls.resize(1);  // keep the x control only

  const Vector rho0 = vectorize(spin_operators(1).z[0]);
  const int n = 4;
  const double dt = 1e-4;
  PulseSequence pulse(n, 1);
  pulse.amplitudes.setConstant(600.0);

  ControlProblem pre(hams, Matrix(), rho0, rho0, n, dt);
  const Vector sigma = propagate(pre, pulse).forward.back();
  ControlProblem problem(hams, Matrix(), rho0, sigma, n, dt);
  const GradientReport report = gradient(problem, pulse, GradientMethod::series_exact());
  EXPECT_NEAR(report.fidelity, 1.0, 1e-12);
  EXPECT_LT(report.grad.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gradient, EigenExactRejectsRelaxation) {
  ControlProblem problem =
      testing::spin_chain_problem(2, {100.0, 200.0}, 5.0, 4, 1e-4, 2500.0, 50.0);
  const PulseSequence pulse = test_pulse(4, 2, 209);
  EXPECT_THROW(gradient(problem, pulse, GradientMethod::eigen_exact()), InvalidMethodError);
  // Series still works with relaxation.
  EXPECT_NO_THROW(gradient(problem, pulse, GradientMethod::series_exact()));
}

TEST(Gradient, EigenExactNeedsHilbertGenerators) {
  ControlProblem with = testing::spin_chain_problem(2, {100.0, 200.0}, 5.0, 4, 1e-4);
  ControlProblem without(with.liouvillians, with.rho0, with.sigma, 4, 1e-4);
  const PulseSequence pulse = test_pulse(4, 2, 210);
  EXPECT_NO_THROW(gradient(with, pulse, GradientMethod::eigen_exact()));
  EXPECT_THROW(gradient(without, pulse, GradientMethod::eigen_exact()), InvalidMethodError);
}

TEST(Gradient, FirstOrderAddsNoExponentialsBeyondThePropagators) {
  ControlProblem problem = testing::spin_chain_problem(2, {220.0, -180.0}, 9.0, 7, 1e-4);
  const PulseSequence pulse = test_pulse(7, 2, 211);

  std::atomic<std::uint64_t> calls{0};
  GradientMethod first = GradientMethod::first_order();
  first.expm.call_counter = &calls;
  gradient(problem, pulse, first);
  EXPECT_EQ(calls.load(), 7u);  // exactly one expm per step, from the cache build

  calls = 0;
  GradientMethod fd = GradientMethod::fd_central();
  fd.expm.call_counter = &calls;
  gradient(problem, pulse, fd);
  EXPECT_GT(calls.load(), 7u);
}

TEST(Gradient, ThreadCountDoesNotChangeBits) {
  ControlProblem problem = testing::benchmark_problem(8, 1e-4);
  const PulseSequence pulse = test_pulse(8, 2, 212);
  for (GradientMethod m : {GradientMethod::series_exact(), GradientMethod::eigen_exact(),
                           GradientMethod::first_order()}) {
    const GradientReport one = gradient(problem, pulse, m, 1);
    const GradientReport two = gradient(problem, pulse, m, 2);
    EXPECT_EQ((one.grad - two.grad).cwiseAbs().maxCoeff(), 0.0) << to_string(m.kind);
  }
}

TEST(Gradient, SeriesTermDiagnosticsPopulated) {
  ControlProblem problem = testing::benchmark_problem(5, 1e-4);
  const PulseSequence pulse = test_pulse(5, 2, 213);
  const GradientReport report = gradient(problem, pulse, GradientMethod::series_exact());
  ASSERT_EQ(report.series_terms_used.size(), 5u);
  for (int terms : report.series_terms_used) EXPECT_GE(terms, 2);
}

}  // namespace
}  // namespace grape
