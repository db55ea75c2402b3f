#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "grape/parallel.hpp"
#include "grape/problem_file.hpp"
#include "grape/propagation.hpp"

namespace grape {

/// 17-significant-digit decimal form; round-trips every finite double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// iterations.csv: one row per accepted iteration. Wall-clock time is kept
/// out of the file so reruns with one seed are byte-identical.
inline void write_iteration_log(std::ostream& out, const std::vector<IterationRecord>& log) {
  out << "iteration,fidelity,grad_max_norm,step_length,evaluations\n";
  for (const IterationRecord& rec : log)
    out << rec.iteration << ',' << format_double(rec.fidelity) << ','
        << format_double(rec.grad_max_norm) << ',' << format_double(rec.step_length) << ','
        << rec.evaluations << '\n';
}

/// waveform.csv: step start time plus one amplitude column per control.
inline void write_waveform(std::ostream& out, const PulseSequence& pulse, double dt) {
  out << "t_s";
  if (pulse.n_controls() == 2) {
    out << ",cx_hz,cy_hz";
  } else {
    for (int k = 1; k <= pulse.n_controls(); ++k) out << ",c" << k << "_hz";
  }
  out << '\n';
  for (int n = 0; n < pulse.n_steps(); ++n) {
    out << format_double(n * dt);
    for (int k = 0; k < pulse.n_controls(); ++k)
      out << ',' << format_double(pulse.amplitudes(n, k));
    out << '\n';
  }
}

inline void write_profile(std::ostream& out, const std::vector<double>& offsets_hz,
                          const std::vector<double>& sz) {
  out << "offset_hz,sz\n";
  for (std::size_t i = 0; i < offsets_hz.size(); ++i)
    out << format_double(offsets_hz[i]) << ',' << format_double(sz[i]) << '\n';
}

/// Final normalized <Sz> of an isolated spin at each offset after the given
/// x/y waveform: the drift is 2*pi*offset*Sz and the state starts at Sz, so
/// -1 is perfect inversion. Offsets are independent and evaluated
/// concurrently in a fixed output order.
inline std::vector<double> sweep_offsets(const PulseSequence& pulse, double dt,
                                         const std::vector<double>& offsets_hz,
                                         const ExpmOptions& opts = {}, int threads = 1) {
  if (pulse.n_controls() != 2)
    throw std::invalid_argument("sweep_offsets: waveform must have x and y controls");
  std::vector<double> sz(offsets_hz.size());
  parallel_for(static_cast<int>(offsets_hz.size()), threads, [&](int i) {
    SpinChainSpec one;
    one.n_spins = 1;
    one.offsets = {offsets_hz[static_cast<std::size_t>(i)]};
    const Vector z = vectorize(spin_operators(1).z[0]);
    const ControlProblem probe(build_hamiltonians(one), Matrix(), z, z, pulse.n_steps(), dt);
    sz[static_cast<std::size_t>(i)] = transfer_fidelity(probe, pulse, opts);
  });
  return sz;
}

/// Two-method gradient comparison plus the step-size scaling of the
/// first-order error.
struct GradCheckReport {
  double fidelity = 0.0;
  double max_abs_dev = 0.0;
  double mean_abs_dev = 0.0;
  double max_rel_dev = 0.0;  // relative to the max-norm of the first method
  std::vector<double> slope_dts;
  std::vector<double> slope_errors;
  double first_order_slope = 0.0;
};

inline GradCheckReport gradient_check(const ProblemFile& pf, const GradientMethod& method_a,
                                      const GradientMethod& method_b, int threads = 1) {
  const ControlProblem problem = pf.build_problem();
  const PulseSequence pulse = default_initial_pulse(problem, pf.seed);

  GradCheckReport report;
  const GradientReport ga = gradient(problem, pulse, method_a, threads);
  const GradientReport gb = gradient(problem, pulse, method_b, threads);
  report.fidelity = ga.fidelity;
  const RealMatrix dev = (ga.grad - gb.grad).cwiseAbs();
  report.max_abs_dev = dev.maxCoeff();
  report.mean_abs_dev = dev.mean();
  report.max_rel_dev = report.max_abs_dev / std::max(ga.grad.cwiseAbs().maxCoeff(), 1e-300);

  // First-order error versus step length, fit in log-log coordinates. The
  // probe uses a symmetry-breaking target: with an antiparallel pair
  // (sigma = -rho0) the quadratic term folds to zero and the fitted
  // exponent would reflect that cancellation instead of the generic law.
  ProblemFile probe = pf;
  probe.target_state = pf.initial_state == "Sx@1" ? "Sz@1" : "Sx@1";
  report.slope_dts = {1e-6, 2e-6, 5e-6, 1e-5, 2e-5};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double trial_dt : report.slope_dts) {
    const ControlProblem scaled = probe.build_problem(trial_dt);
    const GradientReport gf = gradient(scaled, pulse, GradientMethod::first_order(), threads);
    const GradientReport gs = gradient(scaled, pulse, GradientMethod::series_exact(), threads);
    const double err = (gf.grad - gs.grad).cwiseAbs().maxCoeff();
    report.slope_errors.push_back(err);
    const double lx = std::log(trial_dt), ly = std::log(std::max(err, 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n_pts = static_cast<double>(report.slope_dts.size());
  report.first_order_slope = (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
  return report;
}

enum class RunStatus { converged = 0, budget_exhausted = 1, failed = 2 };

struct RunOverrides {
  std::optional<Algorithm> algorithm;
  std::optional<GradientKind> gradient;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

struct RunResult {
  RunStatus status = RunStatus::failed;
  OptimizeResult optimize;
  std::vector<std::string> files_written;
};

/// Full problem-file run: optimize, then write iterations.csv, waveform.csv
/// and (when a sweep grid is defined) profile.csv into out_dir.
inline RunResult run_problem(const ProblemFile& pf_in, const std::string& out_dir,
                             const RunOverrides& overrides = {}, std::ostream* console = nullptr) {
  ProblemFile pf = pf_in;
  if (overrides.algorithm) pf.optimizer.algorithm = *overrides.algorithm;
  if (overrides.gradient) pf.method.kind = *overrides.gradient;
  if (overrides.max_iters) pf.optimizer.max_iters = *overrides.max_iters;
  if (overrides.seed) pf.seed = *overrides.seed;
  if (overrides.threads) pf.optimizer.threads = *overrides.threads;
  pf.optimizer.seed = pf.seed;

  const ControlProblem problem = pf.build_problem();
  const PulseSequence init = default_initial_pulse(problem, pf.optimizer.seed);
  RunResult result;
  result.optimize = optimize(problem, init, pf.method, pf.optimizer);

  std::filesystem::create_directories(out_dir);
  auto open = [&](const std::string& file) {
    const std::string path = (std::filesystem::path(out_dir) / file).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    result.files_written.push_back(path);
    return out;
  };

  {
    auto out = open("iterations.csv");
    write_iteration_log(out, result.optimize.log);
  }
  {
    auto out = open("waveform.csv");
    write_waveform(out, result.optimize.pulse, pf.dt);
  }
  if (pf.sweep && pf.sweep->points > 0) {
    const std::vector<double> grid = pf.sweep->grid();
    const std::vector<double> sz =
        sweep_offsets(result.optimize.pulse, pf.dt, grid, pf.method.expm, pf.optimizer.threads);
    auto out = open("profile.csv");
    write_profile(out, grid, sz);
  }

  if (console) {
    *console << "status: " << to_string(result.optimize.reason)
             << "  fidelity: " << format_double(result.optimize.fidelity)
             << "  iterations: " << (result.optimize.log.size() - 1)
             << "  evaluations: " << result.optimize.total_evaluations << '\n';
    double total_ms = 0.0;
    for (const IterationRecord& rec : result.optimize.log) total_ms += rec.wall_ms;
    *console << "wall time: " << format_double(total_ms * 1e-3) << " s\n";
    for (const std::string& f : result.files_written) *console << "wrote " << f << '\n';
  }

  result.status =
      result.optimize.converged() ? RunStatus::converged : RunStatus::budget_exhausted;
  return result;
}

}  // namespace grape
