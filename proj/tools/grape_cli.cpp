// Command-line front end: optimize a pulse from a problem file, sweep an
// optimized waveform over offsets, or compare gradient methods.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "grape/grape.hpp"

namespace {

struct CommonArgs {
  std::string problem_path;
  std::string out_dir = ".";
  std::string algorithm;
  std::string gradient_method;
  int max_iters = -1;
  std::int64_t seed = -1;
  int threads = 1;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args, bool needs_out) {
  cmd->add_option("--problem", args.problem_path, "problem definition file")
      ->required()
      ->check(CLI::ExistingFile);
  if (needs_out) cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--algorithm", args.algorithm, "override optimizer algorithm");
  cmd->add_option("--gradient-method", args.gradient_method, "override gradient method");
  cmd->add_option("--max-iters", args.max_iters, "override iteration budget");
  cmd->add_option("--seed", args.seed, "override initial-pulse seed");
  cmd->add_option("--threads", args.threads, "worker threads (0 = all cores)");
}

grape::RunOverrides to_overrides(const CommonArgs& args) {
  grape::RunOverrides ov;
  if (!args.algorithm.empty()) ov.algorithm = grape::algorithm_from_string(args.algorithm);
  if (!args.gradient_method.empty())
    ov.gradient = grape::gradient_kind_from_string(args.gradient_method);
  if (args.max_iters >= 0) ov.max_iters = args.max_iters;
  if (args.seed >= 0) ov.seed = static_cast<std::uint64_t>(args.seed);
  ov.threads = args.threads;
  return ov;
}

grape::PulseSequence load_waveform(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open waveform file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty waveform file '" + path + "'");
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ','))
      row.push_back(grape::detail::parse_double_field(cell, "waveform", line_no));
    if (row.size() < 2)
      throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                               ": expected t plus at least one amplitude");
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("waveform file '" + path + "' has no data rows");
  const int n_ctrl = static_cast<int>(rows.front().size()) - 1;
  grape::PulseSequence pulse(static_cast<int>(rows.size()), n_ctrl);
  for (int n = 0; n < pulse.n_steps(); ++n) {
    if (static_cast<int>(rows[static_cast<std::size_t>(n)].size()) != n_ctrl + 1)
      throw std::runtime_error(path + ": ragged waveform table");
    for (int k = 0; k < n_ctrl; ++k)
      pulse.amplitudes(n, k) = rows[static_cast<std::size_t>(n)][static_cast<std::size_t>(k + 1)];
  }
  return pulse;
}

int run_command(const CommonArgs& args) {
  const grape::ProblemFile pf = grape::ProblemFile::parse_file(args.problem_path);
  const grape::RunResult result =
      grape::run_problem(pf, args.out_dir, to_overrides(args), &std::cout);
  return result.status == grape::RunStatus::converged ? 0 : 3;
}

int sweep_command(const CommonArgs& args, const std::string& waveform_path, double offset_min,
                  double offset_max, int points) {
  grape::ProblemFile pf = grape::ProblemFile::parse_file(args.problem_path);
  grape::SweepSpec sweep;
  if (points > 0) {
    sweep = {offset_min, offset_max, points};
  } else if (pf.sweep && pf.sweep->points > 0) {
    sweep = *pf.sweep;
  } else {
    throw std::runtime_error("no sweep grid: give --points or a [sweep] section");
  }

  grape::PulseSequence pulse;
  if (!waveform_path.empty()) {
    pulse = load_waveform(waveform_path);
  } else {
    // No waveform supplied: optimize one first, honoring any overrides.
    const grape::RunResult run = grape::run_problem(pf, args.out_dir, to_overrides(args));
    pulse = run.optimize.pulse;
  }

  const std::vector<double> grid = sweep.grid();
  const std::vector<double> sz =
      grape::sweep_offsets(pulse, pf.dt, grid, pf.method.expm, args.threads);
  std::filesystem::create_directories(args.out_dir);
  const std::string path = (std::filesystem::path(args.out_dir) / "profile.csv").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  grape::write_profile(out, grid, sz);
  std::cout << "wrote " << path << " (" << grid.size() << " offsets)\n";
  return 0;
}

int gradcheck_command(const CommonArgs& args, const std::string& method_a,
                      const std::string& method_b) {
  const grape::ProblemFile pf = grape::ProblemFile::parse_file(args.problem_path);
  grape::GradientMethod ma = pf.method, mb = pf.method;
  ma.kind = grape::gradient_kind_from_string(method_a);
  mb.kind = grape::gradient_kind_from_string(method_b);
  const grape::GradCheckReport report = grape::gradient_check(pf, ma, mb, args.threads);

  std::cout << "gradient comparison: " << method_a << " vs " << method_b << '\n'
            << "  fidelity at test pulse: " << grape::format_double(report.fidelity) << '\n'
            << "  max |dev|:  " << grape::format_double(report.max_abs_dev) << '\n'
            << "  mean |dev|: " << grape::format_double(report.mean_abs_dev) << '\n'
            << "  max |dev| / max |grad|: " << grape::format_double(report.max_rel_dev) << '\n'
            << "first-order error vs step length:\n";
  for (std::size_t i = 0; i < report.slope_dts.size(); ++i)
    std::cout << "  dt = " << grape::format_double(report.slope_dts[i])
              << " s  ->  " << grape::format_double(report.slope_errors[i]) << '\n';
  std::cout << "  log-log slope: " << grape::format_double(report.first_order_slope) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GRAPE pulse-design toolkit"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args, check_args;
  std::string waveform_path, method_a = "series_exact", method_b = "eigen_exact";
  double offset_min = 0.0, offset_max = 0.0;
  int points = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "optimize a pulse and write result tables");
  add_common_flags(run_cmd, run_args, true);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "offset-sweep inversion profile of a waveform");
  add_common_flags(sweep_cmd, sweep_args, true);
  sweep_cmd->add_option("--waveform", waveform_path, "waveform.csv from a previous run");
  sweep_cmd->add_option("--offset-min", offset_min, "sweep start (Hz)");
  sweep_cmd->add_option("--offset-max", offset_max, "sweep end (Hz)");
  sweep_cmd->add_option("--points", points, "number of sweep offsets");

  CLI::App* check_cmd = app.add_subcommand("gradcheck", "compare two gradient methods");
  add_common_flags(check_cmd, check_args, false);
  check_cmd->add_option("--method-a", method_a, "first gradient method");
  check_cmd->add_option("--method-b", method_b, "second gradient method");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_command(run_args);
    if (sweep_cmd->parsed())
      return sweep_command(sweep_args, waveform_path, offset_min, offset_max, points);
    if (check_cmd->parsed()) return gradcheck_command(check_args, method_a, method_b);
  } catch (const grape::ProblemFileError& err) {
    std::cerr << "problem file error: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
