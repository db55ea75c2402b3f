#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grape/control_problem.hpp"
#include "grape/gradient.hpp"
#include "grape/liouville.hpp"
#include "grape/optimizer.hpp"
#include "grape/spin_system.hpp"

namespace grape {

/// Problem definition parse/validation failure, carrying file and line
/// context.
class ProblemFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Offset-sweep grid attached to a problem definition.
struct SweepSpec {
  double min_hz = 0.0;
  double max_hz = 0.0;
  int points = 0;

  std::vector<double> grid() const {
    std::vector<double> offsets(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
      offsets[static_cast<std::size_t>(i)] =
          points == 1 ? min_hz : min_hz + (max_hz - min_hz) * i / (points - 1);
    return offsets;
  }
};

/// Parsed sectioned key-value problem definition. Sections: [system],
/// [pulse], [transfer], [method], [optimizer] and optional [sweep].
struct ProblemFile {
  SpinChainSpec system;
  double spectrometer_mhz = 0.0;
  double relaxation_rate = 0.0;

  int n_steps = 0;
  double dt = 0.0;
  double amplitude_bound_hz = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;

  std::string initial_state = "sum-Sz";
  std::string target_state = "minus-sum-Sz";

  GradientMethod method;
  OptimizerConfig optimizer;
  std::optional<SweepSpec> sweep;

  static ProblemFile parse(std::istream& in, const std::string& name);
  static ProblemFile parse_file(const std::string& path);

  /// Resolve a transfer-state name against the spin system.
  Vector resolve_state(const std::string& name) const;

  /// Assemble the runnable control problem (generators, lifted Liouvillians,
  /// normalized endpoint states, bounds).
  ControlProblem build_problem(double dt_override = 0.0) const;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double_field(const std::string& value, const std::string& field, int line) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ProblemFileError("line " + std::to_string(line) + ": field '" + field +
                           "' is not a number: '" + v + "'");
  return out;
}

inline long long parse_int_field(const std::string& value, const std::string& field, int line) {
  const std::string v = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ProblemFileError("line " + std::to_string(line) + ": field '" + field +
                           "' is not an integer: '" + v + "'");
  return out;
}

inline std::vector<double> parse_double_list(const std::string& value, const std::string& field,
                                             int line) {
  std::string v = value;
  for (char& c : v)
    if (c == ',') c = ' ';
  std::istringstream stream(v);
  std::vector<double> out;
  std::string token;
  while (stream >> token) out.push_back(parse_double_field(token, field, line));
  return out;
}

}  // namespace detail

inline ProblemFile ProblemFile::parse(std::istream& in, const std::string& name) {
  ProblemFile pf;
  std::string section;
  std::string raw;
  int line_no = 0;
  bool saw_system = false, saw_pulse = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ProblemFileError(name + ": line " + std::to_string(line_no) +
                               ": malformed section header '" + raw + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "system" && section != "pulse" && section != "transfer" &&
          section != "method" && section != "optimizer" && section != "sweep")
        throw ProblemFileError(name + ": line " + std::to_string(line_no) +
                               ": unknown section '" + section + "'");
      if (section == "system") saw_system = true;
      if (section == "pulse") saw_pulse = true;
      if (section == "sweep" && !pf.sweep) pf.sweep = SweepSpec{};
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ProblemFileError(name + ": line " + std::to_string(line_no) +
                             ": expected 'key = value', got '" + raw + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty())
      throw ProblemFileError(name + ": line " + std::to_string(line_no) + ": key '" + key +
                             "' appears before any [section]");

    try {
      if (section == "system") {
        if (key == "n_spins")
          pf.system.n_spins = static_cast<int>(detail::parse_int_field(value, key, line_no));
        else if (key == "offsets")
          pf.system.offsets = detail::parse_double_list(value, key, line_no);
        else if (key == "offset_unit") {
          if (value == "hz")
            pf.system.offset_unit = OffsetUnit::hz;
          else if (value == "ppm")
            pf.system.offset_unit = OffsetUnit::ppm;
          else
            throw ProblemFileError("offset_unit must be 'hz' or 'ppm'");
        } else if (key == "j_hz")
          pf.system.j_hz = detail::parse_double_field(value, key, line_no);
        else if (key == "spectrometer_mhz")
          pf.spectrometer_mhz = detail::parse_double_field(value, key, line_no);
        else if (key == "relaxation_rate")
          pf.relaxation_rate = detail::parse_double_field(value, key, line_no);
        else
          throw ProblemFileError("unknown key '" + key + "' in [system]");
      } else if (section == "pulse") {
        if (key == "n_steps")
          pf.n_steps = static_cast<int>(detail::parse_int_field(value, key, line_no));
        else if (key == "dt")
          pf.dt = detail::parse_double_field(value, key, line_no);
        else if (key == "amplitude_bound") {
          pf.amplitude_bound_hz = value == "inf" || value == "none"
                                      ? std::numeric_limits<double>::infinity()
                                      : detail::parse_double_field(value, key, line_no);
        } else if (key == "seed")
          pf.seed = static_cast<std::uint64_t>(detail::parse_int_field(value, key, line_no));
        else
          throw ProblemFileError("unknown key '" + key + "' in [pulse]");
      } else if (section == "transfer") {
        if (key == "initial")
          pf.initial_state = value;
        else if (key == "target")
          pf.target_state = value;
        else
          throw ProblemFileError("unknown key '" + key + "' in [transfer]");
      } else if (section == "method") {
        if (key == "gradient")
          pf.method.kind = gradient_kind_from_string(value);
        else if (key == "taylor_tol")
          pf.method.expm.taylor_tol = detail::parse_double_field(value, key, line_no);
        else if (key == "scaling_threshold")
          pf.method.expm.scaling_threshold = detail::parse_double_field(value, key, line_no);
        else if (key == "max_terms")
          pf.method.expm.max_terms =
              static_cast<int>(detail::parse_int_field(value, key, line_no));
        else if (key == "fd_error_threshold")
          pf.method.fd_policy.error_threshold = detail::parse_double_field(value, key, line_no);
        else if (key == "fd_eps_a")
          pf.method.fd_policy.eps_a = detail::parse_double_field(value, key, line_no);
        else if (key == "fd_fprime_estimate")
          pf.method.fd_policy.fprime_estimate = detail::parse_double_field(value, key, line_no);
        else
          throw ProblemFileError("unknown key '" + key + "' in [method]");
      } else if (section == "optimizer") {
        if (key == "algorithm")
          pf.optimizer.algorithm = algorithm_from_string(value);
        else if (key == "max_iters")
          pf.optimizer.max_iters = static_cast<int>(detail::parse_int_field(value, key, line_no));
        else if (key == "grad_tol")
          pf.optimizer.grad_tol = detail::parse_double_field(value, key, line_no);
        else if (key == "fidelity_target")
          pf.optimizer.fidelity_target = detail::parse_double_field(value, key, line_no);
        else if (key == "lbfgs_memory")
          pf.optimizer.lbfgs_memory =
              static_cast<int>(detail::parse_int_field(value, key, line_no));
        else if (key == "wolfe_c1")
          pf.optimizer.wolfe_c1 = detail::parse_double_field(value, key, line_no);
        else if (key == "wolfe_c2")
          pf.optimizer.wolfe_c2 = detail::parse_double_field(value, key, line_no);
        else if (key == "line_search_max_evals")
          pf.optimizer.line_search_max_evals =
              static_cast<int>(detail::parse_int_field(value, key, line_no));
        else
          throw ProblemFileError("unknown key '" + key + "' in [optimizer]");
      } else if (section == "sweep") {
        if (!pf.sweep) pf.sweep = SweepSpec{};
        if (key == "offset_min")
          pf.sweep->min_hz = detail::parse_double_field(value, key, line_no);
        else if (key == "offset_max")
          pf.sweep->max_hz = detail::parse_double_field(value, key, line_no);
        else if (key == "points")
          pf.sweep->points = static_cast<int>(detail::parse_int_field(value, key, line_no));
        else
          throw ProblemFileError("unknown key '" + key + "' in [sweep]");
      }
    } catch (const ProblemFileError& err) {
      std::string what = err.what();
      if (what.rfind(name, 0) == 0) throw;  // already carries context
      throw ProblemFileError(name + ": line " + std::to_string(line_no) + ": " + what);
    }
  }

  // Whole-file validation with field names in every message.
  auto fail = [&](const std::string& msg) { throw ProblemFileError(name + ": " + msg); };
  if (!saw_system) fail("missing [system] section");
  if (!saw_pulse) fail("missing [pulse] section");
  if (pf.system.n_spins < 1) fail("system.n_spins must be >= 1");
  if (static_cast<int>(pf.system.offsets.size()) != pf.system.n_spins)
    fail("system.offsets must list exactly n_spins values");
  if (pf.system.offset_unit == OffsetUnit::ppm && !(pf.spectrometer_mhz > 0.0))
    fail("system.spectrometer_mhz must be positive when offsets are in ppm");
  if (pf.relaxation_rate < 0.0) fail("system.relaxation_rate must be >= 0");
  if (pf.n_steps < 1) fail("pulse.n_steps must be >= 1");
  if (!(pf.dt > 0.0)) fail("pulse.dt must be positive (seconds)");
  if (std::isnan(pf.amplitude_bound_hz) || pf.amplitude_bound_hz < 0.0)
    fail("pulse.amplitude_bound must be >= 0");
  if (pf.sweep) {
    if (pf.sweep->points < 0) fail("sweep.points must be >= 0");
    if (pf.sweep->points > 1 && !(pf.sweep->max_hz > pf.sweep->min_hz))
      fail("sweep.offset_max must exceed sweep.offset_min");
  }
  try {
    pf.optimizer.validate();
  } catch (const std::invalid_argument& err) {
    fail(std::string("optimizer: ") + err.what());
  }
  pf.system.b1_max_hz = pf.amplitude_bound_hz;
  pf.optimizer.seed = pf.seed;
  return pf;
}

inline ProblemFile ProblemFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProblemFileError("cannot open problem file '" + path + "'");
  return parse(in, path);
}

inline Vector ProblemFile::resolve_state(const std::string& state_name) const {
  const SpinOperators ops = spin_operators(system.n_spins);
  auto sum_of = [&](const std::vector<Matrix>& v) {
    Matrix total = Matrix::Zero(ops.hilbert_dim, ops.hilbert_dim);
    for (const Matrix& op : v) total += op;
    return total;
  };
  if (state_name == "sum-Sz") return vectorize(sum_of(ops.z));
  if (state_name == "minus-sum-Sz") return vectorize(Matrix(-sum_of(ops.z)));
  if (state_name == "sum-Sx") return vectorize(sum_of(ops.x));
  if (state_name == "minus-sum-Sx") return vectorize(Matrix(-sum_of(ops.x)));
  if (state_name.rfind("Sz@", 0) == 0 || state_name.rfind("Sx@", 0) == 0) {
    const long long idx = detail::parse_int_field(state_name.substr(3), "transfer state", 0);
    if (idx < 1 || idx > system.n_spins)
      throw ProblemFileError("transfer state '" + state_name + "': spin index out of range");
    const auto& bank = state_name[1] == 'z' ? ops.z : ops.x;
    return vectorize(bank[static_cast<std::size_t>(idx - 1)]);
  }
  if (state_name.rfind("explicit:", 0) == 0) {
    const std::vector<double> parts =
        detail::parse_double_list(state_name.substr(9), "explicit state", 0);
    const Eigen::Index d2 =
        static_cast<Eigen::Index>(ops.hilbert_dim) * static_cast<Eigen::Index>(ops.hilbert_dim);
    if (static_cast<Eigen::Index>(parts.size()) != 2 * d2)
      throw ProblemFileError("explicit state needs " + std::to_string(2 * d2) +
                             " numbers (re,im pairs), got " + std::to_string(parts.size()));
    Vector v(d2);
    for (Eigen::Index i = 0; i < d2; ++i)
      v(i) = Complex(parts[static_cast<std::size_t>(2 * i)],
                     parts[static_cast<std::size_t>(2 * i + 1)]);
    return v;
  }
  throw ProblemFileError("unknown transfer state '" + state_name +
                         "' (expected sum-Sz, minus-sum-Sz, sum-Sx, minus-sum-Sx, Sz@i, Sx@i or "
                         "explicit:...)");
}

inline ControlProblem ProblemFile::build_problem(double dt_override) const {
  HamiltonianSet hams = build_hamiltonians(system, spectrometer_mhz);
  Matrix relax;
  if (relaxation_rate > 0.0) relax = uniform_damping(hams.hilbert_dim(), relaxation_rate);
  const Vector rho0 = resolve_state(initial_state);
  const Vector sigma = resolve_state(target_state);
  std::vector<double> bounds;
  if (std::isfinite(amplitude_bound_hz))
    bounds.assign(hams.controls.size(), amplitude_bound_hz);
  return ControlProblem(std::move(hams), relax, rho0, sigma, n_steps,
                        dt_override > 0.0 ? dt_override : dt, std::move(bounds));
}

}  // namespace grape
