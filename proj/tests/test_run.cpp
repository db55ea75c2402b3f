#include "grape/run.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_support.hpp"

namespace grape {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in) << path;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

/// Small, fast problem definition used for the end-to-end checks.
const char* kToyProblem = R"(
[system]
n_spins = 2
offsets = -400, 400
j_hz = 20

[pulse]
n_steps = 8
dt = 1e-4
amplitude_bound = 2500
seed = 3

[transfer]
initial = sum-Sz
target = minus-sum-Sz

[method]
gradient = eigen_exact

[optimizer]
algorithm = lbfgs
max_iters = 30
fidelity_target = 0.98

[sweep]
offset_min = -1000
offset_max = 1000
points = 11
)";

ProblemFile toy_file() {
  std::istringstream in(kToyProblem);
  return ProblemFile::parse(in, "toy.grape");
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("grape_test_" + tag);
  fs::remove_all(dir);
  return dir;
}

TEST(FormatDouble, RoundTripsEveryValue) {
  testing::Rng rng(601);
  for (int trial = 0; trial < 500; ++trial) {
    const double value = std::ldexp(rng.sym(), static_cast<int>(rng.unit() * 60) - 30);
    const std::string text = format_double(value);
    EXPECT_EQ(std::strtod(text.c_str(), nullptr), value) << text;
  }
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(RunProblem, WritesAllTablesAndConverges) {
  const fs::path dir = temp_dir("run");
  const RunResult result = run_problem(toy_file(), dir.string());
  EXPECT_EQ(result.status, RunStatus::converged);
  EXPECT_GE(result.optimize.fidelity, 0.98);

  const std::string iterations = slurp(dir / "iterations.csv");
  const std::string waveform = slurp(dir / "waveform.csv");
  const std::string profile = slurp(dir / "profile.csv");
  EXPECT_EQ(count_lines(iterations), static_cast<int>(result.optimize.log.size()) + 1);
  EXPECT_EQ(count_lines(waveform), 8 + 1);
  EXPECT_EQ(count_lines(profile), 11 + 1);
  EXPECT_EQ(iterations.substr(0, iterations.find('\n')),
            "iteration,fidelity,grad_max_norm,step_length,evaluations");
  EXPECT_EQ(waveform.substr(0, waveform.find('\n')), "t_s,cx_hz,cy_hz");
  EXPECT_EQ(profile.substr(0, profile.find('\n')), "offset_hz,sz");
  fs::remove_all(dir);
}

TEST(RunProblem, RerunsAreByteIdenticalAcrossThreadCounts) {
  const fs::path dir_a = temp_dir("det_a"), dir_b = temp_dir("det_b"), dir_c = temp_dir("det_c");
  run_problem(toy_file(), dir_a.string());
  run_problem(toy_file(), dir_b.string());
  RunOverrides threaded;
  threaded.threads = 2;
  run_problem(toy_file(), dir_c.string(), threaded);
  for (const char* file : {"iterations.csv", "waveform.csv", "profile.csv"}) {
    EXPECT_EQ(slurp(dir_a / file), slurp(dir_b / file)) << file;
    EXPECT_EQ(slurp(dir_a / file), slurp(dir_c / file)) << file;
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST(RunProblem, OverridesApply) {
  const fs::path dir = temp_dir("override");
  RunOverrides ov;
  ov.algorithm = Algorithm::steepest;
  ov.max_iters = 2;
  ov.seed = 99;
  const RunResult result = run_problem(toy_file(), dir.string(), ov);
  EXPECT_LE(static_cast<int>(result.optimize.log.size()), 3);
  EXPECT_EQ(result.status, RunStatus::budget_exhausted);
  fs::remove_all(dir);
}

TEST(SweepOffsets, EmptyGridAndHardPiPulse) {
  EXPECT_TRUE(sweep_offsets(PulseSequence(1, 2), 1e-4, {}).empty());

  // Hard pi pulse: c_x = 2500 Hz for dt = 1/(2*2500) s inverts on resonance.
  PulseSequence pulse(1, 2);
  pulse.amplitudes(0, 0) = 2500.0;
  const double dt = 1.0 / (2.0 * 2500.0);
  const std::vector<double> sz = sweep_offsets(pulse, dt, {0.0, 25000.0});
  EXPECT_NEAR(sz[0], -1.0, 1e-9);
  EXPECT_GT(sz[1], -0.1);  // far off resonance the spin barely moves

  EXPECT_THROW(sweep_offsets(PulseSequence(1, 1), 1e-4, {0.0}), std::invalid_argument);
}

TEST(SweepOffsets, ThreadCountDoesNotChangeProfileBits) {
  const PulseSequence pulse(testing::random_real(12, 2, 611) * 1500.0);
  std::vector<double> grid;
  for (int i = 0; i <= 16; ++i) grid.push_back(-2000.0 + 250.0 * i);
  const std::vector<double> one = sweep_offsets(pulse, 1e-4, grid, {}, 1);
  const std::vector<double> two = sweep_offsets(pulse, 1e-4, grid, {}, 2);
  ASSERT_EQ(one.size(), two.size());
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(one[i], two[i]);
}

TEST(GradientCheck, SeriesVersusEigenAndSlope) {
  ProblemFile pf = toy_file();
  pf.n_steps = 6;
  const GradCheckReport report =
      gradient_check(pf, GradientMethod::series_exact(), GradientMethod::eigen_exact());
  EXPECT_LT(report.max_rel_dev, 1e-9);
  EXPECT_NEAR(report.first_order_slope, 2.0, 0.3);

  const GradCheckReport self =
      gradient_check(pf, GradientMethod::series_exact(), GradientMethod::series_exact());
  EXPECT_EQ(self.max_abs_dev, 0.0);
}

TEST(RunProblem, OptimizedPulseInvertsAtTheDesignOffsets) {
  // End-to-end regression: optimize the 3-spin broadband inversion, then
  // sweep an isolated spin. Inversion is essentially perfect at the design
  // offsets and degrades away from them.
  std::istringstream in(R"(
[system]
n_spins = 3
offsets = -1000, 0, 1000
j_hz = 20
[pulse]
n_steps = 50
dt = 1e-4
amplitude_bound = 2500
seed = 1
[transfer]
initial = sum-Sz
target = minus-sum-Sz
[method]
gradient = series_exact
[optimizer]
algorithm = lbfgs
max_iters = 200
fidelity_target = 0.99
)");
  const ProblemFile pf = ProblemFile::parse(in, "inversion3");
  const fs::path dir = temp_dir("profile");
  RunOverrides threaded;
  threaded.threads = 2;
  const RunResult result = run_problem(pf, dir.string(), threaded);
  ASSERT_EQ(result.status, RunStatus::converged);
  ASSERT_GE(result.optimize.fidelity, 0.99);

  const std::vector<double> design = {-1000.0, 0.0, 1000.0};
  const std::vector<double> sz_design =
      sweep_offsets(result.optimize.pulse, pf.dt, design, pf.method.expm, 2);
  for (std::size_t i = 0; i < design.size(); ++i)
    EXPECT_LE(sz_design[i], -0.95) << "offset " << design[i];

  const std::vector<double> sz_far =
      sweep_offsets(result.optimize.pulse, pf.dt, {-20000.0, 20000.0}, pf.method.expm, 2);
  for (double sz : sz_far) EXPECT_GT(sz, -0.5);  // far outside the band
  fs::remove_all(dir);
}

TEST(GradientCheck, FirstOrderDeviatesAtLargeDt) {
  ProblemFile pf = toy_file();
  pf.n_steps = 6;  // dt stays at 100 us
  const GradCheckReport report =
      gradient_check(pf, GradientMethod::first_order(), GradientMethod::series_exact());
  EXPECT_GT(report.max_rel_dev, 1e-3);
}

class CliTest : public ::testing::Test {
 protected:
  static int run_cli(const std::string& args) {
    const std::string cmd = std::string(GRAPE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  }

  void SetUp() override {
    dir_ = temp_dir("cli");
    fs::create_directories(dir_);
    problem_path_ = (dir_ / "toy.grape").string();
    std::ofstream out(problem_path_);
    out << kToyProblem;
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  std::string problem_path_;
};

TEST_F(CliTest, RunSweepGradcheckAndExitCodes) {
  const std::string out = (dir_ / "out").string();
  EXPECT_EQ(run_cli("run --problem " + problem_path_ + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "iterations.csv"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "waveform.csv"));
  EXPECT_TRUE(fs::exists(fs::path(out) / "profile.csv"));

  // Sweep an existing waveform.
  EXPECT_EQ(run_cli("sweep --problem " + problem_path_ + " --out " + out + " --waveform " + out +
                    "/waveform.csv --offset-min -500 --offset-max 500 --points 5"),
            0);
  EXPECT_EQ(run_cli("gradcheck --problem " + problem_path_ +
                    " --method-a series_exact --method-b eigen_exact"),
            0);

  // Budget exhaustion maps to exit code 3.
  EXPECT_EQ(run_cli("run --problem " + problem_path_ + " --out " + out +
                    " --algorithm steepest --max-iters 1"),
            3);

  // Parse failures map to exit code 1 with diagnostics.
  const std::string bad_path = (dir_ / "bad.grape").string();
  {
    std::ofstream bad(bad_path);
    bad << "[system]\nn_spins = 0\n";
  }
  EXPECT_EQ(run_cli("run --problem " + bad_path + " --out " + out), 1);
}

}  // namespace
}  // namespace grape
