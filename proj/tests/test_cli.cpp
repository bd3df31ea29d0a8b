#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hjadj");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = hjadj::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

class CliTest : public ::testing::Test {
protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() / ("hjadj_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string out(const std::string &sub = "") const { return (dir / sub).string(); }
};

} // namespace

TEST_F(CliTest, Version) {
  const Outcome r = invoke({"version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(hjadj::kVersion), std::string::npos);
}

TEST_F(CliTest, CheckQuarticPrintsMarginAndPasses) {
  const Outcome r = invoke({"check", "--model", "quartic1d", "--gamma", "2", "--delta", "2", "--out", out()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("margin min = 2"), std::string::npos);
  EXPECT_NE(r.out.find("PASS H3"), std::string::npos);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(CliTest, CheckFailureExitsThree) {
  const Outcome r = invoke({"check", "--model", "quartic1d", "--gamma", "2", "--delta", "3"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("FAIL H3"), std::string::npos);
}

TEST_F(CliTest, CheckSkipsSupersolutionOutsideGammaRange) {
  const Outcome r = invoke({"check", "--model", "quartic1d", "--gamma", "3", "--delta", "0.5", "--eps", "0.1"});
  EXPECT_NE(r.out.find("SKIP supersolution"), std::string::npos) << r.out << r.err;
}

TEST_F(CliTest, SolveLaplaceClosedForm) {
  const Outcome r = invoke({"solve", "--problem", "dirichlet", "--model", "none", "--forcing", "1", "--eps", "0.1",
                     "--closed-form", "laplace_unit", "--n", "129", "--out", out()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("max_abs_diff_vs_closed_form: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LE(std::stod(r.out.substr(pos + 29)), 1e-10);
  EXPECT_TRUE(fs::exists(dir / "u.csv"));
  const std::string csv = slurp(dir / "u.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,value");
}

TEST_F(CliTest, SweepWritesArtifactsAndPasses) {
  const Outcome r = invoke({"sweep", "--problem", "dirichlet", "--model", "eikonal", "--eps", "0.2,0.1,0.05,0.025,0.0125",
                     "--n", "1001", "--out", out()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("\"slope\""), std::string::npos);
  for (const char *f : {"sweep.csv", "rate.json", "sweep.svg"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(slurp(dir / "sweep.svg").find("source: sweep.csv"), std::string::npos);
}

TEST_F(CliTest, SweepFailsBelowMinimumSlope) {
  const Outcome r = invoke({"sweep", "--problem", "dirichlet", "--model", "eikonal", "--n", "401", "--min-slope", "5",
                     "--out", out()});
  EXPECT_EQ(r.code, 3);
}

TEST_F(CliTest, SweepOutputIsDeterministicAcrossWorkerCounts) {
  const std::vector<std::string> base{"sweep", "--problem", "stationary", "--model", "eikonal", "--forcing", "triangle",
                                      "--eps", "0.1,0.05,0.025,0.0125", "--n", "256", "--min-slope", "0"};
  auto with = [&](const std::string &sub, const std::string &jobs) {
    auto args = base;
    args.insert(args.end(), {"--out", out(sub), "--jobs", jobs});
    return invoke(args).code;
  };
  ASSERT_EQ(with("a", "1"), 0);
  ASSERT_EQ(with("b", "4"), 0);
  for (const char *f : {"sweep.csv", "rate.json", "sweep.svg"}) EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST_F(CliTest, AdjointWritesSlicesAndMass) {
  const Outcome r = invoke({"adjoint", "--problem", "stationary", "--model", "eikonal", "--forcing", "triangle", "--eps", "0.05",
                     "--n", "256", "--slices", "3", "--out", out()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  for (const char *f : {"mass.csv", "sigma_0.csv", "sigma_1.csv", "sigma_2.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(slurp(dir / "mass.csv").substr(0, 7), "t,mass\n");
  const Outcome e = invoke({"adjoint", "--problem", "dirichlet", "--model", "eikonal", "--eps", "0.05", "--n", "401", "--out", out()});
  EXPECT_EQ(e.code, 0) << e.out << e.err;
  EXPECT_NE(e.out.find("boundary flux = -1"), std::string::npos);
}

TEST_F(CliTest, HbarTableWithKnownValue) {
  const Outcome r = invoke({"hbar", "--model", "quadratic_potential", "--potential", "1:1", "--P", "2,3", "--n", "256",
                     "--hbar", "2.0637954228622051", "--out", out()});
  EXPECT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(dir / "hbar.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "P1,theta,estimate,error_vs_oracle");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
  EXPECT_TRUE(fs::exists(dir / "hbar.svg"));
}

TEST_F(CliTest, HbarTwoDimensionalGrid) {
  const Outcome r = invoke({"hbar", "--model", "quadratic_potential", "--dim", "2", "--n", "16", "--P", "0,1", "--P2", "0,1",
                     "--theta", "0.4,0.2", "--hbar", "0", "--out", out()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir / "hbar_grid.csv").substr(0, 18), "P1,P2,estimate\n0,0");
}

TEST_F(CliTest, HbarOracleRejectionExitsThree) {
  const Outcome r = invoke({"hbar", "--model", "quadratic_potential", "--potential", "1:1", "--P", "2", "--n", "128",
                     "--out", out()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("fit rejected"), std::string::npos);
}

TEST_F(CliTest, InvalidConfigurationExitsOne) {
  EXPECT_EQ(invoke({"solve", "--model", "nope"}).code, 1);
  EXPECT_EQ(invoke({"solve", "--bogus"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
  EXPECT_EQ(invoke({"sweep", "--eps", "0.1,0.2,0.05,0.01"}).code, 1);
  EXPECT_EQ(invoke({"solve", "--eps", "-1"}).code, 1);
  EXPECT_EQ(invoke({"solve", "--problem", "stationary", "--closed-form", "drift"}).code, 1);
  EXPECT_EQ(invoke({"solve", "--potential", "1-2"}).code, 1);
}

TEST_F(CliTest, NonConvergenceExitsTwo) {
  const Outcome r = invoke({"solve", "--problem", "dirichlet", "--model", "eikonal", "--eps", "0.01", "--max-iters", "1",
                     "--out", out()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("did not converge"), std::string::npos);
}

TEST_F(CliTest, ConfigFileWithOverrides) {
  const fs::path ini = dir / "run.ini";
  std::ofstream(ini) << "out = " << out("cfg") << "\n[solve]\nproblem = dirichlet\nmodel = none\nforcing = 1\n"
                     << "closed-form = laplace_unit\nn = 65\neps = 0.5\n";
  const Outcome r = invoke({"solve", "--config", ini.string(), "--eps", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max_u: 1.25"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "cfg" / "u.csv"));
}

TEST_F(CliTest, EnvironmentOutputFallback) {
  ::setenv("HJADJ_OUT_DIR", out("env").c_str(), 1);
  const Outcome r = invoke({"solve", "--problem", "dirichlet", "--model", "eikonal", "--eps", "0.2", "--n", "101"});
  ::unsetenv("HJADJ_OUT_DIR");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "env" / "u.csv"));
}

TEST_F(CliTest, ExecutableExitCodes) {
  const std::string bin = HJADJ_BINARY;
  auto status = [&](const std::string &args) {
    const int s = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status("version"), 0);
  EXPECT_EQ(status("solve --model nope"), 1);
  EXPECT_EQ(status("check --model quartic1d --gamma 2 --delta 3"), 3);
}
