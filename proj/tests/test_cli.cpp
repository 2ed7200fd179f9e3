#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "entangle/boundary.hpp"
#include "entangle/state_file.hpp"
#include "oracles.hpp"

using namespace entangle;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "entangle_boundary");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("entangle_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write_state(const std::string& name, const Mat4& m) {
    StateFile f;
    f.rho = DensityMatrix::from_matrix(m);
    save_state(path(name), f);
    return path(name);
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

Mat4 bell_diagonal_q(double q0) {
  const double r = (1.0 - q0) / 3.0;
  return bell_diagonal(Real4(q0, r, r, r));
}

}  // namespace

TEST_F(CliTest, GenWritesValidBoundaryStates) {
  const auto r = run_cli({"gen", "--seed", "42", "--count", "10", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(read_text(path("g/manifest.json")));
  EXPECT_EQ(m["format_version"], "entangle-manifest/1");
  EXPECT_EQ(m["seed"], 42);
  ASSERT_EQ(m["states"].size(), 10u);
  for (const auto& s : m["states"]) {
    const auto f = load_state(path("g/" + s["file"].get<std::string>()));
    EXPECT_LE(std::abs(concurrence_signed(f.rho)), 1e-9);
    EXPECT_LE(std::abs(oracles::concurrence_wootters(f.rho.mat())), 1e-7);
    EXPECT_EQ(f.metadata.seed, s["seed"].get<std::uint64_t>());
    EXPECT_LE(s["condition_a"].get<double>(), 10.0 * (1 + 1e-12));
    EXPECT_DOUBLE_EQ(s["p"][0].get<double>(), 0.5);
    for (int k = 1; k < 4; ++k) {
      EXPECT_GT(s["p"][k].get<double>(), 1e-3);
      EXPECT_LT(s["p"][k].get<double>(), 0.5 - 1e-3);
    }
  }
}

TEST_F(CliTest, GenDeterministic) {
  ASSERT_EQ(run_cli({"gen", "--seed", "7", "--count", "5", "--out", path("a")}).code, 0);
  ASSERT_EQ(run_cli({"gen", "--seed", "7", "--count", "5", "--out", path("b"), "--jobs", "4"}).code, 0);
  EXPECT_EQ(read_text(path("a/manifest.json")), read_text(path("b/manifest.json")));
  EXPECT_EQ(read_text(path("a/state_0003.json")), read_text(path("b/state_0003.json")));
  ASSERT_EQ(run_cli({"gen", "--seed", "8", "--count", "5", "--out", path("c")}).code, 0);
  EXPECT_NE(read_text(path("a/manifest.json")), read_text(path("c/manifest.json")));
}

TEST_F(CliTest, GenUnitConditionIsBellDiagonal) {
  ASSERT_EQ(run_cli({"gen", "--seed", "3", "--count", "5", "--max-condition", "1", "--out", path("g")}).code, 0);
  for (int i = 0; i < 5; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "g/state_%04d.json", i);
    const auto bs = boundary_from_density(load_state(path(name)).rho);
    EXPECT_LE((bs.gram.q - Mat4::Identity()).norm(), 1e-10);
  }
}

TEST_F(CliTest, GenLimitStates) {
  const auto r = run_cli({"gen", "--seed", "1", "--count", "4", "--limit", "1e-6", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(read_text(path("g/manifest.json")));
  EXPECT_DOUBLE_EQ(m["limit"].get<double>(), 1e-6);
  for (const auto& s : m["states"]) {
    double smallest = 1.0;
    for (int k = 1; k < 4; ++k) smallest = std::min(smallest, s["p"][k].get<double>());
    EXPECT_NEAR(smallest, 1e-6, 1e-12);
  }
}

TEST_F(CliTest, GenUsageErrors) {
  EXPECT_EQ(run_cli({"gen", "--count", "0", "--out", path("g")}).code, 2);
  EXPECT_EQ(run_cli({"gen", "--max-condition", "0.5", "--out", path("g")}).code, 2);
  EXPECT_EQ(run_cli({"gen", "--limit", "0.1", "--out", path("g")}).code, 2);
  EXPECT_EQ(run_cli({"gen"}).code, 2);
  EXPECT_EQ(run_cli({"gen", "--out", path("g"), "--seed", "abc"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, RayBellDiagonal) {
  const std::string s = write_state("bell.json", bell_diagonal(Real4(0.5, 0.2, 0.17, 0.13)));
  const auto r = run_cli({"ray", s, "--x", "0,0.5,1,1.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find('\r'), std::string::npos);
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "s_exact", "c_signed", "min_eig", "residual_max", "status"}));
  EXPECT_EQ(std::stod(rows[1][1]), 0.0);
  EXPECT_EQ(rows[1][5], "ok");
  EXPECT_NEAR(std::stod(rows[3][2]), 1.0, 1e-9);
  EXPECT_EQ(rows[3][5], "ok");
  EXPECT_EQ(rows[4][5], "not_positive");
  EXPECT_LT(std::stod(rows[4][3]), 0.0);
  EXPECT_TRUE(rows[4][1].empty());
}

TEST_F(CliTest, RaySweepMonotone) {
  ASSERT_EQ(run_cli({"gen", "--seed", "5", "--count", "1", "--out", path("g")}).code, 0);
  std::string fr;
  for (int k = 0; k < 50; ++k) fr += (k ? "," : "") + format_real(0.9 * k / 49.0);
  const auto r = run_cli({"ray", path("g/state_0000.json"), "--fraction", fr, "--out", path("ray.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = parse_csv(read_text(path("ray.csv")));
  ASSERT_EQ(rows.size(), 51u);
  double prev = -1.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k][5], "ok");
    const double s = std::stod(rows[k][1]);
    if (k == 1) EXPECT_EQ(s, 0.0);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST_F(CliTest, RayRejectsEntangledState) {
  const std::string s = write_state("ent.json", bell_diagonal_q(0.75));
  EXPECT_EQ(run_cli({"ray", s, "--x", "0.1"}).code, 2);
  const std::string b = write_state("b.json", bell_diagonal(Real4(0.5, 0.2, 0.17, 0.13)));
  EXPECT_EQ(run_cli({"ray", b}).code, 2);
}

TEST_F(CliTest, VerifyManifest) {
  ASSERT_EQ(run_cli({"gen", "--seed", "11", "--count", "100", "--out", path("g")}).code, 0);
  const auto r = run_cli({"verify", path("g/manifest.json"), "--jobs", "4", "--out", path("v.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(read_text(path("v.json")));
  EXPECT_EQ(rep["summary"]["passed"], 100);
  for (const auto& rec : rep["records"]) {
    EXPECT_EQ(rec["w_rank"], 12);
    EXPECT_EQ(rec["residuals"].size(), 9u);
    EXPECT_EQ(rec["tol"], 1e-8);
  }
}

TEST_F(CliTest, VerifyOutputIndependentOfJobs) {
  ASSERT_EQ(run_cli({"gen", "--seed", "12", "--count", "8", "--out", path("g")}).code, 0);
  const auto a = run_cli({"verify", path("g/manifest.json"), "--jobs", "1"});
  const auto b = run_cli({"verify", path("g/manifest.json"), "--jobs", "3"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, VerifyCorruptedTrace) {
  ASSERT_EQ(run_cli({"gen", "--seed", "13", "--count", "1", "--out", path("g")}).code, 0);
  json j = json::parse(read_text(path("g/state_0000.json")));
  j["matrix"][0][0][0] = j["matrix"][0][0][0].get<double>() + 0.01;
  write_text(path("g/state_0000.json"), j.dump());
  EXPECT_EQ(run_cli({"verify", path("g/state_0000.json")}).code, 2);
  EXPECT_EQ(run_cli({"verify", path("g/manifest.json")}).code, 2);
  EXPECT_EQ(run_cli({"verify", path("missing.json")}).code, 2);
}

TEST_F(CliTest, VerifyFailureExitsOne) {
  const std::string s = write_state("bell.json", bell_diagonal(Real4(0.5, 0.2, 0.17, 0.13)));
  EXPECT_EQ(run_cli({"verify", s}).code, 0);
  const auto r = run_cli({"verify", write_state("ent.json", bell_diagonal_q(0.75))});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("BoundaryViolation"), std::string::npos);
}

TEST_F(CliTest, ReeBellDiagonal) {
  const std::string s = write_state("w.json", bell_diagonal_q(0.75));
  const auto r = run_cli({"ree", s, "--gap", "1e-6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_NEAR(rep["e_r"].get<double>(), 0.130812, 1e-4);
  EXPECT_EQ(rep["units"], "nats");
  EXPECT_TRUE(rep["converged"].get<bool>());
  const auto star = state_from_json(rep["sigma_star"]);
  EXPECT_NEAR(relative_entropy(DensityMatrix::from_matrix(bell_diagonal_q(0.75)), star.rho),
              rep["e_r"].get<double>(), 1e-12);

  const json bits = json::parse(run_cli({"ree", s, "--bits"}).out);
  EXPECT_EQ(bits["units"], "bits");
  EXPECT_NEAR(bits["e_r"].get<double>(), rep["e_r"].get<double>() / std::log(2.0), 1e-12);
}

TEST_F(CliTest, ReeSeparableState) {
  const std::string s = write_state("mm.json", Mat4::Identity() / 4.0);
  const auto r = run_cli({"ree", s, "--out", path("r.json")});
  ASSERT_EQ(r.code, 0);
  EXPECT_LE(json::parse(read_text(path("r.json")))["e_r"].get<double>(), 1e-6);
}

TEST_F(CliTest, ReeStrictIterationLimit) {
  const std::string s = write_state("w.json", bell_diagonal_q(0.9));
  const auto loose = run_cli({"ree", s, "--max-iter", "1", "--gap", "1e-14"});
  EXPECT_EQ(loose.code, 0);
  EXPECT_NE(loose.err.find("warning"), std::string::npos);
  EXPECT_EQ(run_cli({"ree", s, "--max-iter", "1", "--gap", "1e-14", "--strict"}).code, 1);
}

TEST_F(CliTest, ReeMatchesRayEntropy) {
  ASSERT_EQ(run_cli({"gen", "--seed", "14", "--count", "1", "--out", path("g")}).code, 0);
  const auto bs = boundary_from_density(load_state(path("g/state_0000.json")).rho);
  const auto nv = normal_vector(bs);
  const double x = 0.4 * x_max_psd(bs, nv);
  const auto rp = entangled_ray(bs, nv, x);
  const std::string s = write_state("rho.json", rp.rho.mat());
  const auto ray = parse_csv(run_cli({"ray", path("g/state_0000.json"), "--x", format_real(x)}).out);
  const auto ree = json::parse(run_cli({"ree", s}).out);
  EXPECT_NEAR(ree["e_r"].get<double>(), std::stod(ray[1][1]), 1e-4);
}

TEST_F(CliTest, Validate) {
  ASSERT_EQ(run_cli({"gen", "--seed", "15", "--count", "6", "--out", path("g")}).code, 0);
  const auto a = run_cli({"validate", path("g/manifest.json"), "--seed", "3", "--jobs", "1"});
  ASSERT_EQ(a.code, 0) << a.err;
  const json rep = json::parse(a.out);
  EXPECT_EQ(rep["summary"]["pass_rate"], 1.0);
  const auto b = run_cli({"validate", path("g/manifest.json"), "--seed", "3", "--jobs", "4"});
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, ValidateSmallFractionQuadraticColumn) {
  ASSERT_EQ(run_cli({"gen", "--seed", "16", "--count", "3", "--out", path("g")}).code, 0);
  const auto r = run_cli({"validate", path("g/manifest.json"), "--fraction", "1e-3"});
  const json rep = json::parse(r.out);
  for (const auto& rec : rep["records"])
    EXPECT_LE(rec["quadratic_error"].get<double>(), 1e-6 + 1e-6);
}

TEST_F(CliTest, ValidateUsageErrors) {
  ASSERT_EQ(run_cli({"gen", "--seed", "17", "--count", "1", "--out", path("g")}).code, 0);
  EXPECT_EQ(run_cli({"validate", path("g/manifest.json"), "--fraction", "0.95"}).code, 2);
  EXPECT_EQ(run_cli({"validate", path("g/state_0000.json")}).code, 2);
}

TEST_F(CliTest, JobsFromEnvironment) {
  ASSERT_EQ(run_cli({"gen", "--seed", "18", "--count", "2", "--out", path("g")}).code, 0);
  ::setenv("ENTANGLE_BOUNDARY_JOBS", "0", 1);
  const int bad = run_cli({"verify", path("g/manifest.json")}).code;
  ::setenv("ENTANGLE_BOUNDARY_JOBS", "2", 1);
  const int good = run_cli({"verify", path("g/manifest.json")}).code;
  ::unsetenv("ENTANGLE_BOUNDARY_JOBS");
  EXPECT_EQ(bad, 2);
  EXPECT_EQ(good, 0);
}

TEST_F(CliTest, ExecutableExitCodes) {
  const std::string exe = ENTANGLE_BOUNDARY_EXE;
  const std::string quiet = " > /dev/null 2>&1";
  auto status = [&](const std::string& args) {
    const int s = std::system((exe + " " + args + quiet).c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status("gen --seed 1 --count 2 --out " + path("g")), 0);
  EXPECT_EQ(status("verify " + path("g/manifest.json")), 0);
  EXPECT_EQ(status("verify " + path("nothing.json")), 2);
  EXPECT_EQ(status("--bogus"), 2);
}

TEST(CaseSeed, StableAndDistinct) {
  EXPECT_EQ(cli::case_seed(42, 3), cli::case_seed(42, 3));
  EXPECT_NE(cli::case_seed(42, 3), cli::case_seed(42, 4));
  EXPECT_NE(cli::case_seed(42, 3), cli::case_seed(43, 3));
}
