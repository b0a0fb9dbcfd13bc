#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code{-1};
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(EXOLIM_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "exolim_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, KernelCommandSucceeds) {
  const auto r = run("--format json kernel --kind sp --lambda 1e-4 --lambda 2e-4");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j["rows"].size(), 2u);
  EXPECT_GT(j["rows"][0]["K_T"].get<double>(), 0.0);
  EXPECT_EQ(j["provenance"]["command"], "kernel");
}

TEST(Cli, FieldsWritesTheDocumentedColumns) {
  const auto cfg = scratch("small.json");
  std::ofstream(cfg) << R"({"pair_count": 65536, "time_samples": 16})";
  const auto out = scratch("series.csv");
  ASSERT_EQ(run("--config " + cfg.string() + " fields --kind av --lambda 1e-4 --g 1e-20 --out " + out.string()).code, 0);
  const auto text = read_file(out);
  EXPECT_NE(text.find("\nt_s,B_T,mc_err_T\n"), std::string::npos);
  EXPECT_NE(text.find("\"pair_count\":65536"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const auto cfg = scratch("bad.json");
  std::ofstream(cfg) << R"({"d0": "-1um"})";
  EXPECT_EQ(run("--config " + cfg.string() + " kernel --lambda 1e-4").code, 2);
  std::ofstream(cfg) << R"({"unknown": 1})";
  EXPECT_EQ(run("--config " + cfg.string() + " kernel --lambda 1e-4").code, 2);
  std::ofstream(cfg) << "{ not json";
  EXPECT_EQ(run("--config " + cfg.string() + " kernel --lambda 1e-4").code, 2);
  EXPECT_EQ(run("kernel --lambda -1").code, 2);
  EXPECT_EQ(run("nonsense").code, 2);
  EXPECT_EQ(run("kernel --kind xx --lambda 1e-4").code, 2);
}

TEST(Cli, SimulateReportsBothChannels) {
  const auto r = run("--format json simulate --hours 0.01");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GT(j["B_AV"]["stderr"].get<double>(), 0.0);
  EXPECT_GT(j["B_SP"]["stderr"].get<double>(), 0.0);
}

TEST(Cli, ShippedConfigLoads) {
  const auto r = run("--config " + std::string(EXOLIM_SOURCE_DIR) + "/configs/default.json --format json kernel --lambda 1e-4");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["provenance"]["config"]["d0_m"].get<double>(), 9.3e-6);
}

TEST(Cli, LimitsCurveHasTheDocumentedColumns) {
  const auto cfg = scratch("limits.json");
  std::ofstream(cfg) << R"({"pair_count": 16384, "time_samples": 16, "sensitivity_pair_count": 4096,
    "budget_rows": [{"name": "Calib", "kind": "calibration", "mean": "2.29e5V/T", "sigma": "0.03e5V/T"}]})";
  const auto out = scratch("curve.csv");
  ASSERT_EQ(run("--config " + cfg.string() + " limits --kind sp --lmin 1e-5 --lmax 1e-4 --per-decade 2 --out " +
                out.string())
                .code,
            0);
  const auto text = read_file(out);
  EXPECT_NE(text.find("\nlambda_m,mass_eV,bound,g_hat,sigma_stat,syst_lo,syst_hi,CL,status\n"), std::string::npos);
}
