#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mixsl/mixsl.hpp"

using namespace mixsl;
using namespace mixsl::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mixsl_app_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string s; std::getline(in, s);) out.push_back(s);
  return out;
}

std::string message(Scenario sc, const std::string& text) {
  try {
    parse_config(text, sc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

int cli(const std::string& args) {
  const std::string cmd = std::string(MIXSL_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunOptions quiet() {
  RunOptions o;
  o.quiet = true;
  return o;
}

}  // namespace

TEST(Config, EmptyTextGivesFullDefaults) {
  for (auto sc : {Scenario::kSteady, Scenario::kGcPersist, Scenario::kGcPerturb, Scenario::kDkItg})
    EXPECT_EQ(echo_config(parse_config("", sc)), echo_config(defaults(sc, "full")));
  const auto s = parse_config("", Scenario::kSteady);
  EXPECT_EQ(s.nx, 240u);
  EXPECT_EQ(s.ny, 440u);
  const auto d = parse_config("", Scenario::kDkItg);
  EXPECT_EQ(d.nx, 128u);
  EXPECT_EQ(d.nz, 32u);
  EXPECT_EQ(d.nv, 65u);
  EXPECT_EQ(parse_config("", Scenario::kGcPersist).dt, 0.001);
}

TEST(Config, OverrideIsEchoed) {
  const auto c = parse_config("epsilon = 0.2\n", Scenario::kGcPerturb);
  EXPECT_EQ(c.perturb.epsilon, 0.2);
  EXPECT_NE(echo_config(c).find("[perturb]\nepsilon = 0.2\n"), std::string::npos);
  const auto d = parse_config("[itg]\nepsilon = 1e-5\n[run]\npreset = desk\n", Scenario::kDkItg);
  EXPECT_EQ(d.itg.epsilon, 1e-5);
  EXPECT_EQ(d.nx, 32u);
}

TEST(Config, EchoParsesBack) {
  const auto c = parse_config("preset = desk\ncfl = 0.3\n", Scenario::kGcPerturb);
  EXPECT_EQ(echo_config(parse_config(echo_config(c), Scenario::kGcPerturb)), echo_config(c));
}

TEST(Config, MalformedLineIsNamed) {
  EXPECT_NE(message(Scenario::kSteady, "[run]\nthis line has no equals\n").find("line 2"), std::string::npos);
  EXPECT_NE(message(Scenario::kSteady, "[run\n").find("line 1"), std::string::npos);
}

TEST(Config, UnknownAndInvalidKeysRejected) {
  EXPECT_NE(message(Scenario::kSteady, "bogus = 1\n").find("bogus"), std::string::npos);
  EXPECT_NE(message(Scenario::kSteady, "[mesh]\nnw = 3\n").find("mesh.nw"), std::string::npos);
  EXPECT_FALSE(message(Scenario::kSteady, "epsilon = 0.1\n").empty());
  EXPECT_FALSE(message(Scenario::kSteady, "nx = 4\n").empty());
  EXPECT_FALSE(message(Scenario::kSteady, "dt = -1\n").empty());
  EXPECT_FALSE(message(Scenario::kDkItg, "method = rk\n").empty());
  EXPECT_FALSE(message(Scenario::kSteady, "preset = huge\n").empty());
  EXPECT_THROW(parse_scenario("vlasov"), ConfigError);
}

TEST(Run, SteadySmokeWritesSnapshotPair) {
  const auto dir = scratch("steady");
  auto c = parse_config("preset = desk\n", Scenario::kSteady);
  c.output_dir = dir.string();
  RunOptions o = quiet();
  o.emit_plot_data = true;
  run(c, o);
  const auto phi = read_snapshot((dir / "steady_phi_t0.fld").string());
  const auto rho = read_snapshot((dir / "steady_rho_t0.fld").string());
  EXPECT_EQ(phi.field.grid().n(0), 60u);
  EXPECT_EQ(phi.field.grid().n(1), 110u);
  EXPECT_LE(phi.meta.at("residuals").back().get<double>(), 1e-10);
  EXPECT_EQ(rho.name, "rho_bar0");
  EXPECT_EQ(lines(dir / "steady_phi_t0.dat").size(), 110u);
  EXPECT_TRUE(fs::exists(dir / "steady_config.ini"));
}

TEST(Run, OutputRootEnvironmentOverride) {
  const auto root = scratch("root");
  ::setenv(kOutputRootEnv, root.c_str(), 1);
  auto c = parse_config("nx = 30\nny = 55\n", Scenario::kSteady);
  c.output_dir = "/nonexistent/should/not/be/used";
  run(c, quiet());
  ::unsetenv(kOutputRootEnv);
  EXPECT_TRUE(fs::exists(root / "steady" / "steady_phi_t0.fld"));
}

TEST(Run, GcDeterministicAndResumeBitIdentical) {
  const std::string text = "nx = 30\nny = 55\ndt = 0.01\nt_end = 0.2\nsnapshot_interval = 10\ndiag_interval = 1\n";
  const auto a = scratch("gc_a"), b = scratch("gc_b"), r = scratch("gc_r");
  auto c = parse_config(text, Scenario::kGcPerturb);
  c.output_dir = a.string();
  run(c, quiet());
  c.output_dir = b.string();
  run(c, quiet());
  const auto full = lines(a / "gc-perturb.csv");
  EXPECT_EQ(full, lines(b / "gc-perturb.csv"));

  c.output_dir = r.string();
  c.resume = (a / "gc-perturb_t0.1.fld").string();
  run(c, quiet());
  const auto resumed = lines(r / "gc-perturb.csv");
  ASSERT_EQ(full.size(), 22u);
  ASSERT_EQ(resumed.size(), 12u);
  EXPECT_EQ(resumed[0], full[0]);
  for (std::size_t k = 1; k < resumed.size(); ++k) EXPECT_EQ(resumed[k], full[k + 10]) << k;
}

TEST(Run, DkMixedResumeBitIdentical) {
  const std::string text =
      "[mesh]\nnx = 12\nny = 12\nnz = 5\nnv = 9\n[run]\ndt = 1\nt_end = 16\nsnapshot_interval = 2\n"
      "diag_interval = 1\n"
      "[itg]\nepsilon = 1e-3\n";
  const auto a = scratch("dk_a"), r = scratch("dk_r");
  auto c = parse_config(text, Scenario::kDkItg);
  c.output_dir = a.string();
  const auto sum = run(c, quiet());
  EXPECT_LE(sum.switches, 1);
  const auto full = lines(a / "dk-itg.csv");
  c.output_dir = r.string();
  c.resume = (a / "dk-itg_t8.fld").string();
  run(c, quiet());
  const auto resumed = lines(r / "dk-itg.csv");
  ASSERT_GE(full.size(), resumed.size());
  const std::size_t skip = full.size() - resumed.size();
  for (std::size_t k = 1; k < resumed.size(); ++k) EXPECT_EQ(resumed[k], full[k + skip]) << k;
  EXPECT_EQ(resumed[1].substr(0, 2), "8,");
}

TEST(Run, ResumeRejectsForeignSnapshot) {
  const auto dir = scratch("foreign");
  auto s = parse_config("nx = 30\nny = 55\n", Scenario::kSteady);
  s.output_dir = dir.string();
  run(s, quiet());
  auto c = parse_config("nx = 30\nny = 55\nt_end = 0.01\ndt = 0.01\n", Scenario::kGcPersist);
  c.output_dir = dir.string();
  c.resume = (dir / "steady_phi_t0.fld").string();
  EXPECT_THROW(run(c, quiet()), ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  const auto good = dir / "good.ini", bad = dir / "bad.ini", newton = dir / "newton.ini";
  std::ofstream(good) << "nx = 30\nny = 55\noutput_dir = " << (dir / "out").string() << '\n';
  std::ofstream(bad) << "[run]\nnot a key value line\n";
  std::ofstream(newton) << "nx = 30\nny = 55\nnewton_max_iter = 1\noutput_dir = " << (dir / "out").string() << '\n';
  EXPECT_EQ(cli("steady --config " + good.string()), 0);
  EXPECT_EQ(cli("steady --config " + good.string() + " --threads 2 --emit-plot-data"), 0);
  EXPECT_EQ(cli("steady --config " + bad.string()), 2);
  EXPECT_EQ(cli("tokamak --config " + good.string()), 2);
  EXPECT_EQ(cli("steady --config " + (dir / "missing.ini").string()), 4);
  EXPECT_EQ(cli("gc-persist --config " + newton.string()), 3);
  EXPECT_EQ(cli("steady"), 1);
}
