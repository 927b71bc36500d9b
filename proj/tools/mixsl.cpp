#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mixsl/mixsl.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kSolver = 3, kIo = 4 };

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mixsl::IoError("cannot read config file: " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"mixed semi-Lagrangian / finite-difference plasma runs"};
  std::string scenario, config_path;
  int threads = 0;
  bool plot = false;
  cli.add_option("scenario", scenario, "steady, gc-persist, gc-perturb or dk-itg")->required();
  cli.add_option("--config", config_path, "INI configuration file")->required();
  cli.add_option("--threads", threads, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  cli.add_flag("--emit-plot-data", plot, "write gnuplot matrices next to the snapshots");
  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const mixsl::app::Scenario sc = mixsl::app::parse_scenario(scenario);
    mixsl::app::ScenarioConfig cfg = mixsl::app::parse_config(read_file(config_path), sc);
    if (threads > 0) cfg.threads = threads;
    mixsl::app::RunOptions opt;
    opt.emit_plot_data = plot;
    mixsl::app::run(cfg, opt);
  } catch (const mixsl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const mixsl::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const mixsl::CflError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const mixsl::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const mixsl::GeometryError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  }
  return kOk;
}
