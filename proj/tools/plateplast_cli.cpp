#include "plateplast/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using plateplast::Command;

int dispatch(Command cmd, const std::string& path, const std::optional<std::string>& out,
             const std::optional<std::uint64_t>& seed, bool quiet) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "config: cannot open " << path << "\n";
    return plateplast::kExitUsage;
  }
  std::ostringstream text;
  text << in.rdbuf();
  plateplast::RunConfig cfg;
  try {
    cfg = plateplast::parse_config(text.str());
    if (out) cfg.output.dir = *out;
    if (seed) cfg.diagnostics.seed = *seed;
    plateplast::validate_for(cfg, cmd);
  } catch (const plateplast::Error& e) {
    std::cerr << "config: " << path << ": " << e.what() << "\n";
    return plateplast::kExitUsage;
  }
  const plateplast::RunStreams io{std::cout, std::cerr, quiet};
  switch (cmd) {
    case Command::Simulate: return plateplast::run_simulate(cfg, io);
    case Command::Dissipation: return plateplast::run_dissipation(cfg, io);
    case Command::Check: return plateplast::run_check(cfg, io);
  }
  return plateplast::kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasistatic plate plasticity solver"};
  app.set_version_flag("--version", std::string(PLATEPLAST_VERSION));
  app.require_subcommand(1);

  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  app.add_option("--out", out, "Output directory (overrides output.dir)");
  app.add_option("--seed", seed, "Random seed (overrides diagnostics.seed)");
  app.add_flag("--quiet", quiet, "Suppress summary tables on stdout");

  std::string config;
  Command cmd = Command::Simulate;
  auto add = [&](const char* name, const char* help, Command c) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config, "Configuration file")->required();
    sub->fallthrough();
    sub->callback([&cmd, c] { cmd = c; });
  };
  add("simulate", "Run the incremental evolution and its diagnostics", Command::Simulate);
  add("dissipation", "Upper bounds on the SL(3) dissipation distance", Command::Dissipation);
  add("check", "Diagnostics on a stored snapshot", Command::Check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : plateplast::kExitUsage;
  }
  return dispatch(cmd, config, out, seed, quiet);
}
