// decolab: scenario runner and acceptance checker.
//   decolab run <scenario-file> [--seed N] [--out DIR]
//   decolab list-commands
//   decolab check
// Exit status: 0 ok, 1 a check failed, 2 invalid scenario or engine error.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "decolab/commands.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw decolab::Error("cannot read scenario file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decolab: energy-decoherence and collapse-model engines"};
  app.set_version_flag("--version", std::string(decolab::kVersion));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run one scenario file");
  std::string file;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  run->add_option("scenario", file, "scenario file (JSON)")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", out, "override the output directory");

  auto* list = app.add_subcommand("list-commands", "list scenario commands");
  auto* check = app.add_subcommand("check", "run the built-in acceptance suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& name : decolab::cli::command_names())
        std::printf("%-16s %s\n", name.c_str(), decolab::cli::command_summaries().at(name).c_str());
      return 0;
    }
    if (*check) {
      const auto rep = decolab::cli::run_checks();
      std::fputs(rep.to_text().c_str(), stdout);
      return rep.ok() ? 0 : 1;
    }
    auto sc = decolab::cli::parse_scenario(slurp(file));
    if (seed) decolab::cli::override_seed(sc, *seed);
    const auto rep = decolab::cli::run(sc, out);
    std::fputs(rep.to_text().c_str(), stdout);
    return rep.ok() ? 0 : 1;
  } catch (const decolab::ScenarioError& e) {
    std::fprintf(stderr, "scenario error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
