#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dgpe/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  std::string ground_state;
  std::string input;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--out", f.out, "output directory (overrides out_dir)");
  cmd->add_option("--threads", f.threads, "worker threads (fallback: DGPE_THREADS, then 1)");
  cmd->add_option("--seed", f.seed, "seed (overrides the config)");
  cmd->add_flag("--verbose", f.verbose, "progress output");
}

dgpe::CommandContext make_context(const Flags& f) {
  dgpe::CommandContext ctx;
  if (!f.config.empty()) ctx.config = dgpe::load_config(f.config);
  if (f.seed) ctx.config.seed = *f.seed;
  if (!f.out.empty()) ctx.config.out_dir = f.out;
  if (!f.ground_state.empty()) ctx.config.ground_state = f.ground_state;
  ctx.out = ctx.config.out_dir;
  ctx.threads = dgpe::resolve_threads(f.threads, std::getenv("DGPE_THREADS"));
  ctx.verbose = f.verbose;
  ctx.input = f.input;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudospectral toolkit for the 3D dipolar Gross-Pitaevskii equation"};
  app.require_subcommand(1);
  Flags flags;

  auto* gs = app.add_subcommand("ground-state", "minimize the Weinstein functional and write the threshold record");
  auto* ev = app.add_subcommand("evolve", "propagate initial data and write diagnostics");
  auto* cl = app.add_subcommand("classify", "evaluate every applicable theorem hypothesis for the initial data");
  auto* md = app.add_subcommand("make-data", "write the configured initial datum as a snapshot");
  auto* sw = app.add_subcommand("sweep", "run a parameter grid and write a verdict table");
  for (auto* cmd : {gs, ev, cl, md, sw}) add_common(cmd, flags);
  for (auto* cmd : {ev, cl, md, sw})
    cmd->add_option("--ground-state", flags.ground_state, "ground-state record (directory or summary file)");
  for (auto* cmd : {ev, cl})
    cmd->add_option("--input", flags.input, "initial field snapshot instead of the config's data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const dgpe::CommandContext ctx = make_context(flags);
    if (*gs) return dgpe::cmd_ground_state(ctx);
    if (*ev) return dgpe::cmd_evolve(ctx);
    if (*cl) return dgpe::cmd_classify(ctx);
    if (*md) return dgpe::cmd_make_data(ctx);
    if (*sw) return dgpe::cmd_sweep(ctx);
  } catch (const dgpe::Error& e) {
    std::cerr << "dgpe: " << e.what() << '\n';
    return dgpe::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dgpe: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
