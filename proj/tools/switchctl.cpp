#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "switchctl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Penalized solver and Monte Carlo checker for switching/singular control problems"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool quiet = false;
  };
  Flags flags;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  const std::pair<const char*, const char*> commands[] = {
      {"validate", "check the problem hypotheses"},
      {"solve", "solve the penalized system at the configured epsilon and delta"},
      {"limits", "run the delta and epsilon continuation ladders and certify the limits"},
      {"regions", "extract continuation / switching / gradient-binding regions"},
      {"simulate", "Monte Carlo cost of the feedback policy"},
      {"crosscheck", "compare the Monte Carlo cost with the PDE value"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    auto* o = sub->add_option("--out", flags.out, "output directory (overrides the config)");
    auto* s = sub->add_option("--seed", flags.seed, "master seed (overrides the config)");
    sub->add_flag("--quiet", flags.quiet, "print errors only");
    sub->callback([&, o, s] {
      out_opt = o;
      seed_opt = s;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage errors share the generic error status
    return app.exit(e) == 0 ? switchctl::kExitPass : switchctl::kExitError;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  switchctl::RunOptions options;
  if (out_opt && out_opt->count() > 0) options.out_dir = flags.out;
  if (seed_opt && seed_opt->count() > 0) options.seed = flags.seed;
  options.quiet = flags.quiet;
  return switchctl::run(name, flags.config, options, std::cerr);
}
