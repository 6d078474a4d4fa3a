#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "switchctl/config.hpp"

namespace switchctl {

/// Exit codes shared by the library entry points and the CLI.
inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

struct CommandResult {
  int exit_code = kExitPass;
  /// File name -> content. Byte-stable for a fixed config and seed.
  std::map<std::string, std::string> artifacts;
  /// One-line human summary.
  std::string summary;
};

/// Subcommands: validate, solve, limits, regions, simulate, crosscheck.
/// Module errors propagate as exceptions.
CommandResult run_command(const std::string& subcommand, const ExperimentConfig& config);

struct RunOptions {
  /// Overrides the config's output directory when set.
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Loads the config, runs the subcommand, writes artifacts, and maps errors
/// to exit code 1 with a message on `log`.
int run(const std::string& subcommand, const std::string& config_path, const RunOptions& options, std::ostream& log);

}  // namespace switchctl
