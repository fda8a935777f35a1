#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cli/config.hpp"

namespace kpcm::cli {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitSingular = 3 };

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

/// Reads KPCM_LOG (off, error, warn, info, debug; default off) and installs a stderr logger.
void configure_logging();

/// Each writes <out>/<command>.csv and <out>/<command>.json and returns the exit code.
int cmd_simulate(const RunConfig& cfg, const std::string& out_dir, int jobs);
int cmd_verify(const RunConfig& cfg, const std::string& out_dir, int jobs);
int cmd_tau_compare(const RunConfig& cfg, const std::string& out_dir, int jobs);
int cmd_backlund(const RunConfig& cfg, const std::string& out_dir, int jobs);

/// Loads the config, applies overrides, dispatches on the command name and
/// maps exceptions to exit codes (config problems 2, collisions and step
/// underflow 3).
int run_command(const std::string& command, const CommandOptions& opts);

}  // namespace kpcm::cli
