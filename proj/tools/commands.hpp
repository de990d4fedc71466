#pragma once

#include "config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace critlab::cli {

enum ExitCode : int { kSuccess = 0, kValidation = 2, kSolverFailure = 3, kCheckFailure = 4 };

// What a command wrote and whether its --check conditions held.
struct CommandResult {
  std::vector<std::string> files;
  bool check_passed = true;
  std::vector<std::string> check_messages;
};

CommandResult cmd_spectrum(const ExperimentConfig& cfg, const std::string& command_line);
CommandResult cmd_interaction(const ExperimentConfig& cfg, const std::string& command_line);
CommandResult cmd_counterexample(const ExperimentConfig& cfg, const std::string& command_line);
CommandResult cmd_stability(const ExperimentConfig& cfg, const std::string& command_line);
CommandResult cmd_flow(const ExperimentConfig& cfg, const std::string& command_line);

// Full entry point; args[0] is the program name.  Diagnostics go to err as one JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace critlab::cli
