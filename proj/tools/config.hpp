#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace critlab::cli {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Command { Spectrum, Interaction, Counterexample, Stability, Flow };
Command parse_command(const std::string& name);
std::string to_string(Command c);

// Flat key=value settings shared by every subcommand.  Keys a command does not read are
// still validated and hashed.  resolution = 0 and r_max = 0 select the command's default.
struct ExperimentConfig {
  int n = 6;
  int resolution = 0;              // radial cells, or axial cells of the 2-D grid
  double r_max = 0.0;
  std::optional<std::vector<double>> R;  // separations; unset selects the command's default
  std::vector<double> t{1e-3, 1e-2, 1e-1};
  std::vector<double> exponents;   // alpha, beta pairs
  std::vector<int> dims{3, 4, 5};
  int nu = 1;
  double ds = 0.01;
  double s_max = 40.0;
  double lambda = 1.0;
  double amplitude = 0.05;         // weight of the slowest radial mode in the flow start
  double tol = 1e-12;
  std::string out = ".";
  unsigned long seed = 1;
  int threads = 1;
  bool check = false;

  // Canonical text of every key, used for the provenance hash.
  std::map<std::string, std::string> entries() const;
  // Fills the command defaults for unset lists.
  void apply_defaults(Command cmd);
  void validate(Command cmd) const;
};

// Sets one key; throws ConfigError for unknown keys or malformed values.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Lines "key = value"; '#' starts a comment.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);
void load_config_file(ExperimentConfig& cfg, const std::string& path);

std::vector<double> parse_list(const std::string& text);
std::string format_list(const std::vector<double>& xs);

}  // namespace critlab::cli
