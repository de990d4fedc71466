#include "config.hpp"

#include "critlab/output.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace critlab::cli {

Command parse_command(const std::string& name) {
  if (name == "spectrum") return Command::Spectrum;
  if (name == "interaction") return Command::Interaction;
  if (name == "counterexample") return Command::Counterexample;
  if (name == "stability") return Command::Stability;
  if (name == "flow") return Command::Flow;
  throw ConfigError("unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Spectrum: return "spectrum";
    case Command::Interaction: return "interaction";
    case Command::Counterexample: return "counterexample";
    case Command::Stability: return "stability";
    case Command::Flow: return "flow";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw ConfigError(key + ": '" + text + "' is not a finite number");
  return v;
}

long parse_long(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  long v = std::strtol(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(key + ": '" + text + "' is not an integer");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  long v = parse_long(key, text);
  if (v < -1000000000L || v > 1000000000L) throw ConfigError(key + ": out of range");
  return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
  std::string t = trim(text);
  if (t == "1" || t == "true" || t == "yes") return true;
  if (t == "0" || t == "false" || t == "no") return false;
  throw ConfigError(key + ": '" + text + "' is not a boolean");
}

std::vector<double> parse_list_for(const std::string& key, const std::string& text) {
  std::vector<double> xs;
  std::string t = trim(text);
  if (t.empty()) return xs;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(parse_double(key, item));
  return xs;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool increasing(const std::vector<double>& xs) {
  return std::adjacent_find(xs.begin(), xs.end(), std::greater_equal<>()) == xs.end();
}

}  // namespace

std::vector<double> parse_list(const std::string& text) { return parse_list_for("list", text); }

std::string format_list(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_number(xs[i]);
  return s;
}

void set_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "n") c.n = parse_int(key, value);
  else if (key == "resolution") c.resolution = parse_int(key, value);
  else if (key == "r_max") c.r_max = parse_double(key, value);
  else if (key == "R") c.R = parse_list_for(key, value);
  else if (key == "t") c.t = parse_list_for(key, value);
  else if (key == "exponents") c.exponents = parse_list_for(key, value);
  else if (key == "dims") {
    c.dims.clear();
    for (double d : parse_list_for(key, value)) {
      require(d == std::floor(d), "dims: entries must be integers");
      c.dims.push_back(static_cast<int>(d));
    }
  } else if (key == "nu") c.nu = parse_int(key, value);
  else if (key == "ds") c.ds = parse_double(key, value);
  else if (key == "s_max") c.s_max = parse_double(key, value);
  else if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "amplitude") c.amplitude = parse_double(key, value);
  else if (key == "tol") c.tol = parse_double(key, value);
  else if (key == "out") c.out = trim(value);
  else if (key == "seed") {
    long v = parse_long(key, value);
    require(v >= 0, "seed: must be non-negative");
    c.seed = static_cast<unsigned long>(v);
  } else if (key == "threads") c.threads = parse_int(key, value);
  else if (key == "check") c.check = parse_bool(key, value);
  else throw ConfigError("unknown key '" + key + "'");
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    try {
      set_key(cfg, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

std::map<std::string, std::string> ExperimentConfig::entries() const {
  std::vector<double> d(dims.begin(), dims.end());
  return {{"n", std::to_string(n)},
          {"resolution", std::to_string(resolution)},
          {"r_max", format_number(r_max)},
          {"R", R ? format_list(*R) : "default"},
          {"t", format_list(t)},
          {"exponents", format_list(exponents)},
          {"dims", format_list(d)},
          {"nu", std::to_string(nu)},
          {"ds", format_number(ds)},
          {"s_max", format_number(s_max)},
          {"lambda", format_number(lambda)},
          {"amplitude", format_number(amplitude)},
          {"tol", format_number(tol)},
          {"seed", std::to_string(seed)},
          {"check", check ? "1" : "0"}};
}

void ExperimentConfig::apply_defaults(Command cmd) {
  const double p = (n + 2.0) / (n - 2.0);
  switch (cmd) {
    case Command::Spectrum:
      if (!R) R = std::vector<double>{10.0, 20.0};
      break;
    case Command::Interaction:
      if (!R) R = std::vector<double>{8.0, 16.0, 32.0, 64.0};
      if (exponents.empty()) exponents = {p, 1.0};
      break;
    case Command::Counterexample:
      if (!R) R = std::vector<double>{8.0, 12.0, 16.0, 24.0, 32.0};
      break;
    case Command::Stability:
    case Command::Flow:
      break;
  }
}

void ExperimentConfig::validate(Command cmd) const {
  require(n >= 3 && n <= 12, "n must lie in [3, 12]");
  require(resolution >= 0, "resolution must be non-negative");
  require(resolution == 0 || resolution >= 16, "resolution below 16 cells");
  require(r_max >= 0.0, "r_max must be non-negative");
  require(threads >= 1 && threads <= 256, "threads must lie in [1, 256]");
  require(tol > 0.0 && tol < 1.0, "tol must lie in (0, 1)");
  require(!out.empty(), "out must name a directory");
  switch (cmd) {
    case Command::Counterexample:
      require(n >= 6, "the counterexample family needs n >= 6");
      [[fallthrough]];
    case Command::Spectrum:
      require(R && !R->empty(), "R list is empty");
      require(increasing(*R), "R list must be strictly increasing");
      require(R->front() >= 2.0, "R values below 2 do not separate the bubbles");
      break;
    case Command::Interaction:
      require(R && !R->empty(), "R list (separations D) is empty");
      require(increasing(*R), "R list must be strictly increasing");
      require(R->front() >= 0.0, "separations must be non-negative");
      require(!exponents.empty() && exponents.size() % 2 == 0,
              "exponents must hold alpha, beta pairs");
      for (double e : exponents) require(e > 0.0, "exponents must be positive");
      break;
    case Command::Stability:
      require(nu == 1 || nu == 2, "nu must be 1 or 2");
      require(!dims.empty(), "dims list is empty");
      for (int d : dims) require(d >= 3 && d <= 12, "dims entries must lie in [3, 12]");
      require(!t.empty() && increasing(t), "t list must be non-empty and increasing");
      require(t.front() > 0.0, "t values must be positive");
      break;
    case Command::Flow:
      require(ds > 0.0 && ds <= 0.5, "ds must lie in (0, 0.5]");
      require(s_max > ds, "s_max must exceed ds");
      require(lambda >= 1.0 / 64.0 && lambda <= 64.0, "lambda must lie in [1/64, 64]");
      require(std::abs(amplitude) < 0.5, "|amplitude| must be below 0.5");
      break;
  }
}

}  // namespace critlab::cli
