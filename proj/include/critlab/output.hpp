#pragma once

#include "critlab/grids.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace critlab {

// Stamped into every output file.
struct Provenance {
  std::string command;
  std::string config_hash;
  std::string version = CRITLAB_VERSION;
  std::vector<std::pair<std::string, std::string>> grid;
};

std::uint64_t fnv1a64(const std::string& bytes);
// Hash of the sorted "key=value" lines, as 16 hex digits.
std::string config_hash(const std::map<std::string, std::string>& entries);

// Shortest round-trip form ("%.17g" trimmed), so reruns are byte-identical.
std::string format_number(double x);

using CsvCell = std::variant<double, long long, std::string>;

class CsvTable {
public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<CsvCell> row);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  // '#'-prefixed provenance lines, then the header row, then the data.
  void write(std::ostream& os, const Provenance& prov) const;
  void write(const std::filesystem::path& path, const Provenance& prov) const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

// nlohmann::json keeps object keys sorted, which fixes the field order.
nlohmann::json provenance_json(const Provenance& prov);
void write_manifest(const std::filesystem::path& path, const Provenance& prov,
                    nlohmann::json body);

}  // namespace critlab
