#include "critlab/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace critlab {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const std::map<std::string, std::string>& entries) {
  std::string text;
  for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("CSV header is empty");
}

void CsvTable::add_row(std::vector<CsvCell> row) {
  if (row.size() != header_.size())
    throw std::invalid_argument("CSV row has " + std::to_string(row.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

namespace {

std::string cell_text(const CsvCell& c) {
  if (auto d = std::get_if<double>(&c)) return format_number(*d);
  if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace

void CsvTable::write(std::ostream& os, const Provenance& prov) const {
  os << "# command: " << prov.command << "\n";
  os << "# config_hash: " << prov.config_hash << "\n";
  os << "# version: " << prov.version << "\n";
  for (const auto& [k, v] : prov.grid) os << "# grid." << k << ": " << v << "\n";
  for (std::size_t j = 0; j < header_.size(); ++j) os << (j ? "," : "") << header_[j];
  os << "\n";
  for (const auto& row : rows_) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << cell_text(row[j]);
    os << "\n";
  }
}

void CsvTable::write(const std::filesystem::path& path, const Provenance& prov) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  write(os, prov);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json provenance_json(const Provenance& prov) {
  nlohmann::json grid = nlohmann::json::object();
  for (const auto& [k, v] : prov.grid) grid[k] = v;
  return {{"command", prov.command},
          {"config_hash", prov.config_hash},
          {"version", prov.version},
          {"grid", grid}};
}

void write_manifest(const std::filesystem::path& path, const Provenance& prov,
                    nlohmann::json body) {
  body["provenance"] = provenance_json(prov);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << body.dump(2) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace critlab
