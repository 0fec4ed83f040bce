#ifndef BALAYAGE_IO_HPP
#define BALAYAGE_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "balayage/balayage.hpp"

namespace balayage {

inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::ordered_json;

// 17 significant digits, enough to round-trip a double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

// Per-node fields of a balayage run.
inline CsvTable field_table(const DiscreteManifold& m, const BalayageResult& r) {
  CsvTable t;
  t.header = {"node", "a", "b", "W", "sigma", "lambda", "nu", "mu", "u", "v", "psi", "omega"};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    t.add({std::to_string(i), format_double(m.coords()[i].a), format_double(m.coords()[i].b),
           format_double(m.volume_weights()[k]), format_double(r.sigma.masses[k]), format_double(r.lambda.masses[k]),
           format_double(r.nu.masses[k]), format_double(r.mu.masses[k]), format_double(r.u.values[k]),
           format_double(r.v.values[k]), format_double(r.psi.values[k]), r.omega_mask[i] ? "1" : "0"});
  }
  return t;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace balayage

#endif
