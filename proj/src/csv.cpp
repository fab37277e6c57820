#include "phtraffic/csv.hpp"

#include "phtraffic/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace phtraffic {

void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw InvalidInput("write_csv: row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out, table);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw InvalidInput("read_csv: missing header");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) throw InvalidInput("read_csv: ragged row");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_number(c));
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_csv(in);
}

double wrap_position(double q, double length) {
  double r = std::fmod(q, length);
  if (r < 0.0) r += length;
  // fmod of a tiny negative value can round up to exactly L
  if (r >= length) r = 0.0;
  return r;
}

CsvTable trajectory_table(const TimeSeries& ts, bool unwrapped) {
  const int n = ts.params.n_vehicles;
  CsvTable table;
  table.header.push_back("t");
  for (int i = 1; i <= n; ++i) table.header.push_back("q" + std::to_string(i));
  for (int i = 1; i <= n; ++i) table.header.push_back("p" + std::to_string(i));
  table.rows.reserve(ts.states.size());
  for (std::size_t k = 0; k < ts.states.size(); ++k) {
    const auto& s = ts.states[k];
    std::vector<double> row;
    row.reserve(1 + 2 * n);
    row.push_back(ts.times[k]);
    for (int i = 0; i < n; ++i) row.push_back(unwrapped ? s.q[i] : wrap_position(s.q[i], ts.params.ring_length));
    for (int i = 0; i < n; ++i) row.push_back(s.p[i]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable observables_table(const ObservableSeries& obs) {
  CsvTable table;
  table.header = {"t", "mean_speed", "speed_variance", "p1", "hamiltonian"};
  table.rows.reserve(obs.times.size());
  for (std::size_t k = 0; k < obs.times.size(); ++k) {
    table.rows.push_back({obs.times[k], obs.mean_speed[k], obs.speed_variance[k], obs.single_vehicle_speed[k],
                          obs.hamiltonian[k]});
  }
  return table;
}

}  // namespace phtraffic
