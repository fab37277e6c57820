#pragma once

// Numeric CSV tables. Values are written in shortest round-trip form, so
// read_csv(write_csv(t)) reproduces every double bit for bit.

#include "phtraffic/sde.hpp"
#include "phtraffic/stats.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace phtraffic {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

void write_csv(std::ostream& out, const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// t, q1..qN, p1..pN. Positions are reduced mod L unless `unwrapped`.
CsvTable trajectory_table(const TimeSeries& ts, bool unwrapped = false);

/// t, mean_speed, speed_variance, p1, hamiltonian.
CsvTable observables_table(const ObservableSeries& obs);

/// Position reduced to [0, L).
double wrap_position(double q, double length);

}  // namespace phtraffic
