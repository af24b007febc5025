// CSV ingestion and emission for observation panels, station tables and
// generic numeric tables. UTF-8, '.' decimal separator, empty cell = missing.

#ifndef SPEX_CSV_HPP
#define SPEX_CSV_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spex/data.hpp"

namespace spex {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Prints doubles with round-trip precision; rerunning a command must
// reproduce output files byte for byte.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Observations CSV: first column is a replicate id/date, remaining columns
// are sites; an empty cell is a missing value.
inline ObservationMatrix read_observations_csv(const std::string& path,
                                               MarginScale scale =
                                                   MarginScale::raw) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open observations file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty observations file: " + path);
  const auto header = split_csv_line(line);
  if (header.size() < 2)
    throw std::runtime_error("observations file needs id + site columns: " +
                             path);
  const std::size_t d = header.size() - 1;

  std::vector<std::string> row_ids;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != d + 1)
      throw std::runtime_error("ragged row in " + path + ": '" + line + "'");
    row_ids.push_back(fields[0]);
    for (std::size_t j = 1; j <= d; ++j) {
      if (fields[j].empty()) {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        values.push_back(std::stod(fields[j]));
      }
    }
  }

  ObservationMatrix m(row_ids.size(), d, scale);
  m.values = std::move(values);
  m.row_ids = std::move(row_ids);
  m.site_ids.assign(header.begin() + 1, header.end());
  return m;
}

inline void write_observations_csv(const std::string& path,
                                   const ObservationMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id";
  for (std::size_t j = 0; j < m.n_sites; ++j) {
    out << ',' << (j < m.site_ids.size() ? m.site_ids[j]
                                         : "s" + std::to_string(j + 1));
  }
  out << '\n';
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    out << (i < m.row_ids.size() ? m.row_ids[i] : std::to_string(i + 1));
    for (std::size_t j = 0; j < m.n_sites; ++j) {
      out << ',';
      if (!m.is_missing(i, j)) out << format_double(m.at(i, j));
    }
    out << '\n';
  }
}

// Stations CSV: id, x, y.
inline SiteSet read_stations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stations file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty stations file: " + path);
  SiteSet sites;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 3)
      throw std::runtime_error("stations file needs id,x,y columns: " + path);
    sites.labels.push_back(fields[0]);
    sites.coords.push_back({std::stod(fields[1]), std::stod(fields[2])});
  }
  return sites;
}

inline void write_stations_csv(const std::string& path, const SiteSet& sites) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id,x,y\n";
  for (std::size_t j = 0; j < sites.size(); ++j) {
    out << (j < sites.labels.size() ? sites.labels[j]
                                    : "s" + std::to_string(j + 1))
        << ',' << format_double(sites.coords[j][0]) << ','
        << format_double(sites.coords[j][1]) << '\n';
  }
}

// Generic numeric table with a header, used for plot-ready outputs.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline void write_table_csv(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out << ',';
    out << t.columns[c];
  }
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out << ',';
      if (!std::isnan(r[c])) out << format_double(r[c]);
    }
    out << '\n';
  }
}

}  // namespace spex

#endif  // SPEX_CSV_HPP
