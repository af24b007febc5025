// Core data containers: site coordinates and replicate-by-site panels.

#ifndef SPEX_DATA_HPP
#define SPEX_DATA_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace spex {

// Marginal scale tag carried by an ObservationMatrix. Transforms between
// tags are strictly increasing bijections on the relevant supports.
enum class MarginScale { raw, uniform, frechet, pareto, laplace, exponential };

inline const char* margin_scale_name(MarginScale s) {
  switch (s) {
    case MarginScale::raw: return "raw";
    case MarginScale::uniform: return "uniform";
    case MarginScale::frechet: return "frechet";
    case MarginScale::pareto: return "pareto";
    case MarginScale::laplace: return "laplace";
    case MarginScale::exponential: return "exponential";
  }
  return "?";
}

inline MarginScale margin_scale_from_name(const std::string& name) {
  if (name == "raw") return MarginScale::raw;
  if (name == "uniform") return MarginScale::uniform;
  if (name == "frechet") return MarginScale::frechet;
  if (name == "pareto") return MarginScale::pareto;
  if (name == "laplace") return MarginScale::laplace;
  if (name == "exponential") return MarginScale::exponential;
  throw std::invalid_argument("unknown margin scale: " + name);
}

// Planar station coordinates with labels.
struct SiteSet {
  std::vector<std::array<double, 2>> coords;
  std::vector<std::string> labels;

  std::size_t size() const { return coords.size(); }

  static SiteSet from_coords(std::vector<std::array<double, 2>> c) {
    SiteSet s;
    s.coords = std::move(c);
    s.labels.resize(s.coords.size());
    for (std::size_t j = 0; j < s.labels.size(); ++j)
      s.labels[j] = "s" + std::to_string(j + 1);
    return s;
  }
};

inline double site_distance(const SiteSet& sites, std::size_t i,
                            std::size_t j) {
  const double dx = sites.coords[i][0] - sites.coords[j][0];
  const double dy = sites.coords[i][1] - sites.coords[j][1];
  return std::hypot(dx, dy);
}

// n x D panel of observations, row-major, NaN marking missing entries.
struct ObservationMatrix {
  std::size_t n_rows = 0;
  std::size_t n_sites = 0;
  std::vector<double> values;  // size n_rows * n_sites
  MarginScale scale = MarginScale::raw;
  std::vector<std::string> row_ids;   // optional (dates / replicate ids)
  std::vector<std::string> site_ids;  // optional

  ObservationMatrix() = default;
  ObservationMatrix(std::size_t n, std::size_t d,
                    MarginScale s = MarginScale::raw)
      : n_rows(n),
        n_sites(d),
        values(n * d, std::numeric_limits<double>::quiet_NaN()),
        scale(s) {}

  double& at(std::size_t i, std::size_t j) { return values[i * n_sites + j]; }
  double at(std::size_t i, std::size_t j) const {
    return values[i * n_sites + j];
  }
  const double* row(std::size_t i) const { return &values[i * n_sites]; }
  double* row(std::size_t i) { return &values[i * n_sites]; }

  bool is_missing(std::size_t i, std::size_t j) const {
    return std::isnan(at(i, j));
  }

  bool row_complete(std::size_t i) const {
    for (std::size_t j = 0; j < n_sites; ++j)
      if (is_missing(i, j)) return false;
    return true;
  }

  std::size_t count_non_missing(std::size_t j) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < n_rows; ++i)
      if (!is_missing(i, j)) ++n;
    return n;
  }
};

}  // namespace spex

#endif  // SPEX_DATA_HPP
