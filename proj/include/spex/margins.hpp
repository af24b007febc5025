// Univariate extreme-value margins: GEV and GP distributions, maximum
// likelihood fitting, rank-based uniformization and scale transforms.

#ifndef SPEX_MARGINS_HPP
#define SPEX_MARGINS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spex/data.hpp"
#include "spex/dist.hpp"
#include "spex/inference.hpp"
#include "spex/rng.hpp"

namespace spex {

// Shape values below this magnitude take the Gumbel/exponential branch to
// avoid catastrophic cancellation in (1 + xi t)^(-1/xi).
inline constexpr double kShapeEps = 1e-8;

struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("gev: sigma must be > 0");
    if (!std::isfinite(mu) || !std::isfinite(xi))
      throw std::invalid_argument("gev: parameters must be finite");
  }
};

struct GpParams {
  double tau = 1.0;
  double xi = 0.0;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("gp: tau must be > 0");
    if (!std::isfinite(xi))
      throw std::invalid_argument("gp: shape must be finite");
  }
};

enum class DistKind { cdf, pdf, quantile };

inline double gev_cdf(double z, const GevParams& p) {
  p.validate();
  const double t = (z - p.mu) / p.sigma;
  if (std::fabs(p.xi) < kShapeEps) return std::exp(-std::exp(-t));
  const double w = 1.0 + p.xi * t;
  if (w <= 0.0) return p.xi > 0.0 ? 0.0 : 1.0;
  return std::exp(-std::pow(w, -1.0 / p.xi));
}

inline double gev_pdf(double z, const GevParams& p) {
  p.validate();
  const double t = (z - p.mu) / p.sigma;
  if (std::fabs(p.xi) < kShapeEps) {
    const double e = std::exp(-t);
    return e * std::exp(-e) / p.sigma;
  }
  const double w = 1.0 + p.xi * t;
  if (w <= 0.0) return 0.0;
  const double a = std::pow(w, -1.0 / p.xi);
  return a / w * std::exp(-a) / p.sigma;
}

inline double gev_quantile(double u, const GevParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("gev_quantile: u must lie in (0,1)");
  const double l = -std::log(u);
  if (std::fabs(p.xi) < kShapeEps) return p.mu - p.sigma * std::log(l);
  return p.mu + p.sigma * (std::pow(l, -p.xi) - 1.0) / p.xi;
}

inline double gev_eval(double z, const GevParams& p, DistKind kind) {
  switch (kind) {
    case DistKind::cdf: return gev_cdf(z, p);
    case DistKind::pdf: return gev_pdf(z, p);
    case DistKind::quantile: return gev_quantile(z, p);
  }
  throw std::logic_error("gev_eval: bad kind");
}

inline double gp_survival(double y, const GpParams& p) {
  p.validate();
  if (y < 0.0) return 1.0;
  if (std::fabs(p.xi) < kShapeEps) return std::exp(-y / p.tau);
  const double w = 1.0 + p.xi * y / p.tau;
  if (w <= 0.0) return 0.0;  // beyond the upper endpoint (xi < 0)
  return std::pow(w, -1.0 / p.xi);
}

inline double gp_cdf(double y, const GpParams& p) {
  if (y < 0.0) return 0.0;
  return 1.0 - gp_survival(y, p);
}

inline double gp_pdf(double y, const GpParams& p) {
  p.validate();
  if (y < 0.0) return 0.0;
  if (std::fabs(p.xi) < kShapeEps) return std::exp(-y / p.tau) / p.tau;
  const double w = 1.0 + p.xi * y / p.tau;
  if (w <= 0.0) return 0.0;
  return std::pow(w, -1.0 / p.xi - 1.0) / p.tau;
}

inline double gp_quantile(double u, const GpParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("gp_quantile: u must lie in (0,1)");
  if (std::fabs(p.xi) < kShapeEps) return -p.tau * std::log(1.0 - u);
  return p.tau * (std::pow(1.0 - u, -p.xi) - 1.0) / p.xi;
}

inline double gp_eval(double y, const GpParams& p, DistKind kind) {
  switch (kind) {
    case DistKind::cdf: return gp_cdf(y, p);
    case DistKind::pdf: return gp_pdf(y, p);
    case DistKind::quantile: return gp_quantile(y, p);
  }
  throw std::logic_error("gp_eval: bad kind");
}

// Threshold stability: exceedances above a higher threshold v = u + shift
// stay GP with scale tau + xi * shift and the same shape.
inline GpParams gp_shift(const GpParams& p, double v_minus_u) {
  p.validate();
  if (v_minus_u < 0.0)
    throw std::invalid_argument("gp_shift: shift must be nonnegative");
  const double tau = p.tau + p.xi * v_minus_u;
  if (!(tau > 0.0))
    throw std::invalid_argument("gp_shift: shift beyond the upper endpoint");
  return {tau, p.xi};
}

// GP parameters implied by a GEV fit above the threshold u*.
inline GpParams gp_from_gev(const GevParams& g, double u_star) {
  g.validate();
  const double tau = g.sigma + g.xi * (u_star - g.mu);
  if (!(tau > 0.0))
    throw std::invalid_argument("gp_from_gev: threshold outside GEV support");
  return {tau, g.xi};
}

inline double gev_loglik(const std::vector<double>& z, const GevParams& p) {
  double ll = 0.0;
  for (double v : z) {
    const double d = gev_pdf(v, p);
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(d);
  }
  return ll;
}

inline double gp_loglik(const std::vector<double>& y, const GpParams& p) {
  double ll = 0.0;
  for (double v : y) {
    const double d = gp_pdf(v, p);
    if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += std::log(d);
  }
  return ll;
}

// ML fit of a GEV distribution to block maxima, optimized over
// (mu, log sigma, xi).
inline FitResult fit_gev(const std::vector<double>& block_maxima,
                         const OptimSettings& settings = {}) {
  std::vector<double> z;
  for (double v : block_maxima)
    if (!std::isnan(v)) z.push_back(v);
  if (z.size() < 20)
    throw std::invalid_argument("fit_gev: need at least 20 maxima");
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / z.size();
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= z.size() - 1.0;
  if (!(var > 0.0))
    throw std::invalid_argument("fit_gev: degenerate (constant) sample");

  // Gumbel moment start.
  const double sigma0 = std::sqrt(6.0 * var) / kPi;
  const double mu0 = mean - 0.5772156649015329 * sigma0;
  const std::vector<double> init{mu0, sigma0, 0.1};
  const std::vector<ParamTransform> tr{ParamTransform::identity(),
                                       ParamTransform::log(),
                                       ParamTransform::identity()};
  Objective obj = [&z](const std::vector<double>& p) {
    return gev_loglik(z, {p[0], p[1], p[2]});
  };
  FitResult fit = maximize(obj, init, tr, {"mu", "sigma", "xi"}, settings);
  fit.n_effective = z.size();
  fit.bic = bic(fit.loglik, 3, fit.n_effective);
  observed_info_se(obj, tr, fit);
  if (fit.estimates[2] < -1.0)
    fit.warnings.push_back("xi < -1: irregular likelihood, estimate unreliable");
  if (!fit.converged) fit.warnings.push_back("optimizer did not converge");
  return fit;
}

// ML fit of a GP distribution to exceedances above the threshold,
// optimized over (log tau, xi).
inline FitResult fit_gp(const std::vector<double>& data, double threshold,
                        const OptimSettings& settings = {}) {
  std::vector<double> y;
  for (double v : data)
    if (!std::isnan(v) && v > threshold) y.push_back(v - threshold);
  if (y.size() < 20)
    throw std::invalid_argument("fit_gp: need at least 20 exceedances");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  const std::vector<double> init{mean, 0.05};
  const std::vector<ParamTransform> tr{ParamTransform::log(),
                                       ParamTransform::identity()};
  Objective obj = [&y](const std::vector<double>& p) {
    return gp_loglik(y, {p[0], p[1]});
  };
  FitResult fit = maximize(obj, init, tr, {"tau", "xi"}, settings);
  fit.n_effective = y.size();
  fit.bic = bic(fit.loglik, 2, fit.n_effective);
  observed_info_se(obj, tr, fit);
  if (!fit.converged) fit.warnings.push_back("optimizer did not converge");
  return fit;
}

// Rank-based transformation to the uniform scale, per site:
// value -> rank / (n_site + 1) over non-missing entries, ties broken by a
// seeded random permutation; missing entries stay missing.
inline ObservationMatrix empirical_uniform(const ObservationMatrix& obs,
                                           std::uint64_t seed) {
  ObservationMatrix out(obs.n_rows, obs.n_sites, MarginScale::uniform);
  out.row_ids = obs.row_ids;
  out.site_ids = obs.site_ids;
  for (std::size_t j = 0; j < obs.n_sites; ++j) {
    Rng rng(derive_seed(seed, j));
    struct Entry {
      double value;
      double tiebreak;
      std::size_t row;
    };
    std::vector<Entry> entries;
    entries.reserve(obs.n_rows);
    for (std::size_t i = 0; i < obs.n_rows; ++i) {
      const double tb = rng.uniform();  // drawn for every row: rank pattern
      if (!obs.is_missing(i, j)) entries.push_back({obs.at(i, j), tb, i});
    }
    if (entries.empty())
      throw std::invalid_argument("empirical_uniform: all-missing site " +
                                  std::to_string(j));
    if (entries.size() < 2)
      throw std::invalid_argument(
          "empirical_uniform: need >= 2 non-missing values per site");
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.value != b.value) return a.value < b.value;
      return a.tiebreak < b.tiebreak;
    });
    const double denom = static_cast<double>(entries.size()) + 1.0;
    for (std::size_t r = 0; r < entries.size(); ++r)
      out.at(entries[r].row, j) = static_cast<double>(r + 1) / denom;
  }
  return out;
}

inline double uniform_to_scale(double u, MarginScale target) {
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("rescale: entries must lie strictly in (0,1)");
  switch (target) {
    case MarginScale::uniform: return u;
    case MarginScale::frechet: return -1.0 / std::log(u);
    case MarginScale::pareto: return 1.0 / (1.0 - u);
    case MarginScale::exponential: return -std::log(1.0 - u);
    case MarginScale::laplace:
      return u < 0.5 ? std::log(2.0 * u) : -std::log(2.0 * (1.0 - u));
    case MarginScale::raw:
      throw std::invalid_argument("rescale: raw is not a standard scale");
  }
  throw std::logic_error("rescale: bad target");
}

inline double scale_to_uniform(double x, MarginScale source) {
  switch (source) {
    case MarginScale::uniform: return x;
    case MarginScale::frechet: return std::exp(-1.0 / x);
    case MarginScale::pareto: return 1.0 - 1.0 / x;
    case MarginScale::exponential: return 1.0 - std::exp(-x);
    case MarginScale::laplace:
      return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
    case MarginScale::raw:
      throw std::invalid_argument("rescale: raw is not a standard scale");
  }
  throw std::logic_error("rescale: bad source");
}

// Maps a uniform-scale panel onto one of the standard marginal scales.
inline ObservationMatrix rescale(const ObservationMatrix& u_matrix,
                                 MarginScale target) {
  if (u_matrix.scale != MarginScale::uniform)
    throw std::invalid_argument("rescale: input must be on the uniform scale");
  ObservationMatrix out = u_matrix;
  out.scale = target;
  if (target == MarginScale::uniform) return out;
  for (double& v : out.values)
    if (!std::isnan(v)) v = uniform_to_scale(v, target);
  return out;
}

// Inverse of rescale: back to the uniform scale.
inline ObservationMatrix to_uniform(const ObservationMatrix& m) {
  ObservationMatrix out = m;
  out.scale = MarginScale::uniform;
  if (m.scale == MarginScale::uniform) return out;
  for (double& v : out.values)
    if (!std::isnan(v)) v = scale_to_uniform(v, m.scale);
  return out;
}

// Standard Laplace distribution pieces used by the conditional model.
inline double laplace_cdf(double x) { return scale_to_uniform(x, MarginScale::laplace); }
inline double laplace_quantile(double u) { return uniform_to_scale(u, MarginScale::laplace); }
inline double laplace_survival(double x) { return 1.0 - laplace_cdf(x); }

}  // namespace spex

#endif  // SPEX_MARGINS_HPP
