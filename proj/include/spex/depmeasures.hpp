// Tail-dependence summaries: empirical chi_u / eta_u, the temporal
// extremogram with a permutation confidence bound, and model-implied chi
// and eta limits per family.

#ifndef SPEX_DEPMEASURES_HPP
#define SPEX_DEPMEASURES_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "spex/models.hpp"

namespace spex {

struct DependenceCurve {
  std::size_t site_a = 0, site_b = 0;
  std::vector<double> levels;  // strictly increasing quantile levels
  std::vector<double> values;
  enum class Kind { chi, eta, extremogram } kind = Kind::chi;
};

// chi_u = P(U_a > u | U_b > u) with strict inequalities, over jointly
// non-missing rows. Returns NaN (undefined, flagged) when the conditioning
// count is zero.
inline double chi_u_empirical(const ObservationMatrix& u_matrix,
                              std::size_t site_a, std::size_t site_b,
                              double u) {
  if (u_matrix.scale != MarginScale::uniform)
    throw std::invalid_argument("chi_u_empirical: uniform-scale input required");
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("chi_u_empirical: u must lie in (0,1)");
  std::size_t joint = 0, single = 0, n_valid = 0;
  for (std::size_t i = 0; i < u_matrix.n_rows; ++i) {
    const double a = u_matrix.at(i, site_a);
    const double b = u_matrix.at(i, site_b);
    if (std::isnan(a) || std::isnan(b)) continue;
    ++n_valid;
    if (b > u) {
      ++single;
      if (a > u) ++joint;
    }
  }
  if (static_cast<double>(n_valid) < 1.0 / (1.0 - u))
    throw std::invalid_argument(
        "chi_u_empirical: joint sample too small for this level");
  if (single == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(joint) / static_cast<double>(single);
}

// eta_u = log(1-u) / log P(U_a > u, U_b > u). NaN when there are no joint
// exceedances.
inline double eta_u_empirical(const ObservationMatrix& u_matrix,
                              std::size_t site_a, std::size_t site_b,
                              double u) {
  if (u_matrix.scale != MarginScale::uniform)
    throw std::invalid_argument("eta_u_empirical: uniform-scale input required");
  std::size_t joint = 0, n_valid = 0;
  for (std::size_t i = 0; i < u_matrix.n_rows; ++i) {
    const double a = u_matrix.at(i, site_a);
    const double b = u_matrix.at(i, site_b);
    if (std::isnan(a) || std::isnan(b)) continue;
    ++n_valid;
    if (a > u && b > u) ++joint;
  }
  if (joint == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p_joint = static_cast<double>(joint) / n_valid;
  return std::log(1.0 - u) / std::log(p_joint);
}

struct ExtremogramResult {
  std::vector<double> values;       // P(U_{t+h} > u | U_t > u), h = 1..max
  std::vector<double> upper_bound;  // pointwise 95% permutation bound
  std::vector<std::size_t> n_conditioning;  // valid exceedance pairs per lag
};

namespace detail {

inline std::vector<double> extremogram_raw(const std::vector<double>& series,
                                           double u, std::size_t max_lag,
                                           std::vector<std::size_t>* counts) {
  std::vector<double> out(max_lag, std::numeric_limits<double>::quiet_NaN());
  if (counts) counts->assign(max_lag, 0);
  for (std::size_t h = 1; h <= max_lag; ++h) {
    std::size_t cond = 0, joint = 0;
    for (std::size_t t = 0; t + h < series.size(); ++t) {
      const double a = series[t], b = series[t + h];
      if (std::isnan(a) || std::isnan(b)) continue;
      if (a > u) {
        ++cond;
        if (b > u) ++joint;
      }
    }
    if (counts) (*counts)[h - 1] = cond;
    if (cond > 0) out[h - 1] = static_cast<double>(joint) / cond;
  }
  return out;
}

}  // namespace detail

// Temporal extremogram of a uniform-scale series with missing values,
// plus a 95% pointwise upper bound under independence from seeded
// permutations of the observed values.
inline ExtremogramResult extremogram(const std::vector<double>& series,
                                     double u, std::size_t max_lag,
                                     std::uint64_t seed,
                                     int n_permutations = 200) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("extremogram: u must lie in (0,1)");
  std::size_t n_valid = 0;
  for (double v : series)
    if (!std::isnan(v)) ++n_valid;
  if (static_cast<double>(n_valid) < 1.0 / (1.0 - u))
    throw std::invalid_argument("extremogram: too few non-missing values");

  ExtremogramResult res;
  res.values = detail::extremogram_raw(series, u, max_lag, &res.n_conditioning);

  // Permute the non-missing values across their positions.
  std::vector<std::size_t> slots;
  std::vector<double> pool;
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!std::isnan(series[t])) {
      slots.push_back(t);
      pool.push_back(series[t]);
    }
  }
  std::vector<std::vector<double>> perm_values(n_permutations);
  parallel_for(n_permutations, [&](std::size_t p) {
    Rng rng(derive_seed(seed, p, 0xe7));
    std::vector<double> shuffled = pool;
    for (std::size_t k = shuffled.size(); k > 1; --k)
      std::swap(shuffled[k - 1], shuffled[rng.below(k)]);
    std::vector<double> permuted(series.size(),
                                 std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < slots.size(); ++k)
      permuted[slots[k]] = shuffled[k];
    perm_values[p] = detail::extremogram_raw(permuted, u, max_lag, nullptr);
  });
  res.upper_bound.assign(max_lag, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t h = 0; h < max_lag; ++h) {
    std::vector<double> vals;
    for (const auto& pv : perm_values)
      if (!std::isnan(pv[h])) vals.push_back(pv[h]);
    if (vals.empty()) continue;
    std::sort(vals.begin(), vals.end());
    std::size_t k = static_cast<std::size_t>(std::ceil(0.95 * vals.size()));
    if (k > 0) --k;
    res.upper_bound[h] = vals[std::min(k, vals.size() - 1)];
  }
  return res;
}

struct ChiResult {
  double value = 0.0;
  double mc_error = 0.0;  // nonzero only for Monte-Carlo evaluations
};

namespace detail {

// E[min(W1, W2)^((1-delta)/delta)] for the HW chi, by seeded Monte Carlo
// over the Gaussian-copula unit-Pareto pair; cached per (delta, rho).
inline ChiResult hw_chi_monte_carlo(double delta, double rho,
                                    std::size_t n = 1000000,
                                    std::uint64_t seed = 0xb1) {
  static std::mutex mu;
  static std::map<std::pair<double, double>, ChiResult> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    const auto it = cache.find({delta, rho});
    if (it != cache.end()) return it->second;
  }
  const double expo = (1.0 - delta) / delta;
  const double root = std::sqrt(1.0 - rho * rho);
  Rng rng(seed);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rho * z1 + root * rng.normal();
    const double w1 = 1.0 / norm_sf(z1);
    const double w2 = 1.0 / norm_sf(z2);
    const double v = std::pow(std::min(w1, w2), expo);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = (sumsq / n - mean * mean) / (n - 1.0);
  const double scale = (2.0 * delta - 1.0) / delta;
  ChiResult out{scale * mean, scale * 3.0 * std::sqrt(std::max(var, 0.0))};
  std::lock_guard<std::mutex> lock(mu);
  cache[{delta, rho}] = out;
  return out;
}

inline double pair_extremal_coefficient(const MaxStableSpec& spec, double h) {
  SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
  return MsModel(spec, pair).extremal_coefficient(0, 1);
}

}  // namespace detail

// Model-implied limiting chi at pair distance h. Monte-Carlo families
// report a 3-standard-error bound in mc_error.
inline ChiResult chi_theoretical(const ModelSpec& model, double h) {
  struct Visitor {
    double h;
    ChiResult operator()(const GaussianCopulaSpec& s) {
      return {correlation_at_distance(s.cov, h) < 1.0 ? 0.0 : 1.0, 0.0};
    }
    ChiResult operator()(const HotSpec& s) {
      s.validate();
      if (s.beta >= kShapeEps) return {0.0, 0.0};  // Weibull-tailed
      const double rho = correlation_at_distance(s.cov, h);
      const double arg = std::sqrt(1.0 + s.gamma) * (1.0 - rho) /
                         std::sqrt(1.0 - rho * rho);
      return {2.0 - 2.0 * student_t_cdf(arg, s.gamma + 1.0), 0.0};
    }
    ChiResult operator()(const HwSpec& s) {
      s.validate();
      if (s.delta <= 0.5) return {0.0, 0.0};
      return detail::hw_chi_monte_carlo(s.delta,
                                        correlation_at_distance(s.cov, h));
    }
    ChiResult operator()(const LocationMixSpec& s) {
      s.validate();
      const double rho = correlation_at_distance(s.cov, h);
      return {2.0 - 2.0 * norm_cdf(s.theta * std::sqrt((1.0 - rho) / 2.0)),
              0.0};
    }
    ChiResult operator()(const MaxStableSpec& s) {
      return {2.0 - detail::pair_extremal_coefficient(s, h), 0.0};
    }
    ChiResult operator()(const RParetoSpec& s) {
      return {2.0 - detail::pair_extremal_coefficient(s.base, h), 0.0};
    }
    ChiResult operator()(const ImsSpec&) { return {0.0, 0.0}; }
    ChiResult operator()(const MaxMixSpec&) {
      throw std::invalid_argument(
          "chi_theoretical: no implemented chi limit for the max-mixture "
          "family");
    }
  };
  return std::visit(Visitor{h}, model);
}

// Model-implied chi at the finite level u for a pair at distance h:
// P(both margins above their u-quantiles) / (1 - u), from the family's
// bivariate distribution function.
inline double chi_u_model(const ModelSpec& model, double h, double u) {
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("chi_u_model: u must lie in (0,1)");
  struct Visitor {
    double h, u;
    double joint_from_cdf(double c) const { return 1.0 - 2.0 * u + c; }
    double operator()(const GaussianCopulaSpec& s) {
      const double rho = correlation_at_distance(s.cov, h);
      const double z = norm_quantile(u);
      return joint_from_cdf(bvn_cdf(z, z, rho)) / (1.0 - u);
    }
    double operator()(const HotSpec& s) {
      SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
      const auto corr = correlation_matrix(pair, s.cov);
      HotMargins margins(s);
      const double x = margins.quantile(u);
      return joint_from_cdf(mixture_cdf(s, corr, {x, x}).value) / (1.0 - u);
    }
    double operator()(const HwSpec& s) {
      SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
      const auto corr = correlation_matrix(pair, s.cov);
      HwMargins margins(s);
      const double x = margins.quantile(u);
      return joint_from_cdf(mixture_cdf(s, corr, {x, x}).value) / (1.0 - u);
    }
    double operator()(const LocationMixSpec& s) {
      // Margins and joint by quadrature over the exponential mixing shift.
      const double rho = correlation_at_distance(s.cov, h);
      auto cdf1 = [&](double x) {
        return integrate_unit([&](double t) {
                 const double r = -std::log1p(-t) / s.theta;
                 return norm_cdf(x - r);
               }).value;
      };
      double lo = -2.0, hi = 2.0;
      while (cdf1(lo) > u) lo *= 2.0;
      while (cdf1(hi) < u) hi *= 2.0;
      for (int i = 0; i < 100 && hi - lo > 1e-10; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf1(mid) < u ? lo : hi) = mid;
      }
      const double x = 0.5 * (lo + hi);
      const double joint_cdf =
          integrate_unit([&](double t) {
            const double r = -std::log1p(-t) / s.theta;
            return bvn_cdf(x - r, x - r, rho);
          }).value;
      return joint_from_cdf(joint_cdf) / (1.0 - u);
    }
    double operator()(const MaxStableSpec& s) {
      // C(q,q) = u^theta on the Frechet scale.
      const double theta = detail::pair_extremal_coefficient(s, h);
      return joint_from_cdf(std::pow(u, theta)) / (1.0 - u);
    }
    double operator()(const RParetoSpec& s) {
      // Threshold stability: chi_u = 2 - V(1,1) at every level.
      return 2.0 - detail::pair_extremal_coefficient(s.base, h);
    }
    double operator()(const ImsSpec& s) {
      const double theta = detail::pair_extremal_coefficient(s.base, h);
      return std::pow(1.0 - u, theta - 1.0);
    }
    double operator()(const MaxMixSpec& s) {
      const double z = uniform_to_scale(u, MarginScale::frechet);
      return joint_from_cdf(maxmix_bivariate_cdf(s, h, z, z)) / (1.0 - u);
    }
  };
  return std::visit(Visitor{h, u}, model);
}

// Model-implied coefficient of tail dependence eta at pair distance h.
inline double eta_theoretical(const ModelSpec& model, double h) {
  struct Visitor {
    double h;
    double operator()(const GaussianCopulaSpec& s) {
      return (1.0 + correlation_at_distance(s.cov, h)) / 2.0;
    }
    double operator()(const HotSpec& s) {
      s.validate();
      if (s.beta < kShapeEps) return 1.0;  // Pareto-tailed: dependent
      const double rho = correlation_at_distance(s.cov, h);
      return std::pow((1.0 + rho) / 2.0, s.beta / (s.beta + 2.0));
    }
    double operator()(const HwSpec& s) {
      s.validate();
      const double eta_w = (1.0 + correlation_at_distance(s.cov, h)) / 2.0;
      if (s.delta >= 0.5) return 1.0;
      if (s.delta > eta_w / (1.0 + eta_w)) return s.delta / (1.0 - s.delta);
      return eta_w;
    }
    double operator()(const LocationMixSpec&) { return 1.0; }  // chi > 0
    double operator()(const MaxStableSpec&) { return 1.0; }
    double operator()(const RParetoSpec&) { return 1.0; }
    double operator()(const ImsSpec& s) {
      return 1.0 / detail::pair_extremal_coefficient(s.base, h);
    }
    double operator()(const MaxMixSpec&) {
      throw std::invalid_argument(
          "eta_theoretical: no implemented eta limit for the max-mixture "
          "family");
    }
  };
  return std::visit(Visitor{h}, model);
}

}  // namespace spex

#endif  // SPEX_DEPMEASURES_HPP
