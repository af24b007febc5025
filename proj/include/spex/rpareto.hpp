// r-Pareto processes: risk functionals, exact simulation via the r-tilted
// spectral mixture, and the censored likelihood.

#ifndef SPEX_RPARETO_HPP
#define SPEX_RPARETO_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "spex/maxstable.hpp"

namespace spex {

// Order-1 homogeneous risk functional: r(cX) = c r(X) for c > 0.
struct RiskFunctional {
  enum class Tag { max, min, mean, site };
  Tag tag = Tag::max;
  std::size_t s0_index = 0;  // used by the site functional

  static RiskFunctional max() { return {Tag::max, 0}; }
  static RiskFunctional min() { return {Tag::min, 0}; }
  static RiskFunctional mean() { return {Tag::mean, 0}; }
  static RiskFunctional site(std::size_t s0) { return {Tag::site, s0}; }

  const char* name() const {
    switch (tag) {
      case Tag::max: return "max";
      case Tag::min: return "min";
      case Tag::mean: return "mean";
      case Tag::site: return "site";
    }
    return "?";
  }
};

inline double risk_eval(const RiskFunctional& r, const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("risk_eval: empty vector");
  for (double v : x)
    if (!std::isfinite(v))
      throw std::invalid_argument("risk_eval: non-finite component");
  switch (r.tag) {
    case RiskFunctional::Tag::max:
      return *std::max_element(x.begin(), x.end());
    case RiskFunctional::Tag::min:
      return *std::min_element(x.begin(), x.end());
    case RiskFunctional::Tag::mean:
      return std::accumulate(x.begin(), x.end(), 0.0) /
             static_cast<double>(x.size());
    case RiskFunctional::Tag::site:
      if (r.s0_index >= x.size())
        throw std::out_of_range("risk_eval: site index out of range");
      return x[r.s0_index];
  }
  throw std::logic_error("risk_eval: bad tag");
}

struct RParetoSpec {
  MaxStableSpec base;
  RiskFunctional functional;
};

// X = R W with R ~ Pareto(1) independent of W, r(W) = 1 almost surely.
// W is drawn from the r-tilted spectral measure of the base family (the
// mixture of per-site extremal functions, rejection-corrected for max and
// min), so that simulated processes follow the same law as the censored
// likelihood below.
inline ObservationMatrix rpareto_simulate(const RParetoSpec& spec,
                                          const SiteSet& sites, std::size_t n,
                                          std::uint64_t seed) {
  spec.base.validate();
  const std::size_t d = sites.size();
  if (spec.functional.tag == RiskFunctional::Tag::site &&
      spec.functional.s0_index >= d)
    throw std::out_of_range("rpareto_simulate: site index out of range");

  // One extremal-function sampler per anchor site.
  std::vector<detail::SpectralProfiles> anchors;
  anchors.reserve(d);
  for (std::size_t j = 0; j < d; ++j)
    anchors.emplace_back(spec.base, sites, static_cast<int>(j));

  ObservationMatrix out(n, d, MarginScale::pareto);
  out.site_ids = sites.labels;
  const RiskFunctional r = spec.functional;

  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0x9a));
    std::vector<double> w(d), scratch;
    constexpr std::size_t kMaxAttempts = 1000000;
    std::size_t attempt = 0;
    for (;; ++attempt) {
      if (attempt >= kMaxAttempts)
        throw std::runtime_error(
            "rpareto_simulate: rejection sampler failed to accept "
            "(functional poorly matched to dependence)");
      std::size_t anchor = r.tag == RiskFunctional::Tag::site
                               ? r.s0_index
                               : static_cast<std::size_t>(rng.below(d));
      anchors[anchor].draw(rng, w, scratch);
      if (r.tag == RiskFunctional::Tag::site) break;  // exact, no rejection
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      if (r.tag == RiskFunctional::Tag::mean) break;  // sum-tilted is exact
      const double stat = r.tag == RiskFunctional::Tag::max
                              ? *std::max_element(w.begin(), w.end())
                              : *std::min_element(w.begin(), w.end());
      if (rng.uniform() * sum < stat) break;
    }
    const double rw = risk_eval(r, w);
    const double radius = rng.pareto();
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = radius * w[j] / rw;
  });
  return out;
}

struct RParetoLoglikOptions {
  bool only_rows_with_exceedance = false;  // skip rows with r(row) <= u
};

struct RParetoLoglikResult {
  double loglik = 0.0;
  std::size_t rows_used = 0;
  std::size_t rows_skipped_below_threshold = 0;
  std::size_t rows_skipped_fully_censored = 0;
};

// Censored Pareto-process likelihood: sum over rows with r(row) > u of
// log[-V_I(max(y, u)) / K_r(u)], I the marginally-uncensored index set.
// Normalizations: K_r(u) = V(u,...,u) for the max functional; K_r(u) = 1/u
// (parameter-free) for the mean functional. Rows without any marginal
// exceedance carry no V-based contribution and are skipped with a count
// (the likelihood conditions on at least one exceedance).
inline RParetoLoglikResult censored_loglik_rpareto(
    const RParetoSpec& spec, const MsModel& model,
    const ObservationMatrix& data, double u,
    const RParetoLoglikOptions& opt = {}) {
  if (!(u > 0.0))
    throw std::invalid_argument("censored_loglik_rpareto: threshold must be > 0");
  if (data.scale != MarginScale::pareto)
    throw std::invalid_argument(
        "censored_loglik_rpareto: data must be on the standard Pareto scale");
  const int d = model.dim();
  if (static_cast<int>(data.n_sites) != d)
    throw std::invalid_argument("censored_loglik_rpareto: data/site mismatch");

  double log_k;
  switch (spec.functional.tag) {
    case RiskFunctional::Tag::max: {
      const std::vector<double> uu(d, u);
      log_k = std::log(model.exponent_v(uu));
      break;
    }
    case RiskFunctional::Tag::mean:
      log_k = -std::log(u);  // parameter-free
      break;
    default:
      throw std::invalid_argument(
          std::string("censored_loglik_rpareto: normalization for the '") +
          spec.functional.name() + "' functional is not supported");
  }

  RParetoLoglikResult res;
  std::vector<double> terms(data.n_rows,
                            std::numeric_limits<double>::quiet_NaN());
  std::vector<int> status(data.n_rows, 0);  // 0 used, 1 below-thr, 2 no-exc
  parallel_for(data.n_rows, [&](std::size_t row) {
    std::vector<double> y(d);
    for (int j = 0; j < d; ++j) {
      y[j] = data.at(row, j);
      if (std::isnan(y[j]))
        throw std::invalid_argument(
            "censored_loglik_rpareto: missing entries are not supported");
    }
    if (!(risk_eval(spec.functional, y) > u)) {
      status[row] = 1;
      return;
    }
    std::vector<int> uncensored;
    std::vector<double> clipped(d);
    for (int j = 0; j < d; ++j) {
      if (y[j] > u) {
        uncensored.push_back(j);
        clipped[j] = y[j];
      } else {
        clipped[j] = u;
      }
    }
    if (uncensored.empty()) {
      status[row] = 2;
      return;
    }
    terms[row] = model.log_neg_v_partial(clipped, uncensored) - log_k;
  });

  for (std::size_t row = 0; row < data.n_rows; ++row) {
    if (status[row] == 1) {
      if (!opt.only_rows_with_exceedance)
        throw std::invalid_argument(
            "censored_loglik_rpareto: row " + std::to_string(row) +
            " has r(row) <= u; filter rows or set only_rows_with_exceedance");
      ++res.rows_skipped_below_threshold;
    } else if (status[row] == 2) {
      ++res.rows_skipped_fully_censored;
    } else {
      res.loglik += terms[row];
      ++res.rows_used;
    }
  }
  return res;
}

}  // namespace spex

#endif  // SPEX_RPARETO_HPP
