// Shared likelihood machinery: parameter transforms, derivative-free
// maximization, observed-information standard errors, stationary bootstrap
// and BIC.

#ifndef SPEX_INFERENCE_HPP
#define SPEX_INFERENCE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spex/data.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

// Per-parameter bijection between the natural scale and an unconstrained
// optimization scale.
struct ParamTransform {
  enum class Kind { identity, log_scale, logit, angle };
  Kind kind = Kind::identity;
  double lo = 0.0, hi = 1.0;  // logit range

  static ParamTransform identity() { return {Kind::identity, 0, 0}; }
  static ParamTransform log() { return {Kind::log_scale, 0, 0}; }
  static ParamTransform logit_range(double lo, double hi) {
    return {Kind::logit, lo, hi};
  }
  static ParamTransform angle() {
    return {Kind::logit, -1.5707963267948966, 1.5707963267948966};
  }

  double to_unconstrained(double nat) const {
    switch (kind) {
      case Kind::identity: return nat;
      case Kind::log_scale:
        if (!(nat > 0.0))
          throw std::domain_error("transform: value must be positive");
        return std::log(nat);
      case Kind::logit:
      case Kind::angle: {
        if (!(nat > lo && nat < hi))
          throw std::domain_error("transform: value outside logit range");
        return std::log((nat - lo) / (hi - nat));
      }
    }
    return nat;
  }

  double to_natural(double t) const {
    switch (kind) {
      case Kind::identity: return t;
      case Kind::log_scale: return std::exp(t);
      case Kind::logit:
      case Kind::angle: {
        const double s = 1.0 / (1.0 + std::exp(-t));
        return lo + (hi - lo) * s;
      }
    }
    return t;
  }

  // d(natural)/d(unconstrained), for delta-method standard errors.
  double dnat_dt(double t) const {
    switch (kind) {
      case Kind::identity: return 1.0;
      case Kind::log_scale: return std::exp(t);
      case Kind::logit:
      case Kind::angle: {
        const double s = 1.0 / (1.0 + std::exp(-t));
        return (hi - lo) * s * (1.0 - s);
      }
    }
    return 1.0;
  }
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> estimates;  // natural scale
  std::vector<double> stderrs;    // natural scale; NaN where unavailable
  std::vector<bool> se_flagged;   // true where the information matrix failed
  double loglik = -std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_effective = 0;
  bool converged = false;
  double censor_level = std::numeric_limits<double>::quiet_NaN();
  std::size_t evaluations = 0;
  std::vector<std::string> warnings;
};

inline double bic(double loglik, std::size_t k, std::size_t n) {
  if (n < 1) throw std::invalid_argument("bic: n must be >= 1");
  return -2.0 * loglik + static_cast<double>(k) * std::log(static_cast<double>(n));
}

struct OptimSettings {
  std::size_t max_evals = 50000;
  int restarts = 2;          // additional jittered starts beyond the first
  double jitter_frac = 0.1;  // relative jitter in transformed space
  double diameter_tol = 1e-6;
  double value_tol = 1e-8;
  std::uint64_t seed = 1;
};

using Objective = std::function<double(const std::vector<double>&)>;

namespace detail {

struct NmOutcome {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t evaluations = 0;
};

// Classic Nelder-Mead on an unconstrained space, minimizing.
inline NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start,
                             const OptimSettings& cfg) {
  const std::size_t n = start.size();
  NmOutcome out;
  std::vector<std::vector<double>> simplex(n + 1, start);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = 0.1 * std::max(std::fabs(start[i]), 1.0);
    simplex[i + 1][i] += step;
  }
  auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

  const double alpha = 1.0, gamma = 2.0, beta = 0.5, delta = 0.5;
  while (out.evaluations < cfg.max_evals) {
    // Order: best first.
    std::vector<std::size_t> idx(n + 1);
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      s2[i] = simplex[idx[i]];
      f2[i] = fv[idx[i]];
    }
    simplex.swap(s2);
    fv.swap(f2);

    double diam = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        diam = std::max(diam, std::fabs(simplex[i][j] - simplex[0][j]));
    const double spread = std::fabs(fv[n] - fv[0]);
    if (diam < cfg.diameter_tol && spread < cfg.value_tol &&
        std::isfinite(fv[0])) {
      out.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j] / n;

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j)
        x[j] = centroid[j] + coef * (centroid[j] - simplex[n][j]);
      return x;
    };

    const auto xr = blend(alpha);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = blend(gamma);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
    } else {
      const bool outside = fr < fv[n];
      const auto xc = blend(outside ? beta : -beta);
      const double fc = eval(xc);
      if (fc < std::min(fr, fv[n])) {
        simplex[n] = xc;
        fv[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j)
            simplex[i][j] = simplex[0][j] + delta * (simplex[i][j] - simplex[0][j]);
          fv[i] = eval(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= n; ++i)
    if (fv[i] < fv[best]) best = i;
  out.x = simplex[best];
  out.value = fv[best];
  return out;
}

}  // namespace detail

// Maximizes a log-likelihood over transformed parameters with Nelder-Mead
// and jittered restarts; returns the best run on the natural scale.
inline FitResult maximize(const Objective& loglik,
                          const std::vector<double>& init,
                          const std::vector<ParamTransform>& transforms,
                          const std::vector<std::string>& names = {},
                          const OptimSettings& settings = {}) {
  const std::size_t p = init.size();
  if (transforms.size() != p)
    throw std::invalid_argument("maximize: transform count mismatch");

  std::vector<double> t0(p);
  for (std::size_t j = 0; j < p; ++j)
    t0[j] = transforms[j].to_unconstrained(init[j]);

  auto to_natural = [&](const std::vector<double>& t) {
    std::vector<double> nat(p);
    for (std::size_t j = 0; j < p; ++j) nat[j] = transforms[j].to_natural(t[j]);
    return nat;
  };
  auto neg = [&](const std::vector<double>& t) {
    const double v = loglik(to_natural(t));
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  if (!std::isfinite(loglik(init)))
    throw std::invalid_argument("maximize: objective not finite at init");

  FitResult best;
  best.names = names;
  Rng rng(derive_seed(settings.seed, 0x6f7074));
  std::size_t total_evals = 0;
  bool any_finite = false;
  for (int run = 0; run <= settings.restarts; ++run) {
    std::vector<double> start = t0;
    if (run > 0) {
      for (std::size_t j = 0; j < p; ++j) {
        const double scale = settings.jitter_frac * std::max(std::fabs(t0[j]), 1.0);
        start[j] += scale * (2.0 * rng.uniform() - 1.0);
      }
    }
    const auto nm = detail::nelder_mead(neg, start, settings);
    total_evals += nm.evaluations;
    if (!std::isfinite(nm.value)) continue;
    if (!any_finite || -nm.value > best.loglik) {
      any_finite = true;
      best.estimates = to_natural(nm.x);
      best.loglik = -nm.value;
      best.converged = nm.converged;
    }
  }
  best.evaluations = total_evals;
  if (!any_finite)
    throw std::runtime_error("maximize: all restarts failed to find a finite value");
  if (best.names.empty()) {
    best.names.resize(p);
    for (std::size_t j = 0; j < p; ++j) best.names[j] = "p" + std::to_string(j);
  }
  best.stderrs.assign(p, std::numeric_limits<double>::quiet_NaN());
  best.se_flagged.assign(p, false);
  return best;
}

// Standard errors from the observed information: central-difference Hessian
// in the transformed space (Richardson-refined), inverted and mapped back to
// the natural scale by the delta method. Failures flag parameters instead of
// silently emitting values.
inline void observed_info_se(const Objective& loglik,
                             const std::vector<ParamTransform>& transforms,
                             FitResult& fit, double rel_step = 1e-4) {
  const std::size_t p = fit.estimates.size();
  std::vector<double> t(p);
  for (std::size_t j = 0; j < p; ++j)
    t[j] = transforms[j].to_unconstrained(fit.estimates[j]);

  auto f = [&](const std::vector<double>& tv) {
    std::vector<double> nat(p);
    for (std::size_t j = 0; j < p; ++j) nat[j] = transforms[j].to_natural(tv[j]);
    return loglik(nat);
  };

  auto hessian_at_step = [&](double shrink) {
    Eigen::MatrixXd h(p, p);
    const double f0 = f(t);
    for (std::size_t i = 0; i < p; ++i) {
      const double hi = shrink * rel_step * std::max(std::fabs(t[i]), 1.0);
      auto ti = t;
      ti[i] = t[i] + hi;
      const double fp = f(ti);
      ti[i] = t[i] - hi;
      const double fm = f(ti);
      h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
      for (std::size_t j = 0; j < i; ++j) {
        const double hj = shrink * rel_step * std::max(std::fabs(t[j]), 1.0);
        auto tij = t;
        tij[i] = t[i] + hi;
        tij[j] = t[j] + hj;
        const double fpp = f(tij);
        tij[j] = t[j] - hj;
        const double fpm = f(tij);
        tij[i] = t[i] - hi;
        const double fmm = f(tij);
        tij[j] = t[j] + hj;
        const double fmp = f(tij);
        h(i, j) = h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
      }
    }
    return h;
  };

  // Richardson: H ~ (4 H_{h/2} - H_h) / 3 removes the leading error term.
  const Eigen::MatrixXd h1 = hessian_at_step(1.0);
  const Eigen::MatrixXd h2 = hessian_at_step(0.5);
  const Eigen::MatrixXd hess = (4.0 * h2 - h1) / 3.0;

  fit.stderrs.assign(p, std::numeric_limits<double>::quiet_NaN());
  fit.se_flagged.assign(p, true);
  const Eigen::MatrixXd info = -hess;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    fit.warnings.push_back("observed information not positive definite");
    return;
  }
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  for (std::size_t j = 0; j < p; ++j) {
    const double var_t = cov(j, j);
    if (!(var_t > 0.0) || !std::isfinite(var_t)) {
      fit.warnings.push_back("flat or irregular direction for " +
                             (j < fit.names.size() ? fit.names[j]
                                                   : std::to_string(j)));
      continue;
    }
    const double jac = transforms[j].dnat_dt(t[j]);
    fit.stderrs[j] = std::fabs(jac) * std::sqrt(var_t);
    fit.se_flagged[j] = false;
  }
}

struct BootstrapResult {
  std::vector<std::string> names;
  std::vector<double> levels;                      // e.g. {0.05, 0.95}
  std::vector<std::vector<double>> quantiles;      // [param][level]
  std::vector<std::vector<double>> replicates;     // [replicate][param]
  std::size_t n_failures = 0;
};

// Politis-Romano stationary bootstrap over rows: geometric block lengths
// with the given mean, wrapping around the end of the series.
inline std::vector<std::size_t> stationary_bootstrap_indices(
    std::size_t n, double mean_block, Rng& rng) {
  std::vector<std::size_t> idx(n);
  const double p_new = 1.0 / mean_block;
  std::size_t cur = rng.below(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0) {
      if (rng.uniform() < p_new) {
        cur = rng.below(n);
      } else {
        cur = (cur + 1) % n;
      }
    }
    idx[t] = cur;
  }
  return idx;
}

inline ObservationMatrix resample_rows(const ObservationMatrix& data,
                                       const std::vector<std::size_t>& idx) {
  ObservationMatrix out(idx.size(), data.n_sites, data.scale);
  out.site_ids = data.site_ids;
  for (std::size_t t = 0; t < idx.size(); ++t) {
    const double* src = data.row(idx[t]);
    std::copy(src, src + data.n_sites, out.row(t));
    if (!data.row_ids.empty()) out.row_ids.push_back(data.row_ids[idx[t]]);
  }
  return out;
}

// Refits each resampled panel and reports per-parameter quantiles. The
// fitter returns std::nullopt on failure; failures are excluded and counted.
inline BootstrapResult stationary_bootstrap(
    const ObservationMatrix& data, double mean_block, std::size_t B,
    const std::function<std::optional<std::vector<double>>(
        const ObservationMatrix&)>& fitter,
    std::uint64_t seed, std::vector<double> levels = {0.05, 0.95},
    std::vector<std::string> names = {}) {
  if (data.n_rows < 2 * static_cast<std::size_t>(mean_block))
    throw std::invalid_argument("bootstrap: need n >= 2 * mean_block");
  std::vector<std::optional<std::vector<double>>> results(B);
  parallel_for(B, [&](std::size_t b) {
    Rng rng(derive_seed(seed, b));
    const auto idx = stationary_bootstrap_indices(data.n_rows, mean_block, rng);
    results[b] = fitter(resample_rows(data, idx));
  });

  BootstrapResult out;
  out.names = std::move(names);
  out.levels = std::move(levels);
  for (auto& r : results) {
    if (r) {
      out.replicates.push_back(*r);
    } else {
      ++out.n_failures;
    }
  }
  if (out.replicates.empty()) return out;
  const std::size_t p = out.replicates.front().size();
  out.quantiles.assign(p, std::vector<double>(out.levels.size()));
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double> v;
    v.reserve(out.replicates.size());
    for (const auto& r : out.replicates) v.push_back(r[j]);
    std::sort(v.begin(), v.end());
    for (std::size_t q = 0; q < out.levels.size(); ++q) {
      const double h = (v.size() - 1) * out.levels[q];
      const std::size_t k = static_cast<std::size_t>(std::floor(h));
      const double frac = h - k;
      out.quantiles[j][q] =
          k + 1 < v.size() ? v[k] * (1.0 - frac) + v[k + 1] * frac : v[k];
    }
  }
  return out;
}

}  // namespace spex

#endif  // SPEX_INFERENCE_HPP
