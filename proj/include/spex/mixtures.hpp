// Random scale mixtures over a Gaussian dependence structure: the
// Pareto/Weibull hybrid scale mixture (HOT), the Pareto power-interpolation
// model (HW), Gaussian location mixtures, and the plain Gaussian copula.
// Provides joint CDFs by one-dimensional quadrature over the mixing
// variable, censored likelihoods, and simulation.

#ifndef SPEX_MIXTURES_HPP
#define SPEX_MIXTURES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spex/covariance.hpp"
#include "spex/data.hpp"
#include "spex/dist.hpp"
#include "spex/gaussian.hpp"
#include "spex/margins.hpp"
#include "spex/mvn.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

struct GaussianCopulaSpec {
  CovarianceSpec cov;
};

// Scale mixture X = R W with W standard Gaussian and mixing distribution
// F_R(r) = 1 - exp{-gamma (r^beta - 1)/beta}, r >= 1. beta = 0 is the
// Pareto limit 1 - r^-gamma (asymptotic dependence); beta > 0 is
// Weibull-tailed (asymptotic independence).
struct HotSpec {
  double beta = 1.0;   // >= 0; 0 means the Pareto limit
  double gamma = 1.0;  // > 0
  CovarianceSpec cov;

  void validate() const {
    if (!(beta >= 0.0)) throw std::invalid_argument("hot: beta must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("hot: gamma must be > 0");
    cov.validate();
  }
};

// X = R^delta W^(1-delta) with R unit Pareto and W a Gaussian copula
// process with unit Pareto margins. delta > 1/2 gives asymptotic
// dependence, delta < 1/2 asymptotic independence.
struct HwSpec {
  double delta = 0.5;  // in (0,1)
  CovarianceSpec cov;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0))
      throw std::invalid_argument("hw: delta must lie in (0,1)");
    cov.validate();
  }
};

// Location mixture X = R + W with exponential-tailed R (rate theta) and
// standard Gaussian W. Simulation and chi only; no likelihood fitting.
struct LocationMixSpec {
  double theta = 1.0;  // exponential rate > 0
  CovarianceSpec cov;

  void validate() const {
    if (!(theta > 0.0))
      throw std::invalid_argument("location mixture: theta must be > 0");
    cov.validate();
  }
};

// ---------------------------------------------------------------------------
// Mixing distribution of the HOT model.

inline double hot_fr_cdf(double r, const HotSpec& spec) {
  spec.validate();
  if (r < 1.0) return 0.0;
  if (spec.beta < kShapeEps) return 1.0 - std::pow(r, -spec.gamma);
  return 1.0 -
         std::exp(-spec.gamma * (std::pow(r, spec.beta) - 1.0) / spec.beta);
}

inline double hot_fr_pdf(double r, const HotSpec& spec) {
  spec.validate();
  if (r < 1.0) return 0.0;
  if (spec.beta < kShapeEps)
    return spec.gamma * std::pow(r, -spec.gamma - 1.0);
  return spec.gamma * std::pow(r, spec.beta - 1.0) *
         std::exp(-spec.gamma * (std::pow(r, spec.beta) - 1.0) / spec.beta);
}

inline double hot_fr_quantile(double p, const HotSpec& spec) {
  spec.validate();
  if (!(p >= 0.0 && p < 1.0))
    throw std::domain_error("hot_fr_quantile: p must lie in [0,1)");
  if (spec.beta < kShapeEps) return std::pow(1.0 - p, -1.0 / spec.gamma);
  return std::pow(1.0 - spec.beta * std::log1p(-p) / spec.gamma,
                  1.0 / spec.beta);
}

enum class HotFrKind { cdf, pdf, quantile };
inline double hot_fr(double r, const HotSpec& spec, HotFrKind kind) {
  switch (kind) {
    case HotFrKind::cdf: return hot_fr_cdf(r, spec);
    case HotFrKind::pdf: return hot_fr_pdf(r, spec);
    case HotFrKind::quantile: return hot_fr_quantile(r, spec);
  }
  throw std::logic_error("hot_fr: bad kind");
}

// ---------------------------------------------------------------------------
// Quadrature helper: adaptive Gauss-Kronrod with a fixed-panel fallback.

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool adaptive_converged = true;
};

// Scale-mixture integrands can develop a boundary layer where the mixing
// radius pushes coordinates onto the edge of the support (the upper limit
// of the HW integral). The square-root substitution
// t = lo + (hi-lo)(1 - (1-s)^2) clusters nodes at that endpoint and makes
// such integrands smooth; for already-smooth integrands it is harmless.
template <typename Fn>
QuadratureResult integrate_unit(const Fn& f, double lo = 0.0, double hi = 1.0,
                                double abs_target = 1e-8) {
  using boost::math::quadrature::gauss_kronrod;
  const double width = hi - lo;
  auto g = [&](double s) {
    const double om = 1.0 - s;
    return f(lo + width * (1.0 - om * om)) * 2.0 * om * width;
  };
  QuadratureResult out;
  double err = 0.0;
  out.value = gauss_kronrod<double, 15>::integrate(g, 0.0, 1.0, 12, 1e-10, &err);
  out.error = err;
  if (!(err <= std::max(abs_target, 1e-7 * std::fabs(out.value))) ||
      !std::isfinite(out.value)) {
    // Fallback: fixed rule, 14 panels of GK15 (~200 abscissae), with the
    // panel-sum error report.
    out.adaptive_converged = false;
    out.value = 0.0;
    out.error = 0.0;
    const int panels = 14;
    for (int p = 0; p < panels; ++p) {
      double perr = 0.0;
      out.value += gauss_kronrod<double, 15>::integrate(
          g, static_cast<double>(p) / panels,
          static_cast<double>(p + 1) / panels, 0, 0.0, &perr);
      out.error += perr;
    }
    if (!std::isfinite(out.value))
      throw std::runtime_error("quadrature failed to converge (non-finite)");
  }
  return out;
}

// Fixed-panel rule for integrands with internal QMC noise, where adaptive
// refinement would chase the noise floor. Uses the same endpoint
// substitution.
template <typename Fn>
QuadratureResult integrate_fixed(const Fn& f, double lo, double hi,
                                 int panels = 14) {
  using boost::math::quadrature::gauss_kronrod;
  const double width = hi - lo;
  auto g = [&](double s) {
    const double om = 1.0 - s;
    return f(lo + width * (1.0 - om * om)) * 2.0 * om * width;
  };
  QuadratureResult out;
  out.adaptive_converged = false;
  for (int p = 0; p < panels; ++p) {
    double perr = 0.0;
    out.value += gauss_kronrod<double, 15>::integrate(
        g, static_cast<double>(p) / panels,
        static_cast<double>(p + 1) / panels, 0, 0.0, &perr);
    out.error += perr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Margins.

// HOT margins F1(x) = int Phi(x/r) dF_R(r) on the real line, evaluated by
// quadrature on t = F_R(r) and inverted by bracketed bisection (tolerance
// 1e-10). prepare() builds a bracketing table so that repeated inversions
// inside likelihoods only need a few Newton polish steps.
class HotMargins {
 public:
  explicit HotMargins(const HotSpec& spec) : spec_(spec) { spec.validate(); }

  double cdf(double x) const {
    return integrate_unit([&](double t) {
             return norm_cdf(x / hot_fr_quantile(t, spec_));
           }).value;
  }

  double pdf(double x) const {
    return integrate_unit([&](double t) {
             const double r = hot_fr_quantile(t, spec_);
             return norm_pdf(x / r) / r;
           }).value;
  }

  // Builds a monotone (x, F(x)) table covering [u_lo, u_hi]. Call before
  // concurrent quantile() use; the table is read-only afterwards.
  void prepare(double u_lo, double u_hi, int grid = 256) {
    const double x_lo = bisect(u_lo), x_hi = bisect(u_hi);
    grid_x_.resize(grid);
    grid_u_.resize(grid);
    for (int k = 0; k < grid; ++k) {
      grid_x_[k] = x_lo + (x_hi - x_lo) * k / (grid - 1.0);
      grid_u_[k] = cdf(grid_x_[k]);
    }
  }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("hot quantile: u must lie in (0,1)");
    if (!grid_u_.empty() && u >= grid_u_.front() && u <= grid_u_.back()) {
      const auto it = std::lower_bound(grid_u_.begin(), grid_u_.end(), u);
      const std::size_t k = it - grid_u_.begin();
      double x = k == 0 ? grid_x_[0]
                        : grid_x_[k - 1] + (grid_x_[k] - grid_x_[k - 1]) *
                                               (u - grid_u_[k - 1]) /
                                               (grid_u_[k] - grid_u_[k - 1]);
      for (int it2 = 0; it2 < 4; ++it2) {
        const double f = cdf(x) - u;
        const double d = pdf(x);
        if (!(d > 0.0)) break;
        const double step = f / d;
        x -= step;
        if (std::fabs(step) < 1e-11) break;
      }
      return x;
    }
    return bisect(u);
  }

 private:
  double bisect(double u) const {
    double lo = -2.0, hi = 2.0;
    while (cdf(lo) > u) lo *= 2.0;
    while (cdf(hi) < u) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  HotSpec spec_;
  std::vector<double> grid_x_, grid_u_;
};

// HW margins have a closed form: log X is a sum of independent
// exponentials with rates 1/delta and 1/(1-delta).
struct HwMargins {
  double delta;

  explicit HwMargins(const HwSpec& spec) : delta(spec.delta) {
    spec.validate();
  }

  double cdf(double x) const {
    if (x <= 1.0) return 0.0;
    const double a = 1.0 / delta, b = 1.0 / (1.0 - delta);
    const double t = std::log(x);
    if (std::fabs(a - b) < 1e-9) return 1.0 - (1.0 + 2.0 * t) * std::exp(-2.0 * t);
    return 1.0 - (b * std::exp(-a * t) - a * std::exp(-b * t)) / (b - a);
  }

  double pdf(double x) const {
    if (x <= 1.0) return 0.0;
    const double a = 1.0 / delta, b = 1.0 / (1.0 - delta);
    const double t = std::log(x);
    if (std::fabs(a - b) < 1e-9) return 4.0 * t * std::exp(-2.0 * t) / x;
    return (a * b / (b - a)) * (std::exp(-a * t) - std::exp(-b * t)) / x;
  }

  double quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
      throw std::domain_error("hw quantile: u must lie in (0,1)");
    double lo = 1.0, hi = 2.0;
    while (cdf(hi) < u) hi *= 2.0;
    for (int it = 0; it < 200 && (hi - lo) > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

// ---------------------------------------------------------------------------
// Joint distribution functions (eq. of the scale-mixture form).

struct MixtureCdfOptions {
  QmcAccuracy inner = {2048, 4, 0.0};  // for D >= 3 Gaussian rectangles
  std::uint64_t seed = 0x11d7;
};

namespace detail {

inline double gaussian_rectangle(const std::vector<double>& upper,
                                 const Eigen::MatrixXd& corr,
                                 const QmcAccuracy& acc, std::uint64_t seed) {
  const int d = static_cast<int>(upper.size());
  if (d == 1) return norm_cdf(upper[0]);
  if (d == 2) return bvn_cdf(upper[0], upper[1], corr(0, 1));
  return mvn_cdf(upper, corr, acc, seed).prob;
}

// Gaussian-coordinate threshold at radius r: HOT uses x/r directly, HW maps
// through the unit-Pareto copula.
inline double hw_gauss_coord(double x, double r, double delta) {
  // W = (x r^-delta)^(1/(1-delta)); z = Phi^-1(1 - 1/W).
  const double logw = (std::log(x) - delta * std::log(r)) / (1.0 - delta);
  if (logw <= 0.0) return -std::numeric_limits<double>::infinity();
  const double q = -std::expm1(-logw);  // 1 - 1/W, accurate near 0
  if (q <= 0.0) return -std::numeric_limits<double>::infinity();
  return norm_quantile(q);
}

}  // namespace detail

// F_X(x) for the HOT model: integral over t = F_R(r) of the Gaussian
// rectangle at x/r.
inline QuadratureResult mixture_cdf(const HotSpec& spec,
                                    const Eigen::MatrixXd& corr,
                                    const std::vector<double>& x,
                                    const MixtureCdfOptions& opt = {}) {
  spec.validate();
  const int d = static_cast<int>(x.size());
  if (corr.rows() != d)
    throw std::invalid_argument("mixture_cdf: dimension mismatch");
  auto integrand = [&](double t) {
    const double r = hot_fr_quantile(t, spec);
    std::vector<double> upper(d);
    for (int j = 0; j < d; ++j) upper[j] = x[j] / r;
    return detail::gaussian_rectangle(upper, corr, opt.inner, opt.seed);
  };
  return d <= 2 ? integrate_unit(integrand)
                : integrate_fixed(integrand, 0.0, 1.0);
}

// F_X(x) for the HW model: the mixing form is over R^delta with W^(1-delta),
// with the integrand vanishing once any coordinate forces W below 1.
inline QuadratureResult mixture_cdf(const HwSpec& spec,
                                    const Eigen::MatrixXd& corr,
                                    const std::vector<double>& x,
                                    const MixtureCdfOptions& opt = {}) {
  spec.validate();
  const int d = static_cast<int>(x.size());
  if (corr.rows() != d)
    throw std::invalid_argument("mixture_cdf: dimension mismatch");
  double r_max = std::numeric_limits<double>::infinity();
  for (double v : x) {
    if (v <= 1.0) return {0.0, 0.0, true};
    r_max = std::min(r_max, std::pow(v, 1.0 / spec.delta));
  }
  const double t_hi = 1.0 - 1.0 / r_max;  // t = F_R(r) = 1 - 1/r
  auto integrand = [&](double t) {
    const double r = 1.0 / (1.0 - t);
    std::vector<double> upper(d);
    for (int j = 0; j < d; ++j)
      upper[j] = detail::hw_gauss_coord(x[j], r, spec.delta);
    return detail::gaussian_rectangle(upper, corr, opt.inner, opt.seed);
  };
  return d <= 2 ? integrate_unit(integrand, 0.0, t_hi)
                : integrate_fixed(integrand, 0.0, t_hi);
}

// ---------------------------------------------------------------------------
// Censored likelihood.

struct MixtureLikOptions {
  QmcAccuracy inner = {512, 2, 0.0};  // censored-block rectangles
  std::uint64_t seed = 0x11d7;
  int fixed_panels = 10;  // quadrature panels for partially censored rows
};

namespace detail {

// Per censoring-pattern Gaussian blocks, reused across rows and radii.
struct PatternBlocks {
  std::vector<int> unc, cen;
  Eigen::MatrixXd chol_uu;     // Cholesky of Sigma_UU
  Eigen::MatrixXd regression;  // Sigma_CU Sigma_UU^-1
  Eigen::MatrixXd cond_corr;   // conditional correlation of the C block
  std::vector<double> cond_sd;
  double log_norm = 0.0;  // -(q/2) log(2 pi) - 0.5 log|Sigma_UU|
};

inline PatternBlocks make_pattern(const Eigen::MatrixXd& corr,
                                  const std::vector<int>& unc,
                                  const std::vector<int>& cen) {
  PatternBlocks pb;
  pb.unc = unc;
  pb.cen = cen;
  const int q = static_cast<int>(unc.size());
  const int c = static_cast<int>(cen.size());
  if (q > 0) {
    Eigen::MatrixXd suu(q, q);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) suu(a, b) = corr(unc[a], unc[b]);
    Eigen::LLT<Eigen::MatrixXd> llt(suu);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("censored likelihood: block not PD");
    pb.chol_uu = llt.matrixL();
    double logdet = 0.0;
    for (int a = 0; a < q; ++a) logdet += 2.0 * std::log(pb.chol_uu(a, a));
    pb.log_norm = -0.5 * (q * std::log(2.0 * kPi) + logdet);
    if (c > 0) {
      Eigen::MatrixXd scu(c, q);
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < q; ++b) scu(a, b) = corr(cen[a], unc[b]);
      pb.regression = llt.solve(scu.transpose()).transpose();  // c x q
      Eigen::MatrixXd scc(c, c);
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b) scc(a, b) = corr(cen[a], cen[b]);
      const Eigen::MatrixXd cond = scc - pb.regression * scu.transpose();
      pb.cond_sd.resize(c);
      pb.cond_corr.resize(c, c);
      for (int a = 0; a < c; ++a) pb.cond_sd[a] = std::sqrt(cond(a, a));
      for (int a = 0; a < c; ++a)
        for (int b = 0; b < c; ++b)
          pb.cond_corr(a, b) = cond(a, b) / (pb.cond_sd[a] * pb.cond_sd[b]);
    }
  } else if (c > 0) {
    pb.cond_sd.assign(c, 1.0);
    pb.cond_corr.resize(c, c);
    for (int a = 0; a < c; ++a)
      for (int b = 0; b < c; ++b) pb.cond_corr(a, b) = corr(cen[a], cen[b]);
  }
  return pb;
}

// Density of the uncensored block times the conditional rectangle of the
// censored block, all on the Gaussian coordinate scale.
inline double pattern_integrand(const PatternBlocks& pb,
                                const Eigen::VectorXd& z_unc,
                                const std::vector<double>& z_cen,
                                const QmcAccuracy& acc, std::uint64_t seed) {
  const int q = static_cast<int>(pb.unc.size());
  const int c = static_cast<int>(pb.cen.size());
  double log_dens = 0.0;
  Eigen::VectorXd mean;
  if (q > 0) {
    const Eigen::VectorXd half =
        pb.chol_uu.triangularView<Eigen::Lower>().solve(z_unc);
    log_dens = pb.log_norm - 0.5 * half.squaredNorm();
    if (c > 0) mean = pb.regression * z_unc;
  } else {
    mean = Eigen::VectorXd::Zero(c);
  }
  double rect = 1.0;
  if (c > 0) {
    std::vector<double> upper(c);
    for (int a = 0; a < c; ++a) {
      if (z_cen[a] == -std::numeric_limits<double>::infinity()) return 0.0;
      upper[a] = (z_cen[a] - mean(a)) / pb.cond_sd[a];
    }
    rect = gaussian_rectangle(upper, pb.cond_corr, acc, seed);
  }
  return std::exp(log_dens) * rect;
}

}  // namespace detail

// Kinds of model the censored mixture likelihood accepts.
enum class MixtureFamily { gaussian_copula, hot, hw };

struct CensoredLoglikResult {
  double loglik = 0.0;
  std::size_t n_rows = 0;
  std::size_t n_fully_censored = 0;
};

// Censored log-likelihood on uniform-scale data: sites above level u enter
// through density coordinates, sites below through the partial CDF at the
// threshold; fully censored rows contribute the joint CDF at the threshold.
// Marginal transforms to the model's native scale carry their Jacobians.
class CensoredMixtureLoglik {
 public:
  CensoredMixtureLoglik(GaussianCopulaSpec spec, const SiteSet& sites)
      : family_(MixtureFamily::gaussian_copula),
        corr_(correlation_matrix(sites, spec.cov)) {}

  CensoredMixtureLoglik(HotSpec spec, const SiteSet& sites)
      : family_(MixtureFamily::hot), hot_(spec),
        corr_(correlation_matrix(sites, spec.cov)) {}

  CensoredMixtureLoglik(HwSpec spec, const SiteSet& sites)
      : family_(MixtureFamily::hw), hw_(spec),
        corr_(correlation_matrix(sites, spec.cov)) {}

  CensoredLoglikResult evaluate(const ObservationMatrix& data, double u,
                                const MixtureLikOptions& opt = {}) const {
    if (data.scale != MarginScale::uniform)
      throw std::invalid_argument(
          "censored_loglik_mixture: data must be on the uniform scale");
    if (!(u > 0.0 && u < 1.0))
      throw std::invalid_argument("censored_loglik_mixture: u must be in (0,1)");
    const int d = static_cast<int>(data.n_sites);
    if (corr_.rows() != d)
      throw std::invalid_argument("censored_loglik_mixture: dimension mismatch");

    // Native thresholds and marginal machinery per family.
    const double z_thr = norm_quantile(u);
    double x_thr = 0.0;
    HotMargins hot_margins{hot_ ? *hot_ : HotSpec{}};
    HwMargins hw_margins{hw_ ? *hw_ : HwSpec{}};
    if (family_ == MixtureFamily::hot) {
      double u_max = u;
      for (double v : data.values)
        if (v > u_max) u_max = v;
      hot_margins.prepare(u * 0.999, std::min(1.0 - 1e-12, u_max * 1.0001));
      x_thr = hot_margins.quantile(u);
    }
    if (family_ == MixtureFamily::hw) x_thr = hw_margins.quantile(u);

    // Group rows by censoring pattern; cache the Gaussian blocks.
    std::map<std::vector<bool>, detail::PatternBlocks> patterns;
    std::vector<const detail::PatternBlocks*> row_pattern(data.n_rows);
    std::vector<std::vector<bool>> masks(data.n_rows);
    for (std::size_t i = 0; i < data.n_rows; ++i) {
      std::vector<bool> mask(d, false);
      for (int j = 0; j < d; ++j) {
        const double v = data.at(i, j);
        if (std::isnan(v))
          throw std::invalid_argument(
              "censored_loglik_mixture: missing entries are not supported");
        if (!(v > 0.0 && v < 1.0))
          throw std::invalid_argument(
              "censored_loglik_mixture: uniform data must lie in (0,1)");
        mask[j] = v > u;
      }
      masks[i] = std::move(mask);
    }
    for (std::size_t i = 0; i < data.n_rows; ++i) {
      auto it = patterns.find(masks[i]);
      if (it == patterns.end()) {
        std::vector<int> unc, cen;
        for (int j = 0; j < d; ++j)
          (masks[i][j] ? unc : cen).push_back(j);
        it = patterns.emplace(masks[i],
                              detail::make_pattern(corr_, unc, cen)).first;
      }
      row_pattern[i] = &it->second;
    }

    // Fully censored rows share one value; compute it once.
    double log_full_censor = 0.0;
    bool have_full = false;
    for (std::size_t i = 0; i < data.n_rows && !have_full; ++i)
      have_full = row_pattern[i]->unc.empty();
    if (have_full) {
      if (family_ == MixtureFamily::gaussian_copula) {
        std::vector<double> upper(d, z_thr);
        log_full_censor = std::log(
            detail::gaussian_rectangle(upper, corr_, opt.inner, opt.seed));
      } else {
        const std::vector<double> xts(d, x_thr);
        const auto q = family_ == MixtureFamily::hot
                           ? mixture_cdf(*hot_, corr_, xts,
                                         {opt.inner, opt.seed})
                           : mixture_cdf(*hw_, corr_, xts,
                                         {opt.inner, opt.seed});
        log_full_censor = std::log(q.value);
      }
    }

    CensoredLoglikResult result;
    result.n_rows = data.n_rows;
    std::vector<double> terms(data.n_rows);
    parallel_for(data.n_rows, [&](std::size_t i) {
      const auto& pb = *row_pattern[i];
      if (pb.unc.empty()) {
        terms[i] = log_full_censor;
        return;
      }
      terms[i] = row_loglik(data, i, pb, u, z_thr, x_thr, hot_margins,
                            hw_margins, opt);
      if (!std::isfinite(terms[i]))
        throw std::runtime_error(
            "censored_loglik_mixture: non-finite contribution at replicate " +
            std::to_string(i));
    });
    for (std::size_t i = 0; i < data.n_rows; ++i) {
      result.loglik += terms[i];
      if (row_pattern[i]->unc.empty()) ++result.n_fully_censored;
    }
    return result;
  }

  const Eigen::MatrixXd& corr() const { return corr_; }

 private:
  double row_loglik(const ObservationMatrix& data, std::size_t i,
                    const detail::PatternBlocks& pb, double u, double z_thr,
                    double x_thr, const HotMargins& hot_margins,
                    const HwMargins& hw_margins,
                    const MixtureLikOptions& opt) const {
    const int q = static_cast<int>(pb.unc.size());
    const std::uint64_t seed = derive_seed(opt.seed, i);

    if (family_ == MixtureFamily::gaussian_copula) {
      Eigen::VectorXd z_unc(q);
      double log_jac = 0.0;
      for (int a = 0; a < q; ++a) {
        const double uu = data.at(i, pb.unc[a]);
        z_unc(a) = norm_quantile(uu);
        log_jac -= std::log(norm_pdf(z_unc(a)));
      }
      const std::vector<double> z_cen(pb.cen.size(), z_thr);
      return std::log(detail::pattern_integrand(pb, z_unc, z_cen, opt.inner,
                                                seed)) +
             log_jac;
    }

    // Scale mixtures: integrate the conditional Gaussian structure over the
    // mixing radius, on the probability scale t of R.
    std::vector<double> x_unc(q);
    double log_jac = 0.0;
    for (int a = 0; a < q; ++a) {
      const double uu = data.at(i, pb.unc[a]);
      if (family_ == MixtureFamily::hot) {
        x_unc[a] = hot_margins.quantile(uu);
        log_jac -= std::log(hot_margins.pdf(x_unc[a]));
      } else {
        x_unc[a] = hw_margins.quantile(uu);
        log_jac -= std::log(hw_margins.pdf(x_unc[a]));
      }
    }

    double t_hi = 1.0;
    if (family_ == MixtureFamily::hw) {
      // The integrand vanishes once the radius pushes any density
      // coordinate (or, when present, the censoring threshold) below the
      // Pareto support of W.
      double r_max = std::numeric_limits<double>::infinity();
      if (!pb.cen.empty()) r_max = std::pow(x_thr, 1.0 / hw_->delta);
      for (double v : x_unc)
        r_max = std::min(r_max, std::pow(v, 1.0 / hw_->delta));
      t_hi = 1.0 - 1.0 / r_max;
    }

    auto integrand = [&](double t) {
      double r;
      Eigen::VectorXd z_unc(q);
      std::vector<double> z_cen(pb.cen.size());
      double jac = 1.0;
      if (family_ == MixtureFamily::hot) {
        r = hot_fr_quantile(t, *hot_);
        for (int a = 0; a < q; ++a) {
          z_unc(a) = x_unc[a] / r;
          jac /= r;
        }
        for (std::size_t a = 0; a < pb.cen.size(); ++a) z_cen[a] = x_thr / r;
      } else {
        r = 1.0 / (1.0 - t);
        const double delta = hw_->delta;
        for (int a = 0; a < q; ++a) {
          const double z = detail::hw_gauss_coord(x_unc[a], r, delta);
          if (z == -std::numeric_limits<double>::infinity()) return 0.0;
          z_unc(a) = z;
          // dz/dx = 1 / (W (1-delta) x phi(z)).
          const double logw =
              (std::log(x_unc[a]) - delta * std::log(r)) / (1.0 - delta);
          jac /= std::exp(logw) * (1.0 - delta) * x_unc[a] * norm_pdf(z);
        }
        for (std::size_t a = 0; a < pb.cen.size(); ++a)
          z_cen[a] = detail::hw_gauss_coord(x_thr, r, delta);
      }
      return jac *
             detail::pattern_integrand(pb, z_unc, z_cen, opt.inner, seed);
    };
    const auto quad = pb.cen.empty() && q <= 2
                          ? integrate_unit(integrand, 0.0, t_hi)
                          : integrate_fixed(integrand, 0.0, t_hi,
                                            opt.fixed_panels);
    return std::log(quad.value) + log_jac;
  }

  MixtureFamily family_;
  std::optional<HotSpec> hot_;
  std::optional<HwSpec> hw_;
  Eigen::MatrixXd corr_;
};

// Convenience wrapper matching the operation signature.
template <typename Spec>
CensoredLoglikResult censored_loglik_mixture(const Spec& spec,
                                             const SiteSet& sites,
                                             const ObservationMatrix& data,
                                             double u,
                                             const MixtureLikOptions& opt = {}) {
  return CensoredMixtureLoglik(spec, sites).evaluate(data, u, opt);
}

// ---------------------------------------------------------------------------
// Simulation. All draws are reproducible per (seed, replicate).

inline ObservationMatrix mixture_simulate(const HotSpec& spec,
                                          const SiteSet& sites, std::size_t n,
                                          std::uint64_t seed) {
  spec.validate();
  const auto chol = cholesky_with_jitter(correlation_matrix(sites, spec.cov));
  const std::size_t d = sites.size();
  ObservationMatrix out(n, d, MarginScale::raw);
  out.site_ids = sites.labels;
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0x401));
    const double r = hot_fr_quantile(rng.uniform(), spec);
    Eigen::VectorXd z(d);
    for (std::size_t j = 0; j < d; ++j) z(j) = rng.normal();
    const Eigen::VectorXd w = chol * z;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = r * w(j);
  });
  return out;
}

inline ObservationMatrix mixture_simulate(const HwSpec& spec,
                                          const SiteSet& sites, std::size_t n,
                                          std::uint64_t seed) {
  spec.validate();
  const auto chol = cholesky_with_jitter(correlation_matrix(sites, spec.cov));
  const std::size_t d = sites.size();
  ObservationMatrix out(n, d, MarginScale::raw);
  out.site_ids = sites.labels;
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0x402));
    const double r = rng.pareto();
    Eigen::VectorXd z(d);
    for (std::size_t j = 0; j < d; ++j) z(j) = rng.normal();
    const Eigen::VectorXd g = chol * z;
    for (std::size_t j = 0; j < d; ++j) {
      const double w = 1.0 / norm_sf(g(j));  // unit Pareto margins
      out.at(i, j) =
          std::pow(r, spec.delta) * std::pow(w, 1.0 - spec.delta);
    }
  });
  return out;
}

inline ObservationMatrix mixture_simulate(const LocationMixSpec& spec,
                                          const SiteSet& sites, std::size_t n,
                                          std::uint64_t seed) {
  spec.validate();
  const auto chol = cholesky_with_jitter(correlation_matrix(sites, spec.cov));
  const std::size_t d = sites.size();
  ObservationMatrix out(n, d, MarginScale::raw);
  out.site_ids = sites.labels;
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0x403));
    const double r = rng.exponential() / spec.theta;
    Eigen::VectorXd z(d);
    for (std::size_t j = 0; j < d; ++j) z(j) = rng.normal();
    const Eigen::VectorXd w = chol * z;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = r + w(j);
  });
  return out;
}

inline ObservationMatrix gaussian_copula_simulate(const GaussianCopulaSpec& spec,
                                                  const SiteSet& sites,
                                                  std::size_t n,
                                                  std::uint64_t seed) {
  return gp_simulate(sites, spec.cov, n, seed);
}

}  // namespace spex

#endif  // SPEX_MIXTURES_HPP
