// Conditional spatial extremes model on Laplace margins: normalization
// functions a and b, the delta-Laplace residual margins, the residual
// Gaussian law conditioned to vanish at the conditioning site, single-site
// and composite likelihoods, conditional simulation, and the
// importance-sampled exceedance probability of the spatial maximum.

#ifndef SPEX_CONDITIONAL_HPP
#define SPEX_CONDITIONAL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spex/gaussian.hpp"
#include "spex/margins.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

enum class SceBForm { one_plus_a_pow_beta, x_pow_beta };

struct SceSpec {
  // alpha(h) = 1 for h <= delta_lag, exp{-(h-delta_lag)^kappa / lambda}
  // beyond: asymptotic dependence up to the lag, weakening dependence after.
  double kappa = 1.0;      // > 0
  double lambda = 1.0;     // > 0
  double delta_lag = 0.0;  // >= 0
  double beta = 0.5;       // b exponent in [0,1)
  SceBForm b_form = SceBForm::x_pow_beta;
  double mu = 0.0;     // residual Gaussian mean
  double sigma = 1.0;  // residual Gaussian scale > 0
  CovarianceSpec cov;  // residual Gaussian correlation
  double delta1 = 1.0;  // delta(h) = 1 + exp{-(h/delta1)^delta2} in (1,2]
  double delta2 = 1.0;

  void validate() const {
    if (!(kappa > 0.0)) throw std::invalid_argument("sce: kappa must be > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("sce: lambda must be > 0");
    if (!(delta_lag >= 0.0))
      throw std::invalid_argument("sce: delta_lag must be >= 0");
    if (!(beta >= 0.0 && beta < 1.0))
      throw std::invalid_argument("sce: beta must lie in [0,1)");
    if (!(sigma > 0.0)) throw std::invalid_argument("sce: sigma must be > 0");
    if (!(delta1 > 0.0 && delta2 > 0.0))
      throw std::invalid_argument("sce: delta1, delta2 must be > 0");
    cov.validate();
  }
};

inline double alpha_fn(double h, const SceSpec& spec) {
  spec.validate();
  if (h < 0.0) throw std::invalid_argument("alpha_fn: h must be >= 0");
  if (h <= spec.delta_lag) return 1.0;
  return std::exp(-std::pow(h - spec.delta_lag, spec.kappa) / spec.lambda);
}

// Normalizations a(x) = alpha(h) x and b per the chosen form.
inline std::pair<double, double> norm_ab(double x, double h,
                                         const SceSpec& spec) {
  const double a = alpha_fn(h, spec) * x;
  double b;
  if (spec.b_form == SceBForm::one_plus_a_pow_beta) {
    b = 1.0 + std::pow(std::max(a, 0.0), spec.beta);
  } else {
    if (!(x > 0.0))
      throw std::invalid_argument(
          "norm_ab: b = x^beta requires a positive conditioning value");
    b = std::pow(x, spec.beta);
  }
  return {a, b};
}

// ---------------------------------------------------------------------------
// Delta-Laplace (exponential power) distribution: Laplace at delta = 1,
// Gaussian shape at delta = 2 (then equal to N(mu, sigma^2/2)).

struct DeltaLaplaceParams {
  double mu = 0.0;
  double sigma = 1.0;
  double delta = 1.0;

  void validate() const {
    if (!(sigma > 0.0) || !(delta > 0.0))
      throw std::invalid_argument("delta-laplace: sigma, delta must be > 0");
  }
};

inline double dlaplace_pdf(double z, const DeltaLaplaceParams& p) {
  p.validate();
  const double a = std::fabs((z - p.mu) / p.sigma);
  return p.delta / (2.0 * p.sigma * std::tgamma(1.0 / p.delta)) *
         std::exp(-std::pow(a, p.delta));
}

inline double dlaplace_log_pdf(double z, const DeltaLaplaceParams& p) {
  const double a = std::fabs((z - p.mu) / p.sigma);
  return std::log(p.delta) - std::log(2.0 * p.sigma) -
         std::lgamma(1.0 / p.delta) - std::pow(a, p.delta);
}

inline double dlaplace_cdf(double z, const DeltaLaplaceParams& p) {
  p.validate();
  const double a = std::fabs((z - p.mu) / p.sigma);
  const double tail = 0.5 * gamma_p(1.0 / p.delta, std::pow(a, p.delta));
  return z >= p.mu ? 0.5 + tail : 0.5 - tail;
}

inline double dlaplace_quantile(double u, const DeltaLaplaceParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("dlaplace_quantile: u must lie in (0,1)");
  const double half = std::fabs(u - 0.5) * 2.0;
  const double a =
      std::pow(gamma_p_inv(1.0 / p.delta, half), 1.0 / p.delta);
  return u >= 0.5 ? p.mu + p.sigma * a : p.mu - p.sigma * a;
}

enum class DlKind { pdf, cdf, quantile };
inline double dlaplace_eval(double z, const DeltaLaplaceParams& p, DlKind k) {
  switch (k) {
    case DlKind::pdf: return dlaplace_pdf(z, p);
    case DlKind::cdf: return dlaplace_cdf(z, p);
    case DlKind::quantile: return dlaplace_quantile(z, p);
  }
  throw std::logic_error("dlaplace_eval: bad kind");
}

// ---------------------------------------------------------------------------
// Residual process law.

// Joint law of the residual process at the sites: a Gaussian vector with
// mean mu(1 - rho_j0) and covariance sigma^2 (rho_ij - rho_i0 rho_j0)
// (the conditional law of a mean-mu Gaussian field given a zero at s0),
// mapped site-wise to delta-Laplace margins with shape
// delta(h) = 1 + exp{-(h/delta1)^delta2} and moment-matched location/scale.
// Degenerate (exactly zero) at the conditioning site.
struct SceResidualLaw {
  std::size_t s0 = 0;
  std::vector<double> h;        // distances to s0
  Eigen::VectorXd gauss_mean;   // conditional Gaussian means
  std::vector<double> gauss_sd;
  Eigen::MatrixXd chol;         // factor of the (D-1)-dim off-s0 block
  std::vector<std::size_t> off_sites;  // site indices excluding s0
  std::vector<DeltaLaplaceParams> margins;  // per site (degenerate at s0)

  // Gaussian value -> delta-Laplace residual at site j (absolute index).
  double to_residual(std::size_t j, double g) const {
    if (j == s0) return 0.0;
    const double sd = gauss_sd[j];
    const double p = norm_cdf((g - gauss_mean(j)) / sd);
    return dlaplace_quantile(std::min(1.0 - 1e-15, std::max(1e-15, p)),
                             margins[j]);
  }

  // delta-Laplace residual -> Gaussian value, with the log-Jacobian
  // d(gauss)/d(residual) accumulated into *log_jac.
  double to_gauss(std::size_t j, double z, double* log_jac) const {
    const double sd = gauss_sd[j];
    const double p = dlaplace_cdf(z, margins[j]);
    const double pc = std::min(1.0 - 1e-15, std::max(1e-15, p));
    const double g = gauss_mean(j) + sd * norm_quantile(pc);
    if (log_jac) {
      const double num = dlaplace_log_pdf(z, margins[j]);
      const double den =
          std::log(norm_pdf((g - gauss_mean(j)) / sd)) - std::log(sd);
      *log_jac += num - den;
    }
    return g;
  }
};

inline SceResidualLaw residual_law(const SiteSet& sites, std::size_t s0,
                                   const SceSpec& spec) {
  spec.validate();
  if (s0 >= sites.size())
    throw std::out_of_range("residual_law: conditioning site out of range");
  const std::size_t d = sites.size();
  const Eigen::MatrixXd corr = correlation_matrix(sites, spec.cov);

  SceResidualLaw law;
  law.s0 = s0;
  law.h.resize(d);
  law.gauss_mean.resize(d);
  law.gauss_sd.resize(d);
  law.margins.resize(d);
  Eigen::MatrixXd cond =
      spec.sigma * spec.sigma *
      (corr - corr.col(s0) * corr.row(s0));  // sigma^2 (rho_ij - rho_i0 rho_j0)
  for (std::size_t j = 0; j < d; ++j) {
    law.h[j] = site_distance(sites, j, s0);
    law.gauss_mean(j) = spec.mu * (1.0 - corr(j, s0));
    law.gauss_sd[j] = std::sqrt(std::max(0.0, cond(j, j)));
    if (j == s0) {
      law.margins[j] = {0.0, 1.0, 1.0};  // unused: exactly zero at s0
      continue;
    }
    const double delta_h =
        1.0 + std::exp(-std::pow(law.h[j] / spec.delta1, spec.delta2));
    // Match the delta-Laplace location/scale to the conditional Gaussian
    // moments: variance sigma_dl^2 Gamma(3/d)/Gamma(1/d) = sd^2.
    const double scale =
        law.gauss_sd[j] * std::sqrt(std::tgamma(1.0 / delta_h) /
                                    std::tgamma(3.0 / delta_h));
    law.margins[j] = {law.gauss_mean(j), scale, delta_h};
  }
  for (std::size_t j = 0; j < d; ++j)
    if (j != s0) law.off_sites.push_back(j);
  Eigen::MatrixXd off(d - 1, d - 1);
  for (std::size_t a = 0; a < d - 1; ++a)
    for (std::size_t b = 0; b < d - 1; ++b)
      off(a, b) = cond(law.off_sites[a], law.off_sites[b]);
  law.chol = cholesky_with_jitter(off);
  return law;
}

// ---------------------------------------------------------------------------
// Likelihood.

// Log-likelihood of rows with X(s0) > u on the Laplace scale: the Gaussian
// log-density of the back-transformed residuals (X - a)/b with the full
// Jacobian (marginal maps and 1/b factors). No censoring.
inline double sce_loglik(const ObservationMatrix& data, const SiteSet& sites,
                         std::size_t s0, double u, const SceSpec& spec) {
  if (data.scale != MarginScale::laplace)
    throw std::invalid_argument("sce_loglik: data must be on the Laplace scale");
  if (data.n_sites != sites.size())
    throw std::invalid_argument("sce_loglik: data/site mismatch");
  const SceResidualLaw law = residual_law(sites, s0, spec);
  const std::size_t m = law.off_sites.size();

  // Log-determinant of the off-s0 conditional covariance.
  double logdet = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    logdet += 2.0 * std::log(law.chol(a, a));
  const double gauss_norm =
      -0.5 * (static_cast<double>(m) * std::log(2.0 * kPi) + logdet);

  std::vector<double> terms(data.n_rows, 0.0);
  parallel_for(data.n_rows, [&](std::size_t i) {
    const double x0 = data.at(i, s0);
    if (std::isnan(x0) || !(x0 > u)) return;  // row not conditioned here
    Eigen::VectorXd g(m);
    double log_jac = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t j = law.off_sites[a];
      const double xj = data.at(i, j);
      if (std::isnan(xj))
        throw std::invalid_argument(
            "sce_loglik: missing entries are not supported in conditioned rows");
      const auto [aj, bj] = norm_ab(x0, law.h[j], spec);
      if (!(bj > 0.0))
        throw std::invalid_argument("sce_loglik: b <= 0 at site " +
                                    std::to_string(j));
      const double z = (xj - aj) / bj;
      log_jac -= std::log(bj);
      g(a) = law.to_gauss(j, z, &log_jac) - law.gauss_mean(j);
      if (!std::isfinite(log_jac))
        throw std::runtime_error("sce_loglik: non-finite Jacobian at site " +
                                 std::to_string(j));
    }
    const Eigen::VectorXd half =
        law.chol.triangularView<Eigen::Lower>().solve(g);
    terms[i] = gauss_norm - 0.5 * half.squaredNorm() + log_jac;
  });
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

// Evenly spread conditioning subset by farthest-point traversal, starting
// from the site farthest from the centroid. Deterministic.
inline std::vector<std::size_t> select_conditioning_subset(
    const SiteSet& sites, std::size_t size) {
  const std::size_t d = sites.size();
  size = std::min(size, d);
  double cx = 0.0, cy = 0.0;
  for (const auto& c : sites.coords) {
    cx += c[0];
    cy += c[1];
  }
  cx /= d;
  cy /= d;
  std::size_t start = 0;
  double best = -1.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double dist = std::hypot(sites.coords[j][0] - cx,
                                   sites.coords[j][1] - cy);
    if (dist > best) {
      best = dist;
      start = j;
    }
  }
  std::vector<std::size_t> chosen{start};
  std::vector<double> min_dist(d);
  for (std::size_t j = 0; j < d; ++j) min_dist[j] = site_distance(sites, j, start);
  while (chosen.size() < size) {
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (min_dist[j] > far) {
        far = min_dist[j];
        next = j;
      }
    }
    chosen.push_back(next);
    for (std::size_t j = 0; j < d; ++j)
      min_dist[j] = std::min(min_dist[j], site_distance(sites, j, next));
  }
  return chosen;
}

// Composite log-likelihood over conditioning sites; rows exceeding at
// several sites contribute once per site.
inline double sce_composite_loglik(const ObservationMatrix& data,
                                   const SiteSet& sites,
                                   const std::vector<std::size_t>& subset,
                                   double u, const SceSpec& spec) {
  if (subset.empty())
    throw std::invalid_argument("sce_composite_loglik: empty subset");
  std::vector<double> parts(subset.size());
  // Parallelism lives inside sce_loglik; the per-site loop stays ordered.
  for (std::size_t k = 0; k < subset.size(); ++k)
    parts[k] = sce_loglik(data, sites, subset[k], u, spec);
  double total = 0.0;
  for (double p : parts) total += p;
  return total;
}

// ---------------------------------------------------------------------------
// Simulation and exceedance probabilities.

// Draws X | X(s0) > u: X(s0) = u + Exp(1) (the Laplace upper tail is
// exponential), residuals from the conditioned Gaussian law mapped to their
// delta-Laplace margins, then X(s) = a + b Z0(s).
inline ObservationMatrix sce_simulate(const SceSpec& spec, const SiteSet& sites,
                                      std::size_t s0, double u, std::size_t n,
                                      std::uint64_t seed) {
  const SceResidualLaw law = residual_law(sites, s0, spec);
  const std::size_t d = sites.size();
  const std::size_t m = law.off_sites.size();
  ObservationMatrix out(n, d, MarginScale::laplace);
  out.site_ids = sites.labels;
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0x5ce));
    const double x0 = u + rng.exponential();
    Eigen::VectorXd z(m);
    for (std::size_t a = 0; a < m; ++a) z(a) = rng.normal();
    const Eigen::VectorXd g = law.chol * z;
    out.at(i, s0) = x0;
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t j = law.off_sites[a];
      const double resid = law.to_residual(j, law.gauss_mean(j) + g(a));
      const auto [aj, bj] = norm_ab(x0, law.h[j], spec);
      out.at(i, j) = aj + bj * resid;
    }
  });
  return out;
}

struct ExceedanceProbResult {
  double prob = 0.0;
  double mc_error = 0.0;  // standard error of the estimate
};

// P(max_j X(s_j) > v) via importance-reweighted conditional simulation:
// draws condition on a uniformly chosen site exceeding v, and each draw
// carries weight D p1 / N with N the number of sites above v and
// p1 = exp(-v)/2 the Laplace tail. D = 1 reproduces p1 exactly.
inline ExceedanceProbResult exceedance_prob_max(const SceSpec& spec,
                                                const SiteSet& sites, double v,
                                                std::size_t nsim,
                                                std::uint64_t seed) {
  spec.validate();
  if (!(v > 0.0))
    throw std::invalid_argument("exceedance_prob_max: v must be positive");
  const std::size_t d = sites.size();
  const double p1 = 0.5 * std::exp(-v);
  if (d == 1) return {p1, 0.0};

  std::vector<SceResidualLaw> laws;
  laws.reserve(d);
  for (std::size_t j = 0; j < d; ++j)
    laws.push_back(residual_law(sites, j, spec));

  std::vector<double> weights(nsim);
  parallel_for(nsim, [&](std::size_t k) {
    Rng rng(derive_seed(seed, k, 0xe5));
    const std::size_t j0 = static_cast<std::size_t>(rng.below(d));
    const auto& law = laws[j0];
    const double x0 = v + rng.exponential();
    std::size_t n_exceed = 1;  // the conditioning site
    const std::size_t m = law.off_sites.size();
    Eigen::VectorXd z(m);
    for (std::size_t a = 0; a < m; ++a) z(a) = rng.normal();
    const Eigen::VectorXd g = law.chol * z;
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t j = law.off_sites[a];
      const double resid = law.to_residual(j, law.gauss_mean(j) + g(a));
      const auto [aj, bj] = norm_ab(x0, law.h[j], spec);
      if (aj + bj * resid > v) ++n_exceed;
    }
    weights[k] = static_cast<double>(d) / static_cast<double>(n_exceed);
  });
  double mean = 0.0;
  for (double w : weights) mean += w;
  mean /= nsim;
  double var = 0.0;
  for (double w : weights) var += (w - mean) * (w - mean);
  var /= (nsim - 1.0) * nsim;
  if (mean <= 0.0)
    throw std::runtime_error("exceedance_prob_max: denominator estimate is 0");
  return {p1 * mean, p1 * std::sqrt(var)};
}

}  // namespace spex

#endif  // SPEX_CONDITIONAL_HPP
