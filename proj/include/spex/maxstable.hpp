// Max-stable processes on unit Frechet margins: Brown-Resnick and
// extremal-t exponent functions with analytic partial derivatives, full
// densities via set partitions (small D), spectral simulation, and the
// pairwise likelihood.

#ifndef SPEX_MAXSTABLE_HPP
#define SPEX_MAXSTABLE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spex/covariance.hpp"
#include "spex/data.hpp"
#include "spex/dist.hpp"
#include "spex/gaussian.hpp"
#include "spex/mvn.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

enum class MsFamily { brown_resnick, extremal_t };

// Brown-Resnick: variogram (h/phi)^nu with the Husler-Reiss bivariate form
// a = sqrt(2 (h/phi)^nu). Extremal-t: dof > 0 plus a correlation spec.
struct MaxStableSpec {
  MsFamily family = MsFamily::brown_resnick;
  double phi = 1.0;
  double nu = 1.0;
  double dof = 1.0;
  CovarianceSpec cov;

  static MaxStableSpec brown_resnick(double phi, double nu) {
    MaxStableSpec s;
    s.family = MsFamily::brown_resnick;
    s.phi = phi;
    s.nu = nu;
    return s;
  }
  static MaxStableSpec extremal_t(double dof, CovarianceSpec cov) {
    MaxStableSpec s;
    s.family = MsFamily::extremal_t;
    s.dof = dof;
    s.cov = cov;
    return s;
  }

  void validate() const {
    if (family == MsFamily::brown_resnick) {
      if (!(phi > 0.0))
        throw std::invalid_argument("brown_resnick: phi must be > 0");
      if (!(nu > 0.0 && nu < 2.0))
        throw std::invalid_argument("brown_resnick: nu must lie in (0,2)");
    } else {
      if (!(dof > 0.0))
        throw std::invalid_argument("extremal_t: dof must be > 0");
      cov.validate();
    }
  }
};

struct MsSimOptions {
  double accuracy = 1e-4;          // stopping rule multiplier
  double cap_quantile = 1.0 - 1e-9;  // per-site profile cap
  std::size_t max_points = 200000;   // Poisson point budget per field
};

struct MsSimResult {
  ObservationMatrix data;  // unit Frechet margins
  bool accuracy_reached = true;
  std::size_t profile_caps_hit = 0;
};

inline constexpr int kMaxMultivariateV = 10;  // cap for multivariate V
inline constexpr int kMaxDensityDim = 6;      // Bell(6) = 203 partition terms

namespace detail {

// All set partitions of {0..n-1} as restricted-growth assignments.
inline void enumerate_partitions(int n,
                                 const std::function<void(
                                     const std::vector<int>&, int)>& visit) {
  std::vector<int> assign(n, 0);
  std::function<void(int, int)> rec = [&](int i, int max_block) {
    if (i == n) {
      visit(assign, max_block);
      return;
    }
    for (int b = 0; b <= max_block; ++b) {
      assign[i] = b;
      rec(i + 1, b == max_block ? max_block + 1 : max_block);
    }
  };
  rec(0, 0);
}

inline double log_mvn_pdf(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const auto m = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("log_mvn_pdf: covariance not positive definite");
  const Eigen::VectorXd half = llt.matrixL().solve(x);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (m * std::log(2.0 * kPi) + logdet + half.squaredNorm());
}

// log density of a multivariate t with location mu, scale matrix s, dof.
inline double log_mvt_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                          const Eigen::MatrixXd& s, double dof) {
  const auto m = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("log_mvt_pdf: scale not positive definite");
  const Eigen::VectorXd half = llt.matrixL().solve(x - mu);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double quad = half.squaredNorm();
  return std::lgamma((dof + m) / 2.0) - std::lgamma(dof / 2.0) -
         0.5 * m * std::log(dof * kPi) - 0.5 * logdet -
         0.5 * (dof + m) * std::log1p(quad / dof);
}

}  // namespace detail

// Exponent-function evaluator bound to a spec and a site set. Precomputes
// the pairwise structure (variogram or correlation matrix) once.
class MsModel {
 public:
  MsModel(const MaxStableSpec& spec, const SiteSet& sites,
          QmcAccuracy qmc = {4096, 8, 0.0}, std::uint64_t qmc_seed = 0x5137)
      : spec_(spec), d_(static_cast<int>(sites.size())), qmc_(qmc),
        qmc_seed_(qmc_seed) {
    spec.validate();
    if (spec.family == MsFamily::brown_resnick) {
      vario_.resize(d_, d_);
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j)
          vario_(i, j) = std::pow(
              site_distance(sites, i, j) / spec.phi, spec.nu);
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < i; ++j)
          if (vario_(i, j) <= 0.0)
            throw std::invalid_argument(
                "brown_resnick: coincident sites are not supported");
    } else {
      corr_ = correlation_matrix(sites, spec.cov);
    }
  }

  int dim() const { return d_; }
  const MaxStableSpec& spec() const { return spec_; }
  // Husler-Reiss dependence a_ij = sqrt(2 (h/phi)^nu).
  double hr_a(int i, int j) const { return std::sqrt(2.0 * vario_(i, j)); }
  double rho(int i, int j) const { return corr_(i, j); }

  // V restricted to a subset of sites, remaining components at +infinity.
  // z is indexed like subset.
  double exponent_v(const std::vector<double>& z,
                    const std::vector<int>& subset) const {
    const int m = static_cast<int>(subset.size());
    if (m < 1) throw std::invalid_argument("exponent_v: empty subset");
    if (static_cast<int>(z.size()) != m)
      throw std::invalid_argument("exponent_v: z/subset size mismatch");
    for (double v : z)
      if (!(v > 0.0))
        throw std::invalid_argument("exponent_v: z must be positive");
    if (m == 1) return 1.0 / z[0];
    if (m == 2) return pair_v(subset[0], subset[1], z[0], z[1]);
    if (m > kMaxMultivariateV)
      throw std::invalid_argument(
          "exponent_v: dimension beyond supported cap (D <= 10)");
    double total = 0.0;
    for (int k = 0; k < m; ++k) total += anchored_term(z, subset, k);
    return total;
  }

  double exponent_v(const std::vector<double>& z) const {
    std::vector<int> all(d_);
    for (int j = 0; j < d_; ++j) all[j] = j;
    return exponent_v(z, all);
  }

  // Bivariate analytic partial derivatives between sites i and j.
  // order: 1 -> dV/dz1, 2 -> dV/dz2, 12 -> d2V/dz1 dz2.
  double pair_v(int i, int j, double z1, double z2) const {
    if (spec_.family == MsFamily::brown_resnick) {
      const double a = hr_a(i, j);
      const double w1 = a / 2.0 + std::log(z2 / z1) / a;
      const double w2 = a / 2.0 + std::log(z1 / z2) / a;
      return norm_cdf(w1) / z1 + norm_cdf(w2) / z2;
    }
    const double nu = spec_.dof;
    const double r = rho(i, j);
    const double b = std::sqrt((nu + 1.0) / (1.0 - r * r));
    const double p = std::pow(z2 / z1, 1.0 / nu);
    return student_t_cdf(b * (p - r), nu + 1.0) / z1 +
           student_t_cdf(b * (1.0 / p - r), nu + 1.0) / z2;
  }

  double pair_v1(int i, int j, double z1, double z2) const {
    if (spec_.family == MsFamily::brown_resnick) {
      const double a = hr_a(i, j);
      const double w1 = a / 2.0 + std::log(z2 / z1) / a;
      return -norm_cdf(w1) / (z1 * z1);
    }
    const double nu = spec_.dof;
    const double r = rho(i, j);
    const double b = std::sqrt((nu + 1.0) / (1.0 - r * r));
    const double p = std::pow(z2 / z1, 1.0 / nu);
    return -student_t_cdf(b * (p - r), nu + 1.0) / (z1 * z1);
  }

  double pair_v2(int i, int j, double z1, double z2) const {
    return pair_v1(j, i, z2, z1);
  }

  double pair_v12(int i, int j, double z1, double z2) const {
    if (spec_.family == MsFamily::brown_resnick) {
      const double a = hr_a(i, j);
      const double w1 = a / 2.0 + std::log(z2 / z1) / a;
      return -norm_pdf(w1) / (a * z1 * z1 * z2);
    }
    const double nu = spec_.dof;
    const double r = rho(i, j);
    const double b = std::sqrt((nu + 1.0) / (1.0 - r * r));
    const double p = std::pow(z2 / z1, 1.0 / nu);
    return -b * p * student_t_pdf(b * (p - r), nu + 1.0) /
           (nu * z1 * z1 * z2);
  }

  // Bivariate extremal coefficient V(1,1) at the pair (i,j).
  double extremal_coefficient(int i, int j) const {
    return pair_v(i, j, 1.0, 1.0);
  }

  // log of -V_I(z): the partial derivative of V with respect to the
  // coordinates in `uncensored`, evaluated at the full vector z (all d_
  // components participate). Used by censored likelihoods and densities.
  double log_neg_v_partial(const std::vector<double>& z,
                           const std::vector<int>& uncensored) const {
    std::vector<int> all(d_);
    for (int j = 0; j < d_; ++j) all[j] = j;
    return log_neg_v_partial(z, all, uncensored);
  }

  // Same, restricted to `subset` (others at +infinity); z indexed like
  // subset, `uncensored` holds positions within subset.
  double log_neg_v_partial(const std::vector<double>& z,
                           const std::vector<int>& subset,
                           const std::vector<int>& uncensored) const {
    const int m = static_cast<int>(subset.size());
    const int q = static_cast<int>(uncensored.size());
    if (q < 1) throw std::invalid_argument("v_partial: empty derivative set");
    for (double v : z)
      if (!(v > 0.0))
        throw std::invalid_argument("v_partial: z must be positive");
    if (m == 1) return -2.0 * std::log(z[0]);  // -V'(z) = z^-2

    const int anchor = uncensored[0];
    std::vector<int> rest;  // positions within subset, anchor excluded
    rest.reserve(m - 1);
    for (int pos = 0; pos < m; ++pos)
      if (pos != anchor) rest.push_back(pos);
    // Order: uncensored first (excluding anchor), then censored.
    std::vector<int> order;
    order.reserve(m - 1);
    for (int pos : uncensored)
      if (pos != anchor) order.push_back(pos);
    for (int pos = 0; pos < m; ++pos)
      if (pos != anchor &&
          std::find(uncensored.begin(), uncensored.end(), pos) ==
              uncensored.end())
        order.push_back(pos);
    const int n_unc = q - 1;
    const int n_cen = m - 1 - n_unc;

    if (spec_.family == MsFamily::brown_resnick)
      return br_log_neg_v_partial(z, subset, anchor, order, n_unc, n_cen);
    return et_log_neg_v_partial(z, subset, anchor, order, n_unc, n_cen);
  }

  // Full joint density at z (unit Frechet), D <= 6, as the partition sum
  // exp(-V) * sum over partitions of prod_k (-V_{pi_k}).
  double density(const std::vector<double>& z) const {
    if (d_ > kMaxDensityDim)
      throw std::invalid_argument(
          "maxstable_density: D > 6 unsupported; use the pairwise likelihood");
    if (static_cast<int>(z.size()) != d_)
      throw std::invalid_argument("maxstable_density: dimension mismatch");
    if (d_ == 1) return std::exp(-1.0 / z[0]) / (z[0] * z[0]);
    const double v = exponent_v(z);
    double sum = 0.0;
    detail::enumerate_partitions(
        d_, [&](const std::vector<int>& assign, int n_blocks) {
          double log_prod = 0.0;
          for (int b = 0; b < n_blocks; ++b) {
            std::vector<int> block;
            for (int i = 0; i < d_; ++i)
              if (assign[i] == b) block.push_back(i);
            log_prod += log_neg_v_partial(z, block);
          }
          sum += std::exp(log_prod);
        });
    return std::exp(-v) * sum;
  }

  std::size_t partition_count() const {
    std::size_t n = 0;
    detail::enumerate_partitions(d_, [&](const std::vector<int>&, int) { ++n; });
    return n;
  }

 private:
  // One anchored term of the multivariate exponent function.
  double anchored_term(const std::vector<double>& z,
                       const std::vector<int>& subset, int k) const {
    const int m = static_cast<int>(subset.size());
    std::vector<double> upper(m - 1);
    Eigen::MatrixXd corr(m - 1, m - 1);
    int a = 0;
    for (int i = 0; i < m; ++i) {
      if (i == k) continue;
      int b = 0;
      if (spec_.family == MsFamily::brown_resnick) {
        const double gik = vario_(subset[i], subset[k]);
        upper[a] = (std::log(z[i] / z[k]) + gik) / std::sqrt(2.0 * gik);
        for (int j = 0; j < m; ++j) {
          if (j == k) continue;
          const double gjk = vario_(subset[j], subset[k]);
          const double gij = vario_(subset[i], subset[j]);
          corr(a, b) = (gik + gjk - gij) / (2.0 * std::sqrt(gik * gjk));
          ++b;
        }
      } else {
        const double nu = spec_.dof;
        const double rik = corr_(subset[i], subset[k]);
        upper[a] = (std::pow(z[i] / z[k], 1.0 / nu) - rik) *
                   std::sqrt((nu + 1.0) / (1.0 - rik * rik));
        for (int j = 0; j < m; ++j) {
          if (j == k) continue;
          const double rjk = corr_(subset[j], subset[k]);
          const double rij = corr_(subset[i], subset[j]);
          corr(a, b) = (rij - rik * rjk) /
                       std::sqrt((1.0 - rik * rik) * (1.0 - rjk * rjk));
          ++b;
        }
      }
      ++a;
    }
    double prob;
    if (m - 1 == 1) {
      prob = spec_.family == MsFamily::brown_resnick
                 ? norm_cdf(upper[0])
                 : student_t_cdf(upper[0], spec_.dof + 1.0);
    } else if (m - 1 == 2) {
      prob = spec_.family == MsFamily::brown_resnick
                 ? bvn_cdf(upper[0], upper[1], corr(0, 1))
                 : bvt_cdf(upper[0], upper[1], corr(0, 1), spec_.dof + 1.0);
    } else {
      prob = spec_.family == MsFamily::brown_resnick
                 ? mvn_cdf(upper, corr, qmc_, derive_seed(qmc_seed_, k)).prob
                 : mvt_cdf(upper, corr, spec_.dof + 1.0, qmc_,
                           derive_seed(qmc_seed_, k)).prob;
    }
    return prob / z[k];
  }

  double br_log_neg_v_partial(const std::vector<double>& z,
                              const std::vector<int>& subset, int anchor,
                              const std::vector<int>& order, int n_unc,
                              int n_cen) const {
    const int m1 = n_unc + n_cen;
    const int ka = subset[anchor];
    Eigen::VectorXd x(m1);
    Eigen::MatrixXd cov(m1, m1);
    for (int a = 0; a < m1; ++a) {
      const int ia = subset[order[a]];
      const double gik = vario_(ia, ka);
      x(a) = std::log(z[order[a]] / z[anchor]) + gik;
      for (int b = 0; b < m1; ++b) {
        const int ib = subset[order[b]];
        cov(a, b) = gik + vario_(ib, ka) - vario_(ia, ib);
      }
    }
    double logv = -2.0 * std::log(z[anchor]);
    if (n_unc > 0) {
      for (int a = 0; a < n_unc; ++a) logv -= std::log(z[order[a]]);
      logv += detail::log_mvn_pdf(x.head(n_unc), cov.topLeftCorner(n_unc, n_unc));
    }
    if (n_cen > 0) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_cen);
      Eigen::MatrixXd cc = cov.bottomRightCorner(n_cen, n_cen);
      if (n_unc > 0) {
        const auto cuu = cov.topLeftCorner(n_unc, n_unc);
        const auto ccu = cov.bottomLeftCorner(n_cen, n_unc);
        Eigen::LLT<Eigen::MatrixXd> llt(cuu);
        if (llt.info() != Eigen::Success)
          throw std::runtime_error("v_partial: conditioning block not PD");
        const Eigen::MatrixXd w = llt.solve(ccu.transpose());  // n_unc x n_cen
        mean = w.transpose() * x.head(n_unc);
        cc -= ccu * w;
      }
      std::vector<double> upper(n_cen);
      Eigen::MatrixXd corr(n_cen, n_cen);
      for (int a = 0; a < n_cen; ++a) {
        const double sd = std::sqrt(cc(a, a));
        upper[a] = (x(n_unc + a) - mean(a)) / sd;
        for (int b = 0; b < n_cen; ++b)
          corr(a, b) = cc(a, b) / (sd * std::sqrt(cc(b, b)));
      }
      logv += std::log(censored_prob(upper, corr, -1.0));
    }
    return logv;
  }

  double et_log_neg_v_partial(const std::vector<double>& z,
                              const std::vector<int>& subset, int anchor,
                              const std::vector<int>& order, int n_unc,
                              int n_cen) const {
    const int m1 = n_unc + n_cen;
    const double nu = spec_.dof;
    const double dof1 = nu + 1.0;
    const int ka = subset[anchor];
    Eigen::VectorXd t(m1), mu(m1);
    Eigen::MatrixXd scale(m1, m1);
    for (int a = 0; a < m1; ++a) {
      const int ia = subset[order[a]];
      t(a) = std::pow(z[order[a]] / z[anchor], 1.0 / nu);
      mu(a) = corr_(ia, ka);
      for (int b = 0; b < m1; ++b) {
        const int ib = subset[order[b]];
        scale(a, b) =
            (corr_(ia, ib) - corr_(ia, ka) * corr_(ib, ka)) / dof1;
      }
    }
    double logv = -2.0 * std::log(z[anchor]);
    double quad = 0.0;
    if (n_unc > 0) {
      for (int a = 0; a < n_unc; ++a)
        logv += std::log(t(a)) - std::log(nu) - std::log(z[order[a]]);
      logv += detail::log_mvt_pdf(t.head(n_unc), mu.head(n_unc),
                                  scale.topLeftCorner(n_unc, n_unc), dof1);
      Eigen::LLT<Eigen::MatrixXd> llt(scale.topLeftCorner(n_unc, n_unc));
      quad = llt.matrixL().solve(t.head(n_unc) - mu.head(n_unc)).squaredNorm();
    }
    if (n_cen > 0) {
      // Conditional multivariate t for the censored block.
      Eigen::VectorXd mean = mu.tail(n_cen);
      Eigen::MatrixXd cc = scale.bottomRightCorner(n_cen, n_cen);
      double dof_c = dof1;
      if (n_unc > 0) {
        const auto suu = scale.topLeftCorner(n_unc, n_unc);
        const auto scu = scale.bottomLeftCorner(n_cen, n_unc);
        Eigen::LLT<Eigen::MatrixXd> llt(suu);
        if (llt.info() != Eigen::Success)
          throw std::runtime_error("v_partial: conditioning block not PD");
        const Eigen::MatrixXd w = llt.solve(scu.transpose());
        mean += w.transpose() * (t.head(n_unc) - mu.head(n_unc));
        cc -= scu * w;
        dof_c = dof1 + n_unc;
        cc *= (dof1 + quad) / dof_c;
      }
      std::vector<double> upper(n_cen);
      Eigen::MatrixXd corr(n_cen, n_cen);
      for (int a = 0; a < n_cen; ++a) {
        const double sd = std::sqrt(cc(a, a));
        upper[a] = (t(n_unc + a) - mean(a)) / sd;
        for (int b = 0; b < n_cen; ++b)
          corr(a, b) = cc(a, b) / (sd * std::sqrt(cc(b, b)));
      }
      logv += std::log(censored_prob(upper, corr, dof_c));
    }
    return logv;
  }

  // Gaussian (dof < 0) or t rectangle probability for the censored block.
  double censored_prob(const std::vector<double>& upper,
                       const Eigen::MatrixXd& corr, double dof) const {
    const int n = static_cast<int>(upper.size());
    if (n == 1)
      return dof > 0.0 ? student_t_cdf(upper[0], dof) : norm_cdf(upper[0]);
    if (n == 2)
      return dof > 0.0 ? bvt_cdf(upper[0], upper[1], corr(0, 1), dof)
                       : bvn_cdf(upper[0], upper[1], corr(0, 1));
    return dof > 0.0
               ? mvt_cdf(upper, corr, dof, qmc_, derive_seed(qmc_seed_, 0x7ce))
                     .prob
               : mvn_cdf(upper, corr, qmc_, derive_seed(qmc_seed_, 0x7ce)).prob;
  }

  MaxStableSpec spec_;
  int d_ = 0;
  Eigen::MatrixXd vario_;  // gamma(h_ij) = (h_ij/phi)^nu (Brown-Resnick)
  Eigen::MatrixXd corr_;   // correlation matrix (extremal-t)
  QmcAccuracy qmc_;
  std::uint64_t qmc_seed_;
};

namespace detail {

// Spectral profile machinery shared by max-stable and r-Pareto simulation.
//
// Two modes:
//  - base_spectral: a mean-one profile W from the family's spectral
//    representation. Brown-Resnick profiles are anchored log-Gaussians
//    (any anchor yields the same max-stable law since W > 0 everywhere);
//    extremal-t profiles are positive powers of a Gaussian field.
//  - extremal_function: the coordinate-size-biased profile at the anchor,
//    normalized to 1 there. For Brown-Resnick this coincides with the
//    anchored base profile; for extremal-t it is Student-t distributed.
//    Mixtures of these over anchors give the r-tilted laws used by the
//    r-Pareto sampler.
class SpectralProfiles {
 public:
  enum class Mode { base_spectral, extremal_function };

  SpectralProfiles(const MaxStableSpec& spec, const SiteSet& sites, int anchor,
                   Mode mode = Mode::extremal_function)
      : family_(spec.family), nu_(spec.nu), dof_(spec.dof),
        d_(static_cast<int>(sites.size())), anchor_(anchor), mode_(mode) {
    if (family_ == MsFamily::extremal_t && mode_ == Mode::base_spectral) {
      store_chol(cholesky_with_jitter(correlation_matrix(sites, spec.cov)), d_);
      return;
    }
    if (family_ == MsFamily::brown_resnick) {
      // Gaussian increments G with G(anchor) = 0 and
      // Cov(G_i, G_j) = g_i + g_j - g_ij for g = (h/phi)^nu.
      drift_.resize(d_);
      Eigen::MatrixXd cov(d_, d_);
      for (int i = 0; i < d_; ++i) {
        const double gi =
            std::pow(site_distance(sites, i, anchor) / spec.phi, spec.nu);
        drift_[i] = gi;
        for (int j = 0; j < d_; ++j) {
          const double gj =
              std::pow(site_distance(sites, j, anchor) / spec.phi, spec.nu);
          const double gij =
              std::pow(site_distance(sites, i, j) / spec.phi, spec.nu);
          cov(i, j) = gi + gj - gij;
        }
      }
      if (d_ > 1) store_chol(cholesky_with_jitter(drop_anchor(cov)), d_ - 1);
    } else {
      // Extremal function of the extremal-t model at the anchor:
      // profile_i = max(0, Y_i)^dof with Y ~ t_{dof+1}(rho_i, scale).
      const Eigen::MatrixXd corr = correlation_matrix(sites, spec.cov);
      mu_ = corr.col(anchor);
      const Eigen::MatrixXd scale =
          (corr - mu_ * mu_.transpose()) / (spec.dof + 1.0);
      if (d_ > 1) store_chol(cholesky_with_jitter(drop_anchor(scale)), d_ - 1);
    }
  }

  // Draws a profile into w, using z as normal-draw scratch (both resized
  // internally). Thread-safe: all state is read-only. extremal_function
  // profiles have value exactly 1 at the anchor; base_spectral extremal-t
  // profiles are unnormalized positive powers (divide by the moment
  // constant for mean one).
  void draw(Rng& rng, std::vector<double>& w, std::vector<double>& z) const {
    if (family_ == MsFamily::extremal_t && mode_ == Mode::base_spectral) {
      w.resize(d_);
      gaussian_draw(rng, d_, z);
      for (int i = 0; i < d_; ++i)
        w[i] = z[i] > 0.0 ? std::pow(z[i], dof_) : 0.0;
      return;
    }
    w.assign(d_, 1.0);
    if (d_ == 1) return;
    gaussian_draw(rng, d_ - 1, z);
    if (family_ == MsFamily::brown_resnick) {
      int a = 0;
      for (int i = 0; i < d_; ++i) {
        if (i == anchor_) continue;
        w[i] = std::exp(z[a] - drift_[i]);
        ++a;
      }
    } else {
      // Scale mixing for the multivariate t draw.
      const double s = chi_sample(rng, dof_ + 1.0);
      const double f = std::sqrt((dof_ + 1.0) / s);
      int a = 0;
      for (int i = 0; i < d_; ++i) {
        if (i == anchor_) continue;
        const double y = mu_(i) + f * z[a];
        w[i] = y > 0.0 ? std::pow(y, dof_) : 0.0;
        ++a;
      }
    }
  }

 private:
  Eigen::MatrixXd drop_anchor(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd sub(d_ - 1, d_ - 1);
    int a = 0;
    for (int i = 0; i < d_; ++i) {
      if (i == anchor_) continue;
      int b = 0;
      for (int j = 0; j < d_; ++j) {
        if (j == anchor_) continue;
        sub(a, b) = m(i, j);
        ++b;
      }
      ++a;
    }
    return sub;
  }

  void store_chol(const Eigen::MatrixXd& l, int m) {
    chol_dim_ = m;
    cholv_.assign(m * m, 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j) cholv_[i * m + j] = l(i, j);
  }

  // In-place correlated Gaussian draw: z <- L * normals, allocation-free.
  void gaussian_draw(Rng& rng, int m, std::vector<double>& z) const {
    z.resize(2 * m);
    double* raw = z.data() + m;
    for (int i = 0; i < m; ++i) raw[i] = rng.normal();
    for (int i = m - 1; i >= 0; --i) {
      double s = 0.0;
      const double* row = &cholv_[i * chol_dim_];
      for (int j = 0; j <= i; ++j) s += row[j] * raw[j];
      z[i] = s;
    }
    z.resize(m);
  }

  static double chi_sample(Rng& rng, double dof) {
    // Sum of squared normals for integer part plus gamma for the rest is
    // overkill; Marsaglia-Tsang on Gamma(dof/2) * 2 is simple and exact.
    const double a = dof / 2.0;
    if (a < 1.0) {
      // Boost via Gamma(a+1) and the power correction.
      const double g = gamma_sample(rng, a + 1.0);
      return 2.0 * g * std::pow(rng.uniform(), 1.0 / a);
    }
    return 2.0 * gamma_sample(rng, a);
  }

  static double gamma_sample(Rng& rng, double a) {
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = rng.normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = rng.uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  MsFamily family_;
  double nu_, dof_;
  int d_, anchor_;
  Mode mode_;
  int chol_dim_ = 0;
  std::vector<double> cholv_;  // row-major lower-triangular factor
  std::vector<double> drift_;  // BR: (h_i,anchor / phi)^nu
  Eigen::VectorXd mu_;         // extremal-t: rho(., anchor)
};

}  // namespace detail

// Pointwise maxima over Poisson points R_i W_i(s) with intensity r^-2 dr,
// generated in descending R order and stopped once the radius falls below
// accuracy x (current minimum of the running maxima). Unbounded profiles
// are capped at the cap_quantile marginal level; caps reached are counted
// so callers can surface a warning.
inline MsSimResult maxstable_simulate(const MaxStableSpec& spec,
                                      const SiteSet& sites, std::size_t n,
                                      std::uint64_t seed,
                                      const MsSimOptions& opt = {}) {
  spec.validate();
  const int d = static_cast<int>(sites.size());
  // Mean-one profiles: anchored profiles exp{G - gamma} for BR, and the
  // normalized positive-power profiles for extremal-t.
  detail::SpectralProfiles profiles(
      spec, sites, 0, detail::SpectralProfiles::Mode::base_spectral);

  // Per-site caps at the cap_quantile of the profile marginal law.
  const double zq = norm_quantile(opt.cap_quantile);
  std::vector<double> cap(d, std::numeric_limits<double>::infinity());
  double m_nu = 1.0;
  if (spec.family == MsFamily::extremal_t) {
    m_nu = std::pow(2.0, (spec.dof - 2.0) / 2.0) *
           std::tgamma((spec.dof + 1.0) / 2.0) / std::sqrt(kPi);
  }
  for (int j = 0; j < d; ++j) {
    if (spec.family == MsFamily::brown_resnick) {
      const double g = std::pow(site_distance(sites, j, 0) / spec.phi, spec.nu);
      cap[j] = std::exp(-g + std::sqrt(2.0 * g) * zq);
    } else {
      cap[j] = std::pow(std::max(0.0, zq), spec.dof);
    }
  }

  MsSimResult result;
  result.data = ObservationMatrix(n, d, MarginScale::frechet);
  result.data.site_ids = sites.labels;
  std::vector<std::size_t> caps(n, 0);
  std::vector<bool> ok(n, true);

  // Mean-one normalization for extremal-t profiles, folded into the caps.
  std::vector<double> cap_scaled(cap);
  if (spec.family == MsFamily::extremal_t)
    for (auto& c : cap_scaled) c /= m_nu;

  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i, 0xb5));
    std::vector<double> z(d, 0.0), w, scratch;
    double gamma_sum = 0.0;
    bool converged = false;
    std::size_t caps_hit = 0;
    for (std::size_t pts = 0; pts < opt.max_points; ++pts) {
      gamma_sum += rng.exponential();
      const double radius = 1.0 / gamma_sum;
      double zmin = z[0];
      bool frozen = true;  // no future point can alter any running maximum
      for (int j = 0; j < d; ++j) {
        zmin = std::min(zmin, z[j]);
        frozen = frozen && radius * cap_scaled[j] <= z[j];
      }
      if (frozen || (zmin > 0.0 && radius < opt.accuracy * zmin)) {
        converged = true;
        break;
      }
      profiles.draw(rng, w, scratch);
      for (int j = 0; j < d; ++j) {
        double wj = spec.family == MsFamily::extremal_t ? w[j] / m_nu : w[j];
        if (wj > cap_scaled[j]) {
          wj = cap_scaled[j];
          ++caps_hit;
        }
        z[j] = std::max(z[j], radius * wj);
      }
    }
    if (!converged) ok[i] = false;
    caps[i] = caps_hit;
    for (int j = 0; j < d; ++j) result.data.at(i, j) = z[j];
  });

  for (std::size_t i = 0; i < n; ++i) {
    result.profile_caps_hit += caps[i];
    if (!ok[i]) result.accuracy_reached = false;
  }
  return result;
}

// Weighted pairwise log-likelihood for unit-Frechet max-stable data:
// sum over replicates and site pairs of log[exp(-V)(V1 V2 - V12)].
// weights, when given, are indexed by pair (i<j) in row-major order.
inline double pairwise_loglik_maxstable(
    const MsModel& model, const ObservationMatrix& data,
    const std::vector<double>* weights = nullptr) {
  const int d = model.dim();
  if (static_cast<int>(data.n_sites) != d)
    throw std::invalid_argument("pairwise_loglik: data/site mismatch");
  const std::size_t n_pairs = static_cast<std::size_t>(d) * (d - 1) / 2;
  if (weights && weights->size() != n_pairs)
    throw std::invalid_argument("pairwise_loglik: weight count mismatch");

  return parallel_map_sum(data.n_rows, [&](std::size_t row) {
    double ll = 0.0;
    std::size_t pair = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j, ++pair) {
        const double w = weights ? (*weights)[pair] : 1.0;
        if (w == 0.0) continue;
        const double z1 = data.at(row, i);
        const double z2 = data.at(row, j);
        if (std::isnan(z1) || std::isnan(z2)) continue;
        if (!(z1 > 0.0 && z2 > 0.0))
          throw std::invalid_argument("pairwise_loglik: data must be positive");
        const double v = model.pair_v(i, j, z1, z2);
        const double v1 = model.pair_v1(i, j, z1, z2);
        const double v2 = model.pair_v2(i, j, z1, z2);
        const double v12 = model.pair_v12(i, j, z1, z2);
        const double term = -v + std::log(v1 * v2 - v12);
        if (!std::isfinite(term))
          throw std::runtime_error(
              "pairwise_loglik: non-finite contribution at pair (" +
              std::to_string(i) + "," + std::to_string(j) + "), row " +
              std::to_string(row));
        ll += w * term;
      }
    }
    return ll;
  });
}

}  // namespace spex

#endif  // SPEX_MAXSTABLE_HPP
