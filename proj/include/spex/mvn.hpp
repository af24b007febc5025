// Multivariate normal and t distribution functions via randomized
// quasi-Monte Carlo with separation-of-variables reordering.

#ifndef SPEX_MVN_HPP
#define SPEX_MVN_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spex/dist.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

struct QmcAccuracy {
  int samples = 10000;    // lattice points per random shift
  int shifts = 8;         // random shifts (error estimated across them)
  double tolerance = 0.0; // optional target; 0 disables sample escalation
};

struct ProbResult {
  double prob = 0.0;
  double error_estimate = 0.0;  // 3 x standard error across shifts
};

namespace detail {

// Square roots of primes, reduced mod 1, as lattice generators
// (Richtmyer sequence).
inline std::vector<double> richtmyer_generators(int dim) {
  static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                   31, 37, 41, 43, 47, 53, 59, 61, 67, 71,
                                   73, 79, 83, 89, 97, 101, 103, 107};
  if (dim > static_cast<int>(sizeof(primes) / sizeof(primes[0])))
    throw std::invalid_argument("qmc: dimension beyond supported cap");
  std::vector<double> q(dim);
  for (int j = 0; j < dim; ++j) {
    const double s = std::sqrt(static_cast<double>(primes[j]));
    q[j] = s - std::floor(s);
  }
  return q;
}

struct SovProblem {
  Eigen::MatrixXd chol;        // reordered Cholesky factor
  std::vector<double> upper;   // reordered upper limits
  int dim = 0;
};

// Greedy variable reordering: at each step pick the variable with the
// smallest conditional outer probability, using truncated-normal expected
// values for the already-fixed coordinates (Genz-Bretz heuristic).
inline SovProblem reorder_and_factor(std::vector<double> b,
                                     Eigen::MatrixXd a) {
  const int d = static_cast<int>(b.size());
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> y(d, 0.0);
  for (int k = 0; k < d; ++k) {
    int best = -1;
    double best_e = 2.0;
    for (int j = k; j < d; ++j) {
      double s = 0.0, v = a(j, j);
      for (int m = 0; m < k; ++m) {
        s += chol(j, m) * y[m];
        v -= chol(j, m) * chol(j, m);
      }
      if (v < -1e-10)
        throw std::invalid_argument("mvn_cdf: correlation not positive definite");
      const double e = norm_cdf((b[j] - s) / std::sqrt(std::max(v, 1e-300)));
      if (e < best_e) {
        best_e = e;
        best = j;
      }
    }
    if (best != k) {
      std::swap(b[best], b[k]);
      a.row(best).swap(a.row(k));
      a.col(best).swap(a.col(k));
      chol.row(best).head(k).swap(chol.row(k).head(k));
    }
    double s = 0.0, v = a(k, k);
    for (int m = 0; m < k; ++m) {
      s += chol(k, m) * y[m];
      v -= chol(k, m) * chol(k, m);
    }
    if (v <= 1e-12)
      throw std::invalid_argument("mvn_cdf: correlation not positive definite");
    chol(k, k) = std::sqrt(v);
    for (int i = k + 1; i < d; ++i) {
      double cij = a(i, k);
      for (int m = 0; m < k; ++m) cij -= chol(i, m) * chol(k, m);
      chol(i, k) = cij / chol(k, k);
    }
    const double beta = (b[k] - s) / chol(k, k);
    const double cph = norm_cdf(beta);
    y[k] = cph > 1e-300 ? -norm_pdf(beta) / cph : -std::fabs(beta);
  }
  return {std::move(chol), std::move(b), d};
}

inline double clamp_unit(double u) {
  return std::min(1.0 - 1e-16, std::max(1e-300, u));
}

// One randomized-lattice estimate of the SOV integrand mean. When dof > 0
// the first QMC coordinate drives the chi-squared scale mixing for the
// multivariate t case.
inline double sov_shift_estimate(const SovProblem& p, double dof,
                                 int n_points, std::uint64_t shift_seed) {
  const int d = p.dim;
  const int qdim = (dof > 0.0 ? d : d - 1);
  const auto gen = richtmyer_generators(std::max(qdim, 1));
  Rng rng(shift_seed);
  std::vector<double> shift(qdim), x(qdim);
  for (int j = 0; j < qdim; ++j) {
    shift[j] = rng.uniform();
    x[j] = shift[j];
  }
  std::vector<double> y(d, 0.0);
  double total = 0.0;
  for (int i = 0; i < n_points; ++i) {
    for (int j = 0; j < qdim; ++j) {
      x[j] += gen[j];
      if (x[j] >= 1.0) x[j] -= 1.0;
    }
    int qused = 0;
    double scale = 1.0;
    if (dof > 0.0) {
      const double u0 = std::fabs(2.0 * x[qused++] - 1.0);
      scale = std::sqrt(chi_squared_quantile(clamp_unit(u0), dof) / dof);
    }
    double prob = 1.0;
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int m = 0; m < k; ++m) s += p.chol(k, m) * y[m];
      const double beta = (p.upper[k] * scale - s) / p.chol(k, k);
      const double e = norm_cdf(beta);
      prob *= e;
      if (prob <= 0.0) {
        prob = 0.0;
        break;
      }
      if (k < d - 1) {
        const double u = std::fabs(2.0 * x[qused++] - 1.0);  // baker fold
        y[k] = norm_quantile(clamp_unit(u * e));
      }
    }
    total += prob;
  }
  return total / n_points;
}

inline ProbResult sov_probability(const std::vector<double>& upper,
                                  const Eigen::MatrixXd& corr, double dof,
                                  QmcAccuracy acc, std::uint64_t seed) {
  const int d = static_cast<int>(upper.size());
  if (d < 1) throw std::invalid_argument("mvn_cdf: dimension must be >= 1");
  if (corr.rows() != d || corr.cols() != d)
    throw std::invalid_argument("mvn_cdf: correlation dimension mismatch");

  // Degenerate limits: +inf coordinates marginalize out, -inf gives zero.
  std::vector<int> keep;
  for (int j = 0; j < d; ++j) {
    if (upper[j] == -std::numeric_limits<double>::infinity()) return {0.0, 0.0};
    if (upper[j] != std::numeric_limits<double>::infinity()) keep.push_back(j);
  }
  if (keep.empty()) return {1.0, 0.0};
  std::vector<double> b(keep.size());
  Eigen::MatrixXd a(keep.size(), keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    b[i] = upper[keep[i]];
    for (std::size_t j = 0; j < keep.size(); ++j) a(i, j) = corr(keep[i], keep[j]);
  }
  const int dd = static_cast<int>(keep.size());

  if (dd == 1) {
    const double v = dof > 0.0 ? student_t_cdf(b[0], dof) : norm_cdf(b[0]);
    return {v, 0.0};
  }
  if (dd == 2) {
    if (!(std::fabs(a(0, 1)) < 1.0))
      throw std::invalid_argument("mvn_cdf: correlation not positive definite");
    const double v = dof > 0.0 ? bvt_cdf(b[0], b[1], a(0, 1), dof)
                               : bvn_cdf(b[0], b[1], a(0, 1));
    return {v, dof > 0.0 ? 1e-8 : 1e-14};
  }

  const SovProblem p = reorder_and_factor(b, a);
  if (acc.shifts < 2) acc.shifts = 2;
  int n_points = std::max(acc.samples, 16);
  ProbResult out;
  for (int attempt = 0; attempt < 5; ++attempt) {
    std::vector<double> means(acc.shifts);
    parallel_for(acc.shifts, [&](std::size_t s) {
      means[s] = sov_shift_estimate(p, dof, n_points,
                                    derive_seed(seed, s, attempt));
    });
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= acc.shifts;
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= acc.shifts * (acc.shifts - 1.0);
    out.prob = std::min(1.0, std::max(0.0, mean));
    out.error_estimate = 3.0 * std::sqrt(var);
    if (acc.tolerance <= 0.0 || out.error_estimate <= acc.tolerance) break;
    n_points *= 4;
  }
  return out;
}

}  // namespace detail

// P(X <= upper) for a zero-mean Gaussian vector with the given correlation.
inline ProbResult mvn_cdf(const std::vector<double>& upper,
                          const Eigen::MatrixXd& corr,
                          QmcAccuracy acc = {}, std::uint64_t seed = 1) {
  return detail::sov_probability(upper, corr, 0.0, acc, seed);
}

// P(T <= upper) for a central multivariate t with the given correlation
// and dof degrees of freedom; converges to mvn_cdf as dof grows.
inline ProbResult mvt_cdf(const std::vector<double>& upper,
                          const Eigen::MatrixXd& corr, double dof,
                          QmcAccuracy acc = {}, std::uint64_t seed = 1) {
  if (!(dof > 0.0)) throw std::invalid_argument("mvt_cdf: dof must be > 0");
  return detail::sov_probability(upper, corr, dof, acc, seed);
}

}  // namespace spex

#endif  // SPEX_MVN_HPP
