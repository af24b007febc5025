// Gaussian process simulation on a site set and conditioning on a zero
// value at a chosen site.

#ifndef SPEX_GAUSSIAN_HPP
#define SPEX_GAUSSIAN_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "spex/covariance.hpp"
#include "spex/data.hpp"
#include "spex/parallel.hpp"
#include "spex/rng.hpp"

namespace spex {

inline Eigen::MatrixXd correlation_matrix(const SiteSet& sites,
                                          const CovarianceSpec& spec) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd c(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    c(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double r = correlation_at_distance(
          spec, aniso_distance(spec, sites.coords[i], sites.coords[j]));
      c(i, j) = r;
      c(j, i) = r;
    }
  }
  return c;
}

// Cholesky with escalating diagonal jitter: 1e-10, x10 steps, up to 1e-6.
inline Eigen::MatrixXd cholesky_with_jitter(Eigen::MatrixXd m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  for (double jitter = 1e-10; jitter <= 1.0000001e-6; jitter *= 10.0) {
    Eigen::MatrixXd jittered = m;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error(
      "cholesky_with_jitter: matrix not positive definite after max jitter");
}

// n independent zero-mean unit-variance Gaussian vectors with the given
// correlation structure. Row i is reproducible from (seed, i) alone.
inline ObservationMatrix gp_simulate(const SiteSet& sites,
                                     const CovarianceSpec& spec,
                                     std::size_t n, std::uint64_t seed) {
  const Eigen::MatrixXd chol = cholesky_with_jitter(
      correlation_matrix(sites, spec));
  const auto d = sites.size();
  ObservationMatrix out(n, d, MarginScale::raw);
  out.site_ids = sites.labels;
  parallel_for(n, [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    Eigen::VectorXd z(d);
    for (std::size_t j = 0; j < d; ++j) z(j) = rng.normal();
    const Eigen::VectorXd x = chol * z;
    for (std::size_t j = 0; j < d; ++j) out.at(i, j) = x(j);
  });
  return out;
}

struct ConditionedGaussian {
  Eigen::VectorXd mean;  // zero vector (degenerate zero at s0)
  Eigen::MatrixXd cov;   // C - c0 c0^T / C00; row/col s0 identically zero
};

// Law of a zero-mean Gaussian vector given that component s0 equals 0.
inline ConditionedGaussian gp_condition_zero(const SiteSet& sites,
                                             std::size_t s0_index,
                                             const CovarianceSpec& spec) {
  if (s0_index >= sites.size())
    throw std::out_of_range("gp_condition_zero: s0 index out of range");
  const Eigen::MatrixXd c = correlation_matrix(sites, spec);
  const auto d = static_cast<Eigen::Index>(sites.size());
  const auto k = static_cast<Eigen::Index>(s0_index);
  ConditionedGaussian out;
  out.mean = Eigen::VectorXd::Zero(d);
  out.cov = c - (c.col(k) * c.row(k)) / c(k, k);
  // Exact zeros at the conditioning site rather than rounding residue.
  out.cov.row(k).setZero();
  out.cov.col(k).setZero();
  return out;
}

}  // namespace spex

#endif  // SPEX_GAUSSIAN_HPP
