#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spex/mixtures.hpp"
#include "test_util.hpp"

using namespace spex;

namespace {
SiteSet pair_sites(double h) {
  return SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
}
const CovarianceSpec kCov{1.0, 1.0, std::nullopt};
}  // namespace

TEST_CASE("hot mixing distribution") {
  HotSpec pareto_limit{0.0, 1.0, kCov};
  HotSpec weibull{2.0, 2.0, kCov};

  CHECK(hot_fr_cdf(1.0, weibull) == 0.0);
  CHECK(hot_fr_cdf(0.5, weibull) == 0.0);
  CHECK(hot_fr_cdf(2.0, pareto_limit) == Catch::Approx(0.5));
  CHECK(hot_fr_cdf(2.0, weibull) ==
        Catch::Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));
  CHECK(hot_fr_cdf(2.0, weibull) == Catch::Approx(0.950213).margin(1e-6));

  // Continuity in beta at 0.
  HotSpec tiny{1e-6, 0.7, kCov};
  HotSpec zero{0.0, 0.7, kCov};
  for (double r = 1.0; r <= 100.0; r += 3.3)
    CHECK(std::fabs(hot_fr_cdf(r, tiny) - hot_fr_cdf(r, zero)) < 1e-5);

  // quantile is the exact inverse.
  for (double p : {0.05, 0.4, 0.87, 0.999})
    CHECK(hot_fr_cdf(hot_fr_quantile(p, weibull), weibull) ==
          Catch::Approx(p).margin(1e-12));
  CHECK_THROWS(hot_fr_cdf(1.0, HotSpec{-1.0, 1.0, kCov}));
  CHECK_THROWS(hot_fr_cdf(1.0, HotSpec{1.0, 0.0, kCov}));
}

TEST_CASE("mixture joint cdf") {
  const auto sites = pair_sites(0.5);
  const auto corr = correlation_matrix(sites, kCov);
  const double rho = corr(0, 1);

  // Nearly degenerate mixing (gamma huge): F_W(x / r0) with r0 ~ 1.
  HotSpec degenerate{1.0, 1e8, kCov};
  const auto near = mixture_cdf(degenerate, corr, {0.7, 1.1});
  CHECK(near.value == Catch::Approx(bvn_cdf(0.7, 1.1, rho)).margin(1e-4));

  // x -> infinity gives 1.
  HotSpec hot{1.5, 1.2, kCov};
  CHECK(mixture_cdf(hot, corr, {1e8, 1e8}).value ==
        Catch::Approx(1.0).margin(1e-6));

  // D = 1: matches the Monte-Carlo CDF of simulated R*W draws.
  const SiteSet one = SiteSet::from_coords({{0.0, 0.0}});
  const auto corr1 = correlation_matrix(one, kCov);
  const auto sim = mixture_simulate(hot, one, 1000000, 99);
  for (double x : {0.5, 1.5, 4.0}) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < sim.n_rows; ++i)
      if (sim.at(i, 0) <= x) ++count;
    const double mc = static_cast<double>(count) / sim.n_rows;
    const double se = std::sqrt(mc * (1.0 - mc) / sim.n_rows);
    CHECK(std::fabs(mixture_cdf(hot, corr1, {x}).value - mc) < 3.0 * se + 1e-5);
  }

  // Monotone in each coordinate; 2-D rectangles have nonnegative mass.
  HwSpec hw{0.6, kCov};
  double prev = -1.0;
  for (double x = 1.1; x < 30.0; x *= 1.8) {
    const double v = mixture_cdf(hw, corr, {x, 7.0}).value;
    CHECK(v >= prev - 1e-10);
    prev = v;
  }
  auto rect = [&](double a1, double a2, double b1, double b2) {
    return mixture_cdf(hw, corr, {b1, b2}).value -
           mixture_cdf(hw, corr, {a1, b2}).value -
           mixture_cdf(hw, corr, {b1, a2}).value +
           mixture_cdf(hw, corr, {a1, a2}).value;
  };
  CHECK(rect(1.5, 2.0, 4.0, 9.0) >= -1e-9);
  CHECK(rect(1.1, 1.2, 2.0, 2.5) >= -1e-9);
}

TEST_CASE("hw margins closed form vs simulation") {
  HwSpec hw{0.7, kCov};
  HwMargins margins(hw);
  const auto sim = mixture_simulate(hw, pair_sites(0.4), 100000, 3);
  std::vector<double> x(sim.n_rows);
  for (std::size_t i = 0; i < sim.n_rows; ++i) x[i] = sim.at(i, 0);
  CHECK(spex_test::ks_test(x, [&](double v) { return margins.cdf(v); }) > 0.01);
  for (double u : {0.1, 0.5, 0.9, 0.99})
    CHECK(margins.cdf(margins.quantile(u)) == Catch::Approx(u).margin(1e-9));

  // delta = 1/2 branch.
  HwMargins half{HwSpec{0.5, kCov}};
  CHECK(half.cdf(half.quantile(0.8)) == Catch::Approx(0.8).margin(1e-9));
}

TEST_CASE("hot margins quantile acceleration") {
  HotSpec hot{1.3, 0.8, kCov};
  HotMargins slow(hot);
  HotMargins fast(hot);
  fast.prepare(0.5, 0.999);
  for (double u : {0.55, 0.8, 0.95, 0.99})
    CHECK(fast.quantile(u) == Catch::Approx(slow.quantile(u)).margin(1e-8));
  // Round trip.
  CHECK(slow.cdf(slow.quantile(0.9)) == Catch::Approx(0.9).margin(1e-9));
}

TEST_CASE("censored likelihood: gaussian copula closed cases") {
  const auto sites = pair_sites(0.5);
  const auto corr = correlation_matrix(sites, kCov);
  const double rho = corr(0, 1);
  GaussianCopulaSpec spec{kCov};

  // All data below u: contribution is log Phi2(z_u, z_u; rho) per row.
  ObservationMatrix low(3, 2, MarginScale::uniform);
  for (int i = 0; i < 3; ++i) {
    low.at(i, 0) = 0.2 + 0.1 * i;
    low.at(i, 1) = 0.15 + 0.1 * i;
  }
  const double u = 0.9;
  const double zu = norm_quantile(u);
  const auto res = censored_loglik_mixture(spec, sites, low, u);
  CHECK(res.loglik ==
        Catch::Approx(3.0 * std::log(bvn_cdf(zu, zu, rho))).epsilon(1e-10));
  CHECK(res.n_fully_censored == 3);

  // u -> 0: the full joint log-density (Gaussian copula density).
  ObservationMatrix row(1, 2, MarginScale::uniform);
  row.at(0, 0) = 0.7;
  row.at(0, 1) = 0.4;
  const double z1 = norm_quantile(0.7), z2 = norm_quantile(0.4);
  const double log_copula =
      -0.5 * std::log(1.0 - rho * rho) -
      (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) /
          (2.0 * (1.0 - rho * rho));
  const auto full = censored_loglik_mixture(spec, sites, row, 1e-9);
  CHECK(full.loglik == Catch::Approx(log_copula).epsilon(1e-8));
}

TEST_CASE("censored likelihood density coordinates match cdf differences") {
  // Uncensored coordinates contribute partial derivatives of the joint
  // CDF; cross-check against finite differences of mixture_cdf.
  const auto sites = pair_sites(0.6);
  const auto corr = correlation_matrix(sites, kCov);
  HotSpec hot{1.2, 1.5, kCov};
  HotMargins margins(hot);

  const double u = 0.8;
  const double x_thr = margins.quantile(u);
  const double u1 = 0.93;
  const double x1 = margins.quantile(u1);

  // One exceedance, one censored: d/dx1 F(x1, x_thr).
  ObservationMatrix row(1, 2, MarginScale::uniform);
  row.at(0, 0) = u1;
  row.at(0, 1) = 0.5;
  const auto res = censored_loglik_mixture(hot, sites, row, u);
  const double h = 1e-4 * x1;
  const double fd = (mixture_cdf(hot, corr, {x1 + h, x_thr}).value -
                     mixture_cdf(hot, corr, {x1 - h, x_thr}).value) /
                    (2.0 * h);
  const double expected = std::log(fd) - std::log(margins.pdf(x1));
  CHECK(res.loglik == Catch::Approx(expected).epsilon(1e-5));

  // Both exceed: mixed difference of the CDF.
  const double u2 = 0.96;
  const double x2 = margins.quantile(u2);
  ObservationMatrix row2(1, 2, MarginScale::uniform);
  row2.at(0, 0) = u1;
  row2.at(0, 1) = u2;
  const auto res2 = censored_loglik_mixture(hot, sites, row2, u);
  const double h2 = 2e-3;
  const double fd2 =
      (mixture_cdf(hot, corr, {x1 + h2, x2 + h2}).value -
       mixture_cdf(hot, corr, {x1 + h2, x2 - h2}).value -
       mixture_cdf(hot, corr, {x1 - h2, x2 + h2}).value +
       mixture_cdf(hot, corr, {x1 - h2, x2 - h2}).value) /
      (4.0 * h2 * h2);
  const double expected2 =
      std::log(fd2) - std::log(margins.pdf(x1)) - std::log(margins.pdf(x2));
  CHECK(res2.loglik == Catch::Approx(expected2).epsilon(1e-4));

  // Same cross-check for the HW model.
  HwSpec hw{0.65, kCov};
  HwMargins hwm(hw);
  const double y1 = hwm.quantile(u1), y2 = hwm.quantile(u2);
  ObservationMatrix row3(1, 2, MarginScale::uniform);
  row3.at(0, 0) = u1;
  row3.at(0, 1) = u2;
  const auto res3 = censored_loglik_mixture(hw, sites, row3, u);
  // Richardson-refined mixed differences keep the truncation error below
  // the tolerance.
  auto mixed_fd = [&](double step) {
    return (mixture_cdf(hw, corr, {y1 + step, y2 + step}).value -
            mixture_cdf(hw, corr, {y1 + step, y2 - step}).value -
            mixture_cdf(hw, corr, {y1 - step, y2 + step}).value +
            mixture_cdf(hw, corr, {y1 - step, y2 - step}).value) /
           (4.0 * step * step);
  };
  const double h3 = 2e-3 * y1;
  const double fd3 = (4.0 * mixed_fd(h3 / 2.0) - mixed_fd(h3)) / 3.0;
  const double expected3 =
      std::log(fd3) - std::log(hwm.pdf(y1)) - std::log(hwm.pdf(y2));
  CHECK(res3.loglik == Catch::Approx(expected3).epsilon(1e-4));
}

TEST_CASE("mixture simulation determinism and tail behavior") {
  HwSpec nearly_dependent{0.999, kCov};
  const auto sites = pair_sites(0.5);
  const auto a = mixture_simulate(nearly_dependent, sites, 500, 42);
  const auto b = mixture_simulate(nearly_dependent, sites, 500, 42);
  CHECK(a.values == b.values);
  const auto c = mixture_simulate(nearly_dependent, sites, 500, 43);
  CHECK(a.values != c.values);

  // delta -> 1: chi at u = 0.99 approaches 1.
  const std::size_t n = 200000;
  const auto sim = mixture_simulate(nearly_dependent, sites, n, 7);
  std::vector<double> col0(n), col1(n);
  for (std::size_t i = 0; i < n; ++i) {
    col0[i] = sim.at(i, 0);
    col1[i] = sim.at(i, 1);
  }
  auto rank_level = [&](std::vector<double> v, double lvl) {
    std::sort(v.begin(), v.end());
    return v[static_cast<std::size_t>(lvl * (v.size() - 1))];
  };
  const double q0 = rank_level(col0, 0.99), q1 = rank_level(col1, 0.99);
  std::size_t joint = 0, single = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (col1[i] > q1) {
      ++single;
      if (col0[i] > q0) ++joint;
    }
  }
  CHECK(static_cast<double>(joint) / single > 0.9);

  // Location mixture: mean 1/theta, variance 1/theta^2 + 1.
  LocationMixSpec loc{2.0, kCov};
  const auto lm = mixture_simulate(loc, sites, 200000, 11);
  std::vector<double> x(lm.n_rows);
  for (std::size_t i = 0; i < lm.n_rows; ++i) x[i] = lm.at(i, 0);
  CHECK(spex_test::mean_of(x) == Catch::Approx(0.5).margin(0.02));
  CHECK(spex_test::variance_of(x) == Catch::Approx(1.25).margin(0.03));
}
