#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spex/depmeasures.hpp"
#include "spex/margins.hpp"
#include "test_util.hpp"

using namespace spex;

namespace {
const CovarianceSpec kCov{1.0, 1.0, std::nullopt};

// Distance at which the powered-exponential correlation equals rho.
double dist_for_rho(double rho) { return -std::log(rho); }

// Independent Student-t CDF oracle: integrate the density by quadrature.
double t_cdf_oracle(double x, double dof) {
  const double c = std::exp(std::lgamma((dof + 1.0) / 2.0) -
                            std::lgamma(dof / 2.0)) /
                   std::sqrt(dof * kPi);
  return 0.5 + spex_test::adaptive_simpson(
                   [&](double t) {
                     return c * std::pow(1.0 + t * t / dof,
                                         -(dof + 1.0) / 2.0);
                   },
                   0.0, x, 1e-12);
}
}  // namespace

TEST_CASE("empirical chi") {
  // Identical columns: chi_u = 1 at every level.
  ObservationMatrix same(10, 2, MarginScale::uniform);
  for (int i = 0; i < 10; ++i)
    same.at(i, 0) = same.at(i, 1) = (i + 1) / 11.0;
  for (double u : {0.3, 0.5, 0.8})
    CHECK(chi_u_empirical(same, 0, 1, u) == 1.0);

  // Independent uniforms: chi_u ~ 1 - u.
  Rng rng(99);
  const std::size_t n = 1000000;
  ObservationMatrix ind(n, 2, MarginScale::uniform);
  for (std::size_t i = 0; i < n; ++i) {
    ind.at(i, 0) = rng.uniform();
    ind.at(i, 1) = rng.uniform();
  }
  CHECK(chi_u_empirical(ind, 0, 1, 0.9) == Catch::Approx(0.1).margin(0.003));

  // Hand count: 1 joint exceedance, 2 conditioning exceedances -> 0.5.
  ObservationMatrix four(4, 2, MarginScale::uniform);
  const double a[4] = {0.8, 0.2, 0.4, 0.6};
  const double b[4] = {0.8, 0.6, 0.2, 0.4};
  for (int i = 0; i < 4; ++i) {
    four.at(i, 0) = a[i];
    four.at(i, 1) = b[i];
  }
  CHECK(chi_u_empirical(four, 0, 1, 0.5) == Catch::Approx(0.5));

  // Invariance under strictly increasing marginal transformations of raw
  // data (the estimator consumes ranks).
  ObservationMatrix raw(40, 2);
  Rng rng2(7);
  for (int i = 0; i < 40; ++i) {
    raw.at(i, 0) = rng2.normal();
    raw.at(i, 1) = 0.5 * raw.at(i, 0) + rng2.normal();
  }
  ObservationMatrix warped = raw;
  for (int i = 0; i < 40; ++i) {
    warped.at(i, 0) = std::exp(warped.at(i, 0));
    warped.at(i, 1) = std::atan(warped.at(i, 1));
  }
  const auto u1 = empirical_uniform(raw, 3);
  const auto u2 = empirical_uniform(warped, 3);
  CHECK(chi_u_empirical(u1, 0, 1, 0.7) == chi_u_empirical(u2, 0, 1, 0.7));

  CHECK_THROWS(chi_u_empirical(four, 0, 1, 0.9));  // sample too small
}

TEST_CASE("empirical eta") {
  ObservationMatrix same(100, 2, MarginScale::uniform);
  for (int i = 0; i < 100; ++i)
    same.at(i, 0) = same.at(i, 1) = (i + 1) / 101.0;
  CHECK(eta_u_empirical(same, 0, 1, 0.9) == Catch::Approx(1.0).margin(0.02));

  Rng rng(5);
  const std::size_t n = 400000;
  ObservationMatrix ind(n, 2, MarginScale::uniform);
  for (std::size_t i = 0; i < n; ++i) {
    ind.at(i, 0) = rng.uniform();
    ind.at(i, 1) = rng.uniform();
  }
  // log(1-u)/log((1-u)^2) = 1/2 under independence.
  CHECK(eta_u_empirical(ind, 0, 1, 0.95) == Catch::Approx(0.5).margin(0.02));

  ObservationMatrix tiny(4, 2, MarginScale::uniform);
  for (int i = 0; i < 4; ++i) {
    tiny.at(i, 0) = 0.1 + 0.1 * i;
    tiny.at(i, 1) = 0.5 - 0.1 * i;
  }
  CHECK(std::isnan(eta_u_empirical(tiny, 0, 1, 0.9)));  // no joint exceedances
}

TEST_CASE("extremogram") {
  Rng rng(11);
  // i.i.d. series: all lags within the 95% bound except a few by chance.
  std::vector<double> iid(4000);
  for (auto& v : iid) v = rng.uniform();
  const auto r = extremogram(iid, 0.95, 20, 42);
  int above = 0;
  for (std::size_t h = 0; h < 20; ++h)
    if (r.values[h] > r.upper_bound[h]) ++above;
  CHECK(above <= 4);

  // Series satisfying x_{t+1} = x_t: every exceedance pair is joint, so
  // the lag-1 value is exactly 1.
  std::vector<double> constant(12, 0.95);
  const auto re = extremogram(constant, 0.9, 1, 1, 50);
  CHECK(re.values[0] == Catch::Approx(1.0));

  // AR(1)-driven uniform series: lag-1 extremal dependence above the bound.
  const double phi_ar = 0.9;
  const double sd = std::sqrt(1.0 - phi_ar * phi_ar);
  std::vector<double> ar(6000);
  double x = 0.0;
  for (auto& v : ar) {
    x = phi_ar * x + sd * rng.normal();
    v = norm_cdf(x);
  }
  const auto ra = extremogram(ar, 0.95, 5, 3);
  CHECK(ra.values[0] > ra.upper_bound[0]);

  // Missing values are tolerated.
  ar[10] = ar[500] = std::numeric_limits<double>::quiet_NaN();
  CHECK_NOTHROW(extremogram(ar, 0.95, 5, 3));
}

TEST_CASE("theoretical chi") {
  const double h_half = dist_for_rho(0.5);

  // Gaussian copula: asymptotically independent at any rho < 1.
  CHECK(chi_theoretical(GaussianCopulaSpec{kCov}, 1.0).value == 0.0);

  // HW at the fitted wind value delta = 0.44: asymptotic independence.
  CHECK(chi_theoretical(HwSpec{0.44, kCov}, h_half).value == 0.0);

  // HOT Pareto limit at gamma = 1, rho = 0.5 versus the independent t-CDF
  // quadrature oracle: 2 - 2 T_2(sqrt(2)*0.5/sqrt(0.75)).
  const double arg = std::sqrt(2.0) * 0.5 / std::sqrt(0.75);
  const double oracle = 2.0 - 2.0 * t_cdf_oracle(arg, 2.0);
  const auto hot = chi_theoretical(HotSpec{0.0, 1.0, kCov}, h_half);
  CHECK(hot.value == Catch::Approx(oracle).margin(1e-9));
  CHECK(hot.value == Catch::Approx(0.5).margin(1e-9));  // closed-form value

  // Weibull-tailed HOT: chi = 0.
  CHECK(chi_theoretical(HotSpec{1.5, 1.0, kCov}, h_half).value == 0.0);

  // Location mixture, exponential-tailed: 2 - 2 Phi(theta sqrt((1-rho)/2)).
  const auto loc = chi_theoretical(LocationMixSpec{2.0, kCov}, h_half);
  CHECK(loc.value ==
        Catch::Approx(2.0 - 2.0 * norm_cdf(2.0 * std::sqrt(0.25))).epsilon(1e-12));

  // Max-stable / r-Pareto: 2 - V(1,1).
  const auto br = MaxStableSpec::brown_resnick(1.0, 1.0);
  const auto ms_chi = chi_theoretical(ModelSpec{br}, 0.8);
  CHECK(ms_chi.value ==
        Catch::Approx(2.0 - 2.0 * norm_cdf(std::sqrt(0.8 / 2.0))).epsilon(1e-12));
  CHECK(chi_theoretical(RParetoSpec{br, RiskFunctional::max()}, 0.8).value ==
        Catch::Approx(ms_chi.value).epsilon(1e-12));

  // Inverted max-stable: 0. Max-mixture: explicit unsupported error.
  CHECK(chi_theoretical(ImsSpec{br}, 0.8).value == 0.0);
  CHECK_THROWS_WITH(chi_theoretical(MaxMixSpec{0.5, br, br}, 0.8),
                    Catch::Matchers::ContainsSubstring("max-mixture"));
}

TEST_CASE("theoretical chi matches max-stable simulations") {
  // chi_u for max-stable data approaches 2 - V(1,1); compare at u = 0.99.
  const auto spec = MaxStableSpec::brown_resnick(1.0, 1.0);
  SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {0.6, 0.0}});
  const std::size_t n = 100000;
  auto sim = maxstable_simulate(spec, pair, n, 31, {1e-3, 1.0 - 1e-9});
  const auto u_matrix = empirical_uniform(sim.data, 1);
  const double chi_hat = chi_u_empirical(u_matrix, 0, 1, 0.99);
  const double chi = chi_theoretical(ModelSpec{spec}, 0.6).value;
  const double n_cond = n * 0.01;
  const double se = std::sqrt(chi * (1.0 - chi) / n_cond);
  CHECK(std::fabs(chi_hat - chi) < 3.0 * se + 0.01);
}

TEST_CASE("theoretical eta") {
  const double h_half = dist_for_rho(0.5);

  CHECK(eta_theoretical(GaussianCopulaSpec{kCov}, h_half) ==
        Catch::Approx(0.75).epsilon(1e-12));

  // Positive association for all rho in (0,1).
  for (double rho : {0.1, 0.5, 0.9}) {
    const double eta =
        eta_theoretical(GaussianCopulaSpec{kCov}, dist_for_rho(rho));
    CHECK(eta > 0.5);
    CHECK(eta < 1.0);
  }

  // HOT Weibull beta = 2 at rho = 0: (1/2)^(1/2).
  CHECK(eta_theoretical(HotSpec{2.0, 1.0, kCov}, 1e9) ==
        Catch::Approx(std::sqrt(0.5)).epsilon(1e-9));
  CHECK(eta_theoretical(HotSpec{2.0, 1.0, kCov}, 1e9) ==
        Catch::Approx(0.7071).margin(1e-4));

  // HW piecewise: eta_W = 0.75 at rho = 0.5.
  CHECK(eta_theoretical(HwSpec{0.25, kCov}, h_half) ==
        Catch::Approx(0.75).epsilon(1e-12));  // third branch
  CHECK(eta_theoretical(HwSpec{0.45, kCov}, h_half) ==
        Catch::Approx(0.45 / 0.55).epsilon(1e-12));  // middle branch
  CHECK(eta_theoretical(HwSpec{0.7, kCov}, h_half) == 1.0);

  // Asymptotically dependent families report 1; IMS reports 1/V(1,1).
  const auto br = MaxStableSpec::brown_resnick(1.0, 1.0);
  CHECK(eta_theoretical(ModelSpec{br}, 0.7) == 1.0);
  CHECK(eta_theoretical(LocationMixSpec{1.0, kCov}, 0.7) == 1.0);
  const double theta = 2.0 * norm_cdf(std::sqrt(0.7 / 2.0));
  CHECK(eta_theoretical(ImsSpec{br}, 0.7) ==
        Catch::Approx(1.0 / theta).epsilon(1e-12));
}

TEST_CASE("hw chi monte carlo behavior") {
  const double h_half = dist_for_rho(0.5);

  // delta -> 1: perfect dependence endpoint, chi -> 1 within error.
  const auto near_one = chi_theoretical(HwSpec{0.999, kCov}, h_half);
  CHECK(std::fabs(near_one.value - 1.0) < near_one.mc_error + 2e-3);

  // Cache: repeated calls give the identical value.
  const auto a = chi_theoretical(HwSpec{0.7, kCov}, h_half);
  const auto b = chi_theoretical(HwSpec{0.7, kCov}, h_half);
  CHECK(a.value == b.value);
  CHECK(a.value > 0.05);
  CHECK(a.mc_error > 0.0);
}
