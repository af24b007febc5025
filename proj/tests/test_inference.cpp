#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spex/inference.hpp"
#include "spex/margins.hpp"
#include "test_util.hpp"

using namespace spex;

TEST_CASE("bic identity and reference values") {
  CHECK(bic(0.0, 0, 10) == 0.0);

  // Wind-application table: logliks with k in {2,3,4,3,2} at n = 1594.
  const double logliks[] = {4242.2, 4290.2, 4294.1, 4292.7, 4157.7};
  const std::size_t ks[] = {2, 3, 4, 3, 2};
  const double expected[] = {-8469.5, -8558.4, -8558.7, -8563.4, -8300.6};
  for (int i = 0; i < 5; ++i)
    CHECK(bic(logliks[i], ks[i], 1594) == Catch::Approx(expected[i]).margin(0.2));
}

TEST_CASE("maximize finds a quadratic argmax") {
  const std::vector<double> data{1.0, 2.0, 4.0, -1.0, 3.0};
  Objective obj = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (double x : data) s -= (x - p[0]) * (x - p[0]);
    return s;
  };
  const double target = spex_test::mean_of(data);
  const auto fit = maximize(obj, {50.0}, {ParamTransform::identity()}, {"c"});
  CHECK(fit.converged);
  CHECK(fit.estimates[0] == Catch::Approx(target).margin(1e-5));
}

TEST_CASE("maximize escapes or cleanly fails on NaN regions") {
  // NaN for negative arguments, smooth maximum at 2 otherwise.
  Objective obj = [](const std::vector<double>& p) {
    if (p[0] < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return -(p[0] - 2.0) * (p[0] - 2.0);
  };
  const auto fit = maximize(obj, {0.5}, {ParamTransform::identity()});
  CHECK(fit.estimates[0] == Catch::Approx(2.0).margin(1e-4));

  // Objective that is non-finite at the init must be rejected loudly.
  Objective broken = [](const std::vector<double>&) {
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS(maximize(broken, {0.5}, {ParamTransform::identity()}));
}

TEST_CASE("maximize is invariant to reparameterization") {
  Rng rng(5150);
  std::vector<double> y(4000);
  for (auto& v : y) v = 2.5 * rng.exponential();
  Objective obj = [&](const std::vector<double>& p) {
    double ll = 0.0;
    for (double v : y) ll += -std::log(p[0]) - v / p[0];
    return ll;
  };
  OptimSettings cfg;
  cfg.seed = 9;
  const auto nat = maximize(obj, {1.0}, {ParamTransform::identity()}, {}, cfg);
  const auto log = maximize(obj, {1.0}, {ParamTransform::log()}, {}, cfg);
  CHECK(nat.estimates[0] == Catch::Approx(log.estimates[0]).margin(1e-4));
}

TEST_CASE("observed information standard errors") {
  // Gaussian mean with known sigma: SE = sigma / sqrt(n).
  Rng rng(31337);
  const double sigma = 2.0;
  const std::size_t n = 4000;
  std::vector<double> x(n);
  for (auto& v : x) v = 0.7 + sigma * rng.normal();
  Objective obj = [&](const std::vector<double>& p) {
    double ll = 0.0;
    for (double v : x) ll -= 0.5 * (v - p[0]) * (v - p[0]) / (sigma * sigma);
    return ll;
  };
  std::vector<ParamTransform> tr{ParamTransform::identity()};
  auto fit = maximize(obj, {0.0}, tr);
  observed_info_se(obj, tr, fit);
  REQUIRE(!fit.se_flagged[0]);
  CHECK(fit.stderrs[0] == Catch::Approx(sigma / std::sqrt(double(n))).epsilon(0.05));

  // Flat direction is flagged, not silently reported.
  Objective flat = [&](const std::vector<double>& p) {
    return -(p[0] - 1.0) * (p[0] - 1.0);  // ignores p[1]
  };
  std::vector<ParamTransform> tr2{ParamTransform::identity(),
                                  ParamTransform::identity()};
  FitResult f2;
  f2.estimates = {1.0, 0.3};
  f2.names = {"a", "b"};
  observed_info_se(flat, tr2, f2);
  CHECK(f2.se_flagged[1]);

  // GP fit: numeric SEs close to the analytic Fisher values
  // var(tau) = 2 tau^2 (1+xi)/n, var(xi) = (1+xi)^2/n.
  const double tau = 1.0, xi = 0.5;
  std::vector<double> g(20000);
  Rng rng2(8080);
  for (auto& v : g) v = gp_quantile(rng2.uniform(), {tau, xi});
  auto gp_fit = fit_gp(g, 0.0);
  const double n2 = static_cast<double>(g.size());
  const double se_tau = std::sqrt(2.0 * tau * tau * (1.0 + xi) / n2);
  const double se_xi = (1.0 + xi) / std::sqrt(n2);
  CHECK(gp_fit.stderrs[0] == Catch::Approx(se_tau).epsilon(0.10));
  CHECK(gp_fit.stderrs[1] == Catch::Approx(se_xi).epsilon(0.10));
}

namespace {
std::optional<std::vector<double>> column_mean_fitter(
    const ObservationMatrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.n_rows; ++i) s += m.at(i, 0);
  return std::vector<double>{s / m.n_rows};
}
}  // namespace

TEST_CASE("stationary bootstrap") {
  Rng rng(2020);
  const std::size_t n = 400;
  ObservationMatrix m(n, 1);
  for (std::size_t i = 0; i < n; ++i) m.at(i, 0) = rng.normal();

  // iid data with mean block 1: bootstrap SE of the mean ~ s/sqrt(n).
  auto res = stationary_bootstrap(m, 1.0, 400, column_mean_fitter, 7);
  REQUIRE(res.replicates.size() == 400);
  std::vector<double> means;
  for (const auto& r : res.replicates) means.push_back(r[0]);
  std::vector<double> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = m.at(i, 0);
  const double se_boot = std::sqrt(spex_test::variance_of(means));
  const double se_classical =
      std::sqrt(spex_test::variance_of(src) / static_cast<double>(n));
  CHECK(se_boot == Catch::Approx(se_classical).epsilon(0.15));

  // Same seed reproduces quantiles exactly; block protocol runs at the
  // reference configuration B=100, mean block 10.
  auto q1 = stationary_bootstrap(m, 10.0, 100, column_mean_fitter, 3);
  auto q2 = stationary_bootstrap(m, 10.0, 100, column_mean_fitter, 3);
  CHECK(q1.quantiles == q2.quantiles);
  CHECK(q1.levels == std::vector<double>{0.05, 0.95});
  CHECK(q1.quantiles[0][0] < q1.quantiles[0][1]);

  // Marginal preservation: pooled resampled values match the source CDF.
  std::vector<double> pooled;
  Rng rng2(99);
  for (int b = 0; b < 50; ++b) {
    const auto idx = stationary_bootstrap_indices(n, 10.0, rng2);
    for (auto i : idx) pooled.push_back(m.at(i, 0));
  }
  auto sorted_src = src;
  std::sort(sorted_src.begin(), sorted_src.end());
  const double p = spex_test::ks_test(pooled, [&](double v) {
    const auto it = std::upper_bound(sorted_src.begin(), sorted_src.end(), v);
    return static_cast<double>(it - sorted_src.begin()) / sorted_src.size();
  });
  CHECK(p > 0.01);

  // Failed replicate fits are excluded and counted.
  int call = 0;
  auto flaky = [&call](const ObservationMatrix& mm)
      -> std::optional<std::vector<double>> {
    if (++call % 3 == 0) return std::nullopt;
    return column_mean_fitter(mm);
  };
  set_thread_count(1);
  auto res3 = stationary_bootstrap(m, 5.0, 30, flaky, 11);
  CHECK(res3.n_failures == 10);
  CHECK(res3.replicates.size() == 20);

  CHECK_THROWS(stationary_bootstrap(m, 300.0, 10, column_mean_fitter, 1));
}
