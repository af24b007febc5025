#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spex/rpareto.hpp"
#include "test_util.hpp"

using namespace spex;

namespace {

SiteSet line_sites(std::initializer_list<double> xs) {
  std::vector<std::array<double, 2>> c;
  for (double x : xs) c.push_back({x, 0.0});
  return SiteSet::from_coords(std::move(c));
}

std::vector<double> row_vec(const ObservationMatrix& m, std::size_t i) {
  return std::vector<double>(m.row(i), m.row(i) + m.n_sites);
}

}  // namespace

TEST_CASE("risk functionals") {
  const std::vector<double> x{1.0, 3.0, 2.0};
  CHECK(risk_eval(RiskFunctional::max(), x) == 3.0);
  CHECK(risk_eval(RiskFunctional::min(), x) == 1.0);
  CHECK(risk_eval(RiskFunctional::mean(), x) == Catch::Approx(2.0));
  CHECK(risk_eval(RiskFunctional::site(2), x) == 2.0);
  CHECK_THROWS(risk_eval(RiskFunctional::site(5), x));

  // Homogeneity of order 1 for all four tags.
  std::vector<double> x5(x);
  for (auto& v : x5) v *= 5.0;
  for (auto r : {RiskFunctional::max(), RiskFunctional::min(),
                 RiskFunctional::mean(), RiskFunctional::site(1)})
    CHECK(risk_eval(r, x5) == Catch::Approx(5.0 * risk_eval(r, x)).epsilon(1e-14));
}

TEST_CASE("r-Pareto construction properties") {
  const RParetoSpec spec{MaxStableSpec::brown_resnick(1.0, 1.0),
                         RiskFunctional::max()};
  const auto sites = line_sites({0.0, 0.5, 1.3});
  const std::size_t n = 100000;
  const auto x = rpareto_simulate(spec, sites, n, 99);

  // r(W) = 1 to 1e-12 for every simulated profile, and r(X) is standard
  // Pareto: P(r(X) > 2) = 0.5.
  std::vector<double> rvals(n);
  std::size_t above2 = 0;
  double worst_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = row_vec(x, i);
    rvals[i] = risk_eval(spec.functional, row);
    if (rvals[i] > 2.0) ++above2;
    std::vector<double> w(row);
    for (auto& v : w) v /= rvals[i];
    worst_norm = std::max(worst_norm,
                          std::fabs(risk_eval(spec.functional, w) - 1.0));
  }
  CHECK(worst_norm <= 1e-12);
  CHECK(std::fabs(above2 / double(n) - 0.5) < 0.005);
  CHECK(spex_test::ks_test(rvals, [](double r) {
          return r < 1.0 ? 0.0 : 1.0 - 1.0 / r;
        }) > 0.01);

  // Threshold stability: rescaled exceedances match the unconditional law.
  std::vector<double> rescaled;
  for (double r : rvals)
    if (r > 2.0) rescaled.push_back(r / 2.0);
  CHECK(spex_test::ks_test_two_sample(rescaled, rvals) > 0.01);
}

TEST_CASE("site-functional conditional tail is Pareto") {
  const RParetoSpec spec{MaxStableSpec::brown_resnick(0.8, 1.2),
                         RiskFunctional::site(1)};
  const auto sites = line_sites({0.0, 0.5, 1.3});
  const auto x = rpareto_simulate(spec, sites, 50000, 3);
  std::vector<double> conditional;
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    const double v = x.at(i, 1);
    if (v > 2.0) conditional.push_back(v / 2.0);
  }
  CHECK(spex_test::ks_test(conditional, [](double r) {
          return r < 1.0 ? 0.0 : 1.0 - 1.0 / r;
        }) > 0.01);
}

TEST_CASE("mean functional keeps r(X) Pareto without rejection") {
  const RParetoSpec spec{MaxStableSpec::brown_resnick(1.0, 1.0),
                         RiskFunctional::mean()};
  const auto sites = line_sites({0.0, 0.6});
  const auto x = rpareto_simulate(spec, sites, 50000, 12);
  std::vector<double> rvals(x.n_rows);
  for (std::size_t i = 0; i < x.n_rows; ++i)
    rvals[i] = risk_eval(spec.functional, row_vec(x, i));
  CHECK(spex_test::ks_test(rvals, [](double r) {
          return r < 1.0 ? 0.0 : 1.0 - 1.0 / r;
        }) > 0.01);
}

TEST_CASE("r-Pareto pair dependence matches 2 - V(1,1)") {
  // For Pareto processes chi_u = 2 - V(1,1) at all levels; this pins the
  // simulated law to the exponent function used by the likelihood.
  const RParetoSpec spec{MaxStableSpec::brown_resnick(1.0, 1.0),
                         RiskFunctional::max()};
  const auto sites = line_sites({0.0, 0.7});
  MsModel model(spec.base, sites);
  const double chi = 2.0 - model.extremal_coefficient(0, 1);
  const std::size_t n = 200000;
  const auto x = rpareto_simulate(spec, sites, n, 2718);
  // Rank-based joint tail: P(U1 > u | U2 > u) at u = 0.95.
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = x.at(i, 0);
    b[i] = x.at(i, 1);
  }
  auto rank_u = [&](std::vector<double> v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t p, std::size_t q) { return v[p] < v[q]; });
    std::vector<double> u(v.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
      u[idx[r]] = (r + 1.0) / (v.size() + 1.0);
    return u;
  };
  const auto ua = rank_u(a), ub = rank_u(b);
  const double lvl = 0.95;
  std::size_t joint = 0, single = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ub[i] > lvl) {
      ++single;
      if (ua[i] > lvl) ++joint;
    }
  }
  const double chi_hat = double(joint) / double(single);
  const double se = std::sqrt(chi * (1 - chi) / double(single));
  CHECK(std::fabs(chi_hat - chi) < 4.0 * se + 0.01);
}

TEST_CASE("censored r-Pareto likelihood closed cases") {
  // D = 1, max functional: contribution log(u / y^2) for y > u
  // (V(z) = 1/z, V' = -z^-2, K = V(u) = 1/u).
  const auto sites1 = line_sites({0.0});
  const RParetoSpec spec1{MaxStableSpec::brown_resnick(1.0, 1.0),
                          RiskFunctional::max()};
  MsModel m1(spec1.base, sites1);
  ObservationMatrix d1(2, 1, MarginScale::pareto);
  d1.at(0, 0) = 25.0;
  d1.at(1, 0) = 31.0;
  const double u = 20.0;
  const auto res = censored_loglik_rpareto(spec1, m1, d1, u);
  CHECK(res.loglik == Catch::Approx(std::log(u / (25.0 * 25.0)) +
                                    std::log(u / (31.0 * 31.0))).epsilon(1e-12));
  CHECK(res.rows_used == 2);

  // Structural: a row censored everywhere except one site uses V_{j}
  // evaluated at (y_j, u elsewhere).
  const auto sites3 = line_sites({0.0, 0.4, 1.0});
  const RParetoSpec spec3{MaxStableSpec::brown_resnick(1.0, 1.0),
                          RiskFunctional::max()};
  MsModel m3(spec3.base, sites3);
  ObservationMatrix d3(1, 3, MarginScale::pareto);
  d3.at(0, 0) = 5.0;
  d3.at(0, 1) = 30.0;
  d3.at(0, 2) = 12.0;
  const auto r3 = censored_loglik_rpareto(spec3, m3, d3, u);
  const std::vector<double> uu(3, u);
  const double expected =
      m3.log_neg_v_partial({u, 30.0, u}, {1}) - std::log(m3.exponent_v(uu));
  CHECK(r3.loglik == Catch::Approx(expected).epsilon(1e-12));

  // Row with r(row) <= u rejected unless filtering is requested.
  ObservationMatrix low(1, 3, MarginScale::pareto);
  low.at(0, 0) = 1.0;
  low.at(0, 1) = 2.0;
  low.at(0, 2) = 3.0;
  CHECK_THROWS(censored_loglik_rpareto(spec3, m3, low, u));
  const auto skipped =
      censored_loglik_rpareto(spec3, m3, low, u, {true});
  CHECK(skipped.rows_used == 0);
  CHECK(skipped.rows_skipped_below_threshold == 1);

  // Unsupported normalization: min/site functionals raise explicit errors.
  const RParetoSpec bad{MaxStableSpec::brown_resnick(1.0, 1.0),
                        RiskFunctional::min()};
  CHECK_THROWS_WITH(censored_loglik_rpareto(bad, m3, d3, u),
                    Catch::Matchers::ContainsSubstring("not supported"));
}

TEST_CASE("censored likelihood prefers dependent data over noise") {
  const auto sites = line_sites({0.0, 0.3, 0.9, 1.4});
  const RParetoSpec spec{MaxStableSpec::brown_resnick(1.0, 1.0),
                         RiskFunctional::max()};
  MsModel model(spec.base, sites);
  const double u = 2.0;
  const std::size_t n = 400;
  auto dep = rpareto_simulate(spec, sites, n, 5);
  for (auto& v : dep.values) v *= u;  // all rows exceed by construction

  // Independent noise with the same marginal flavor.
  ObservationMatrix noise(n, 4, MarginScale::pareto);
  Rng rng(17);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      noise.at(i, j) = u * rng.pareto();
  RParetoLoglikOptions opt{true};
  const auto ll_dep = censored_loglik_rpareto(spec, model, dep, u, opt);
  const auto ll_noise = censored_loglik_rpareto(spec, model, noise, u, opt);
  CHECK(ll_dep.loglik / ll_dep.rows_used >
        ll_noise.loglik / std::max<std::size_t>(ll_noise.rows_used, 1));
}
