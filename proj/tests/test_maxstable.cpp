#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "spex/maxstable.hpp"
#include "test_util.hpp"

using namespace spex;

namespace {

SiteSet line_sites(std::initializer_list<double> xs) {
  std::vector<std::array<double, 2>> c;
  for (double x : xs) c.push_back({x, 0.0});
  return SiteSet::from_coords(std::move(c));
}

// Central finite difference of the bivariate exponent function.
double fd_v1(const MsModel& m, double z1, double z2, double h) {
  return (m.pair_v(0, 1, z1 + h, z2) - m.pair_v(0, 1, z1 - h, z2)) / (2.0 * h);
}
double fd_v12(const MsModel& m, double z1, double z2, double h) {
  return (m.pair_v(0, 1, z1 + h, z2 + h) - m.pair_v(0, 1, z1 + h, z2 - h) -
          m.pair_v(0, 1, z1 - h, z2 + h) + m.pair_v(0, 1, z1 - h, z2 - h)) /
         (4.0 * h * h);
}

}  // namespace

TEST_CASE("exponent function special values") {
  const auto spec = MaxStableSpec::brown_resnick(1.0, 1.0);
  MsModel m(spec, line_sites({0.0, 1.0}));

  // Singleton: unit Frechet margin.
  CHECK(m.exponent_v({2.0}, {0}) == Catch::Approx(0.5));

  // V(1,1) = 2 Phi(sqrt((h/phi)^nu / 2)).
  CHECK(m.extremal_coefficient(0, 1) ==
        Catch::Approx(2.0 * norm_cdf(std::sqrt(0.5))).epsilon(1e-12));

  // Independence limit at huge distance.
  MsModel far(spec, line_sites({0.0, 1e8}));
  CHECK(far.exponent_v({1.0, 2.0}, {0, 1}) == Catch::Approx(1.5).margin(1e-9));

  // Complete dependence limit at tiny distance.
  MsModel near(spec, line_sites({0.0, 1e-9}));
  CHECK(near.exponent_v({1.0, 1.0}, {0, 1}) == Catch::Approx(1.0).margin(1e-4));

  CHECK_THROWS(m.exponent_v({-1.0, 1.0}, {0, 1}));

  // Extremal-t bivariate extremal coefficient 2 T_{dof+1}(...).
  const auto et = MaxStableSpec::extremal_t(2.0, {1.0, 1.0, std::nullopt});
  MsModel me(et, line_sites({0.0, 0.7}));
  const double rho = std::exp(-0.7);
  const double arg = std::sqrt(3.0 * (1.0 - rho) / (1.0 + rho));
  CHECK(me.extremal_coefficient(0, 1) ==
        Catch::Approx(2.0 * student_t_cdf(arg, 3.0)).epsilon(1e-12));
}

TEST_CASE("exponent function homogeneity and bounds") {
  for (auto spec : {MaxStableSpec::brown_resnick(1.0, 0.8),
                    MaxStableSpec::extremal_t(1.5, {1.0, 1.0, std::nullopt})}) {
    MsModel m(spec, line_sites({0.0, 0.6, 1.4, 2.1}));
    const std::vector<double> z{0.8, 1.7, 0.4, 2.2};
    const double v = m.exponent_v(z);
    for (double t : {0.5, 2.0, 10.0}) {
      std::vector<double> tz(z);
      for (auto& x : tz) x *= t;
      CHECK(m.exponent_v(tz) == Catch::Approx(v / t).margin(1e-10));
    }
    double lower = 0.0, upper = 0.0;
    for (double x : z) {
      lower = std::max(lower, 1.0 / x);
      upper += 1.0 / x;
    }
    CHECK(v >= lower - 1e-6);
    CHECK(v <= upper + 1e-6);
  }
}

TEST_CASE("bivariate partials agree with finite differences") {
  for (auto spec : {MaxStableSpec::brown_resnick(1.0, 1.0),
                    MaxStableSpec::extremal_t(2.5, {1.0, 0.9, std::nullopt})}) {
    MsModel m(spec, line_sites({0.0, 1.0}));  // h = phi
    const double z1 = 1.0, z2 = 2.0;
    const double h = 1e-5;
    CHECK(m.pair_v1(0, 1, z1, z2) ==
          Catch::Approx(fd_v1(m, z1, z2, h)).epsilon(1e-6));
    CHECK(m.pair_v12(0, 1, z1, z2) ==
          Catch::Approx(fd_v12(m, z1, z2, 1e-4)).epsilon(1e-6));

    // Homogeneity of degree -2 for first partials.
    for (double t : {0.5, 2.0, 10.0})
      CHECK(m.pair_v1(0, 1, t * z1, t * z2) ==
            Catch::Approx(m.pair_v1(0, 1, z1, z2) / (t * t)).epsilon(1e-10));
  }

  // Independence limit: V1 -> -1/z1^2, V12 -> 0.
  MsModel far(MaxStableSpec::brown_resnick(1.0, 1.0), line_sites({0.0, 1e8}));
  CHECK(far.pair_v1(0, 1, 2.0, 1.0) == Catch::Approx(-0.25).margin(1e-9));
  CHECK(std::fabs(far.pair_v12(0, 1, 2.0, 1.0)) < 1e-12);
}

TEST_CASE("subset partial derivatives match finite differences of V") {
  const auto spec = MaxStableSpec::brown_resnick(1.2, 0.9);
  MsModel m(spec, line_sites({0.0, 0.8, 1.9}));
  const std::vector<double> z{1.1, 0.7, 1.9};

  // d V / d z0 with others fixed at their values.
  auto v_at = [&](double a, double b, double c) {
    return m.exponent_v({a, b, c});
  };
  const double h = 1e-5;
  const double fd1 =
      (v_at(z[0] + h, z[1], z[2]) - v_at(z[0] - h, z[1], z[2])) / (2 * h);
  CHECK(-std::exp(m.log_neg_v_partial(z, {0})) ==
        Catch::Approx(fd1).epsilon(1e-6));

  // Mixed second partial d2 V / dz0 dz2.
  const double h2 = 1e-4;
  const double fd2 =
      (v_at(z[0] + h2, z[1], z[2] + h2) - v_at(z[0] + h2, z[1], z[2] - h2) -
       v_at(z[0] - h2, z[1], z[2] + h2) + v_at(z[0] - h2, z[1], z[2] - h2)) /
      (4 * h2 * h2);
  CHECK(std::exp(m.log_neg_v_partial(z, {0, 2})) ==
        Catch::Approx(-fd2).epsilon(1e-5));

  // Bivariate consistency with the closed-form partials.
  MsModel pair(spec, line_sites({0.0, 0.8}));
  const std::vector<double> zp{1.3, 0.6};
  CHECK(std::exp(pair.log_neg_v_partial(zp, {0})) ==
        Catch::Approx(-pair.pair_v1(0, 1, zp[0], zp[1])).epsilon(1e-12));
  CHECK(std::exp(pair.log_neg_v_partial(zp, {0, 1})) ==
        Catch::Approx(-pair.pair_v12(0, 1, zp[0], zp[1])).epsilon(1e-12));

  // Extremal-t bivariate consistency.
  MsModel tp(MaxStableSpec::extremal_t(2.0, {1.0, 1.0, std::nullopt}),
             line_sites({0.0, 0.8}));
  CHECK(std::exp(tp.log_neg_v_partial(zp, {0})) ==
        Catch::Approx(-tp.pair_v1(0, 1, zp[0], zp[1])).epsilon(1e-10));
  CHECK(std::exp(tp.log_neg_v_partial(zp, {0, 1})) ==
        Catch::Approx(-tp.pair_v12(0, 1, zp[0], zp[1])).epsilon(1e-10));
  const double fd_t =
      (tp.pair_v(0, 1, zp[0] + h, zp[1]) - tp.pair_v(0, 1, zp[0] - h, zp[1])) /
      (2 * h);
  CHECK(-std::exp(tp.log_neg_v_partial(zp, {0})) ==
        Catch::Approx(fd_t).epsilon(1e-6));
}

TEST_CASE("max-stable density") {
  // D = 1: unit Frechet density.
  MsModel one(MaxStableSpec::brown_resnick(1.0, 1.0), line_sites({0.0}));
  CHECK(one.density({2.0}) ==
        Catch::Approx(std::exp(-0.5) / 4.0).epsilon(1e-12));

  // D = 2: exp(-V)(V1 V2 - V12) and the mixed finite difference of the CDF.
  MsModel two(MaxStableSpec::brown_resnick(1.0, 1.0), line_sites({0.0, 0.9}));
  const double z1 = 1.4, z2 = 0.8;
  const double direct =
      std::exp(-two.pair_v(0, 1, z1, z2)) *
      (two.pair_v1(0, 1, z1, z2) * two.pair_v2(0, 1, z1, z2) -
       two.pair_v12(0, 1, z1, z2));
  CHECK(two.density({z1, z2}) == Catch::Approx(direct).epsilon(1e-10));
  auto cdf2 = [&](double a, double b) {
    return std::exp(-two.pair_v(0, 1, a, b));
  };
  const double h = 1e-3;
  const double fd =
      (cdf2(z1 + h, z2 + h) - cdf2(z1 + h, z2 - h) - cdf2(z1 - h, z2 + h) +
       cdf2(z1 - h, z2 - h)) /
      (4 * h * h);
  CHECK(two.density({z1, z2}) == Catch::Approx(fd).epsilon(1e-6));

  // D = 3: exactly Bell(3) = 5 partition terms.
  MsModel three(MaxStableSpec::brown_resnick(1.0, 1.0),
                line_sites({0.0, 0.7, 1.5}));
  CHECK(three.partition_count() == 5);
  CHECK(three.density({1.0, 1.3, 0.9}) > 0.0);

  // D = 7 rejected with a pointer to the pairwise likelihood.
  MsModel seven(MaxStableSpec::brown_resnick(1.0, 1.0),
                line_sites({0, 1, 2, 3, 4, 5, 6}));
  CHECK_THROWS_WITH(seven.density({1, 1, 1, 1, 1, 1, 1}),
                    Catch::Matchers::ContainsSubstring("pairwise"));
}

TEST_CASE("max-stable simulation marginals and dependence") {
  const auto spec = MaxStableSpec::brown_resnick(1.0, 1.0);

  // D = 1: exactly unit Frechet (the profile is identically 1).
  auto single = maxstable_simulate(spec, line_sites({0.0}), 20000, 11);
  REQUIRE(single.accuracy_reached);
  std::vector<double> z(single.data.n_rows);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = single.data.at(i, 0);
  CHECK(spex_test::ks_test(z, [](double v) { return std::exp(-1.0 / v); }) >
        0.01);

  // Pairwise empirical extremal coefficient vs V(1,1): 1/max(Z1,Z2) is
  // Exp(theta), so theta_hat = 1/mean with SE theta/sqrt(n).
  SiteSet pair_sites = line_sites({0.0, 0.8});
  MsModel model(spec, pair_sites);
  const std::size_t n = 30000;
  auto sim = maxstable_simulate(spec, pair_sites, n, 77);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += 1.0 / std::max(sim.data.at(i, 0), sim.data.at(i, 1));
  const double theta_hat = static_cast<double>(n) / s;
  const double theta = model.extremal_coefficient(0, 1);
  CHECK(std::fabs(theta_hat - theta) < 3.5 * theta / std::sqrt(double(n)));

  // Max-stability: max of 4 fields / 4 vs single fields (two-sample KS).
  const std::size_t ng = 6000;
  auto pool = maxstable_simulate(spec, pair_sites, 4 * ng, 123);
  std::vector<double> grouped(ng);
  for (std::size_t i = 0; i < ng; ++i) {
    double mx = 0.0;
    for (int k = 0; k < 4; ++k) mx = std::max(mx, pool.data.at(4 * i + k, 0));
    grouped[i] = mx / 4.0;
  }
  auto singles = maxstable_simulate(spec, pair_sites, ng, 321);
  std::vector<double> lone(ng);
  for (std::size_t i = 0; i < ng; ++i) lone[i] = singles.data.at(i, 0);
  CHECK(spex_test::ks_test_two_sample(grouped, lone) > 0.01);

  // Determinism.
  auto a = maxstable_simulate(spec, pair_sites, 100, 5);
  auto b = maxstable_simulate(spec, pair_sites, 100, 5);
  CHECK(a.data.values == b.data.values);
  set_thread_count(4);
  auto c = maxstable_simulate(spec, pair_sites, 100, 5);
  set_thread_count(1);
  CHECK(a.data.values == c.data.values);
}

TEST_CASE("extremal-t simulation matches its extremal coefficient") {
  const auto spec = MaxStableSpec::extremal_t(2.0, {1.0, 1.0, std::nullopt});
  SiteSet sites = line_sites({0.0, 0.5});
  MsModel model(spec, sites);
  const std::size_t n = 30000;
  auto sim = maxstable_simulate(spec, sites, n, 2024);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += 1.0 / std::max(sim.data.at(i, 0), sim.data.at(i, 1));
  const double theta_hat = static_cast<double>(n) / s;
  const double theta = model.extremal_coefficient(0, 1);
  CHECK(std::fabs(theta_hat - theta) < 3.5 * theta / std::sqrt(double(n)));

  // Margins stay unit Frechet.
  std::vector<double> zz(n);
  for (std::size_t i = 0; i < n; ++i) zz[i] = sim.data.at(i, 1);
  CHECK(spex_test::ks_test(zz, [](double v) { return std::exp(-1.0 / v); }) >
        0.01);
}

TEST_CASE("pairwise log-likelihood") {
  const auto spec = MaxStableSpec::brown_resnick(1.0, 1.2);
  SiteSet sites = line_sites({0.0, 0.9});
  MsModel model(spec, sites);
  auto sim = maxstable_simulate(spec, sites, 50, 9);

  // D = 2: pairwise equals the full log-density sum.
  double full = 0.0;
  for (std::size_t i = 0; i < sim.data.n_rows; ++i)
    full += std::log(model.density({sim.data.at(i, 0), sim.data.at(i, 1)}));
  CHECK(pairwise_loglik_maxstable(model, sim.data) ==
        Catch::Approx(full).epsilon(1e-10));

  // All-zero weights give 0; a single selected pair matches its own sum.
  SiteSet tri = line_sites({0.0, 0.9, 2.0});
  MsModel m3(spec, tri);
  auto sim3 = maxstable_simulate(spec, tri, 40, 10);
  std::vector<double> w0{0.0, 0.0, 0.0};
  CHECK(pairwise_loglik_maxstable(m3, sim3.data, &w0) == 0.0);
  std::vector<double> w1{1.0, 0.0, 0.0};  // pair (0,1)
  MsModel m01(spec, line_sites({0.0, 0.9}));
  ObservationMatrix sub(sim3.data.n_rows, 2, MarginScale::frechet);
  for (std::size_t i = 0; i < sim3.data.n_rows; ++i) {
    sub.at(i, 0) = sim3.data.at(i, 0);
    sub.at(i, 1) = sim3.data.at(i, 1);
  }
  CHECK(pairwise_loglik_maxstable(m3, sim3.data, &w1) ==
        Catch::Approx(pairwise_loglik_maxstable(m01, sub)).epsilon(1e-12));
}
