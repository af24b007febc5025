// Fit drivers per dependence family: each wires a likelihood to the
// shared optimizer, fills FitResult metadata (BIC over the replicate
// count, censoring level) and optionally computes observed-information
// standard errors.

#ifndef SPEX_FIT_MODELS_HPP
#define SPEX_FIT_MODELS_HPP

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "spex/conditional.hpp"
#include "spex/depmeasures.hpp"
#include "spex/inference.hpp"
#include "spex/models.hpp"

namespace spex {

struct FitOptions {
  OptimSettings optim;
  MixtureLikOptions mixture;  // inner budgets for censored mixtures
  QmcAccuracy rpareto_qmc = {2048, 4, 0.0};
  bool compute_se = true;
};

namespace detail {

inline std::size_t effective_rows(const ObservationMatrix& data) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < data.n_rows; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < data.n_sites && !any; ++j)
      any = !data.is_missing(i, j);
    if (any) ++n;
  }
  return n;
}

inline double guarded(const std::function<double()>& eval) {
  try {
    return eval();
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

inline FitResult run_fit(const Objective& obj, const std::vector<double>& init,
                         const std::vector<ParamTransform>& tr,
                         const std::vector<std::string>& names,
                         const ObservationMatrix& data, double u,
                         const FitOptions& opt) {
  FitResult fit = maximize(obj, init, tr, names, opt.optim);
  fit.censor_level = u;
  fit.n_effective = effective_rows(data);
  fit.bic = bic(fit.loglik, init.size(), fit.n_effective);
  if (opt.compute_se) observed_info_se(obj, tr, fit);
  return fit;
}

}  // namespace detail

// Gaussian copula by censored likelihood on uniform-scale data.
// Free parameters: (phi, nu).
inline FitResult fit_gaussian_copula(const ObservationMatrix& data,
                                     const SiteSet& sites, double u,
                                     double phi0, double nu0,
                                     const FitOptions& opt = {}) {
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      GaussianCopulaSpec spec{{p[0], p[1], std::nullopt}};
      return censored_loglik_mixture(spec, sites, data, u, opt.mixture).loglik;
    });
  };
  const std::vector<ParamTransform> tr{ParamTransform::log(),
                                       ParamTransform::logit_range(0.02, 1.98)};
  return detail::run_fit(obj, {phi0, nu0}, tr, {"phi", "nu"}, data, u, opt);
}

// Gaussian copula with geometric anisotropy: (phi, nu, psi, L). Used as
// the preliminary anisotropy fit of the application pipeline.
inline FitResult fit_anisotropy(const ObservationMatrix& data,
                                const SiteSet& sites, double u, double phi0,
                                double nu0, double psi0, double L0,
                                const FitOptions& opt = {}) {
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      GaussianCopulaSpec spec{{p[0], p[1], Anisotropy{p[2], p[3]}}};
      return censored_loglik_mixture(spec, sites, data, u, opt.mixture).loglik;
    });
  };
  const std::vector<ParamTransform> tr{
      ParamTransform::log(), ParamTransform::logit_range(0.02, 1.98),
      ParamTransform::angle(), ParamTransform::log()};
  return detail::run_fit(obj, {phi0, nu0, psi0, L0}, tr,
                         {"phi", "nu", "psi", "L"}, data, u, opt);
}

// Scale mixture with the hybrid mixing law: free (phi, nu, beta, gamma),
// or the Pareto limit with beta fixed at 0 (free (phi, nu, gamma), k = 3).
inline FitResult fit_hot(const ObservationMatrix& data, const SiteSet& sites,
                         double u, double phi0, double nu0, double beta0,
                         double gamma0, bool fix_beta_zero,
                         const FitOptions& opt = {}) {
  if (fix_beta_zero) {
    Objective obj = [&](const std::vector<double>& p) {
      return detail::guarded([&] {
        HotSpec spec{0.0, p[2], {p[0], p[1], std::nullopt}};
        return censored_loglik_mixture(spec, sites, data, u, opt.mixture)
            .loglik;
      });
    };
    const std::vector<ParamTransform> tr{ParamTransform::log(),
                                         ParamTransform::logit_range(0.02, 1.98),
                                         ParamTransform::log()};
    return detail::run_fit(obj, {phi0, nu0, gamma0}, tr, {"phi", "nu", "gamma"},
                           data, u, opt);
  }
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      HotSpec spec{p[2], p[3], {p[0], p[1], std::nullopt}};
      return censored_loglik_mixture(spec, sites, data, u, opt.mixture).loglik;
    });
  };
  const std::vector<ParamTransform> tr{
      ParamTransform::log(), ParamTransform::logit_range(0.02, 1.98),
      ParamTransform::log(), ParamTransform::log()};
  return detail::run_fit(obj, {phi0, nu0, beta0, gamma0}, tr,
                         {"phi", "nu", "beta", "gamma"}, data, u, opt);
}

// Pareto power-interpolation model: free (phi, nu, delta). delta runs over
// [0.001, 0.999]; boundary estimates are flagged.
inline FitResult fit_hw(const ObservationMatrix& data, const SiteSet& sites,
                        double u, double phi0, double nu0, double delta0,
                        const FitOptions& opt = {}) {
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      HwSpec spec{p[2], {p[0], p[1], std::nullopt}};
      return censored_loglik_mixture(spec, sites, data, u, opt.mixture).loglik;
    });
  };
  const std::vector<ParamTransform> tr{
      ParamTransform::log(), ParamTransform::logit_range(0.02, 1.98),
      ParamTransform::logit_range(0.001, 0.999)};
  FitResult fit = detail::run_fit(obj, {phi0, nu0, delta0}, tr,
                                  {"phi", "nu", "delta"}, data, u, opt);
  if (fit.estimates[2] <= 0.002 || fit.estimates[2] >= 0.998)
    fit.warnings.push_back("delta estimate at the clamp boundary");
  return fit;
}

// Brown-Resnick r-Pareto process by censored likelihood. u_prob is the
// marginal probability level; the Pareto-scale threshold is 1/(1-u_prob).
inline FitResult fit_rpareto_brown_resnick(const ObservationMatrix& data,
                                           const SiteSet& sites, double u_prob,
                                           double phi0, double nu0,
                                           const FitOptions& opt = {}) {
  if (!(u_prob > 0.0 && u_prob < 1.0))
    throw std::invalid_argument("fit_rpareto: u_prob must lie in (0,1)");
  const double u = 1.0 / (1.0 - u_prob);
  const RiskFunctional functional = RiskFunctional::max();
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      const RParetoSpec spec{MaxStableSpec::brown_resnick(p[0], p[1]),
                             functional};
      MsModel model(spec.base, sites, opt.rpareto_qmc);
      return censored_loglik_rpareto(spec, model, data, u, {true}).loglik;
    });
  };
  const std::vector<ParamTransform> tr{ParamTransform::log(),
                                       ParamTransform::logit_range(0.02, 1.98)};
  return detail::run_fit(obj, {phi0, nu0}, tr, {"phi", "nu"}, data, u_prob,
                         opt);
}

// Brown-Resnick max-stable process by pairwise likelihood on unit Frechet
// data.
inline FitResult fit_brown_resnick_pairwise(const ObservationMatrix& data,
                                            const SiteSet& sites, double phi0,
                                            double nu0,
                                            const FitOptions& opt = {}) {
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      MsModel model(MaxStableSpec::brown_resnick(p[0], p[1]), sites);
      return pairwise_loglik_maxstable(model, data);
    });
  };
  const std::vector<ParamTransform> tr{ParamTransform::log(),
                                       ParamTransform::logit_range(0.02, 1.98)};
  return detail::run_fit(obj, {phi0, nu0}, tr, {"phi", "nu"}, data,
                         std::numeric_limits<double>::quiet_NaN(), opt);
}

// Inverted Brown-Resnick by censored pairwise likelihood on unit
// exponential data.
inline FitResult fit_ims_pairwise(const ObservationMatrix& data,
                                  const SiteSet& sites, double u, double phi0,
                                  double nu0, const FitOptions& opt = {}) {
  Objective obj = [&](const std::vector<double>& p) {
    return detail::guarded([&] {
      return pairwise_loglik_sub(
          SubModelSpec{ImsSpec{MaxStableSpec::brown_resnick(p[0], p[1])}},
          sites, data, u, true);
    });
  };
  const std::vector<ParamTransform> tr{ParamTransform::log(),
                                       ParamTransform::logit_range(0.02, 1.98)};
  return detail::run_fit(obj, {phi0, nu0}, tr, {"phi", "nu"}, data, u, opt);
}

// Conditional spatial extremes by composite likelihood over a conditioning
// subset. The free set is chosen by name; the rest stay at their values in
// init. u is a probability level on (0,1); data are on the Laplace scale.
inline FitResult fit_sce(const ObservationMatrix& data, const SiteSet& sites,
                         const std::vector<std::size_t>& subset, double u_prob,
                         const SceSpec& init,
                         const std::vector<std::string>& free_names,
                         const FitOptions& opt = {}) {
  if (!(u_prob > 0.0 && u_prob < 1.0))
    throw std::invalid_argument("fit_sce: u must lie in (0,1)");
  const double u = laplace_quantile(u_prob);

  // Assemble the free-parameter bindings.
  std::vector<std::string> names;
  std::vector<double> init_values;
  std::vector<ParamTransform> tr;
  std::vector<std::function<void(SceSpec&, double)>> setters;
  auto bind = [&](const std::string& name, double value, ParamTransform t,
                  std::function<void(SceSpec&, double)> set) {
    for (const auto& want : free_names) {
      if (want == name) {
        names.push_back(name);
        init_values.push_back(value);
        tr.push_back(t);
        setters.push_back(std::move(set));
        return;
      }
    }
  };
  bind("kappa", init.kappa, ParamTransform::log(),
       [](SceSpec& s, double v) { s.kappa = v; });
  bind("lambda", init.lambda, ParamTransform::log(),
       [](SceSpec& s, double v) { s.lambda = v; });
  bind("delta_lag", init.delta_lag, ParamTransform::log(),
       [](SceSpec& s, double v) { s.delta_lag = v; });
  bind("beta", init.beta, ParamTransform::logit_range(1e-4, 0.9999),
       [](SceSpec& s, double v) { s.beta = v; });
  bind("mu", init.mu, ParamTransform::identity(),
       [](SceSpec& s, double v) { s.mu = v; });
  bind("sigma", init.sigma, ParamTransform::log(),
       [](SceSpec& s, double v) { s.sigma = v; });
  bind("phi", init.cov.phi, ParamTransform::log(),
       [](SceSpec& s, double v) { s.cov.phi = v; });
  bind("nu", init.cov.nu, ParamTransform::logit_range(0.02, 2.0),
       [](SceSpec& s, double v) { s.cov.nu = v; });
  bind("delta1", init.delta1, ParamTransform::log(),
       [](SceSpec& s, double v) { s.delta1 = v; });
  bind("delta2", init.delta2, ParamTransform::log(),
       [](SceSpec& s, double v) { s.delta2 = v; });
  if (names.size() != free_names.size())
    throw std::invalid_argument("fit_sce: unknown free parameter name");

  Objective obj = [&, init](const std::vector<double>& p) {
    return detail::guarded([&] {
      SceSpec spec = init;
      for (std::size_t k = 0; k < setters.size(); ++k) setters[k](spec, p[k]);
      return sce_composite_loglik(data, sites, subset, u, spec);
    });
  };
  return detail::run_fit(obj, init_values, tr, names, data, u_prob, opt);
}

}  // namespace spex

#endif  // SPEX_FIT_MODELS_HPP
