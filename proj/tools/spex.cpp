// Command-line driver for the spatial extremes toolkit.
//
// Subcommands: fit, simulate, diagnose, transform-coords, bootstrap.
// Every run is driven by a declarative JSON config (--config); --seed,
// --threads and --out override the config. Exit codes: 0 success,
// 1 usage/config error, 2 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "spex/spex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spex;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
  StageError(const std::string& stage, const std::string& cause)
      : std::runtime_error("stage '" + stage + "' failed: " + cause) {}
};

// Removes partially written outputs when a later stage fails.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (armed_) {
      for (const auto& f : files_) {
        std::error_code ec;
        fs::remove(f, ec);
      }
    }
  }
  std::string track(const std::string& path) {
    files_.push_back(path);
    return path;
  }
  void disarm() { armed_ = false; }

 private:
  std::vector<std::string> files_;
  bool armed_ = true;
};

struct RunConfig {
  json doc;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  const json& section(const std::string& name) const {
    static const json empty = json::object();
    const auto it = doc.find(name);
    return it == doc.end() ? empty : *it;
  }
  template <typename T>
  T get(const json& j, const std::string& key, T fallback) const {
    const auto it = j.find(key);
    return it == j.end() ? fallback : it->get<T>();
  }
  double param(const std::string& name, double fallback) const {
    const auto& model = section("model");
    const auto it = model.find("params");
    if (it == model.end()) return fallback;
    const auto p = it->find(name);
    return p == it->end() ? fallback : p->get<double>();
  }
};

RunConfig load_config(const std::string& path,
                      const std::optional<std::uint64_t>& seed_override,
                      const std::optional<int>& threads_override,
                      const std::optional<std::string>& out_override) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  RunConfig cfg;
  try {
    in >> cfg.doc;
  } catch (const std::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  cfg.seed = cfg.get<std::uint64_t>(cfg.doc, "seed", 1);
  cfg.threads = cfg.get<int>(cfg.doc, "threads", 1);
  cfg.out_dir = cfg.get<std::string>(cfg.doc, "out", "out");
  if (seed_override) cfg.seed = *seed_override;
  if (threads_override) cfg.threads = *threads_override;
  if (out_override) cfg.out_dir = *out_override;
  if (cfg.threads < 1) throw UsageError("--threads must be >= 1");
  return cfg;
}

std::string model_family(const RunConfig& cfg) {
  const auto& model = cfg.section("model");
  const auto it = model.find("family");
  if (it == model.end()) throw UsageError("config: model.family is required");
  return it->get<std::string>();
}

double censor_level(const RunConfig& cfg) {
  const double u = cfg.get<double>(cfg.section("model"), "u", 0.95);
  if (!(u > 0.0 && u < 1.0))
    throw UsageError("config: model.u must lie in (0,1)");
  return u;
}

MarginScale family_scale(const std::string& family) {
  if (family == "gaussian_copula" || family == "hot" || family == "hot_beta0" ||
      family == "hw")
    return MarginScale::uniform;
  if (family == "rpareto_brown_resnick") return MarginScale::pareto;
  if (family == "brown_resnick" || family == "extremal_t" ||
      family == "max_mixture")
    return MarginScale::frechet;
  if (family == "inverted_brown_resnick") return MarginScale::exponential;
  if (family == "sce") return MarginScale::laplace;
  throw UsageError("config: unknown model.family '" + family + "'");
}

struct LoadedData {
  ObservationMatrix raw;
  SiteSet sites;
};

LoadedData load_data(const RunConfig& cfg) {
  const auto& data = cfg.section("data");
  const auto obs = cfg.get<std::string>(data, "observations", "");
  const auto sta = cfg.get<std::string>(data, "stations", "");
  if (obs.empty() || sta.empty())
    throw UsageError("config: data.observations and data.stations are required");
  LoadedData out;
  out.raw = read_observations_csv(obs);
  out.sites = read_stations_csv(sta);
  if (out.raw.n_sites != out.sites.size())
    throw UsageError("observations and stations disagree on the site count");
  return out;
}

ObservationMatrix drop_incomplete_rows(const ObservationMatrix& m) {
  ObservationMatrix out(0, m.n_sites, m.scale);
  out.site_ids = m.site_ids;
  std::vector<double> values;
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    if (!m.row_complete(i)) continue;
    values.insert(values.end(), m.row(i), m.row(i) + m.n_sites);
    if (!m.row_ids.empty()) out.row_ids.push_back(m.row_ids[i]);
    ++out.n_rows;
  }
  out.values = std::move(values);
  return out;
}

SceSpec sce_spec_from_config(const RunConfig& cfg) {
  SceSpec s;
  s.kappa = cfg.param("kappa", 1.0);
  s.lambda = cfg.param("lambda", 1.0);
  s.delta_lag = cfg.param("delta_lag", 0.0);
  s.beta = cfg.param("beta", 0.5);
  s.mu = cfg.param("mu", 0.0);
  s.sigma = cfg.param("sigma", 1.0);
  s.cov = {cfg.param("phi", 1.0), cfg.param("nu", 1.0), std::nullopt};
  s.delta1 = cfg.param("delta1", 1.0);
  s.delta2 = cfg.param("delta2", 1.0);
  const auto form =
      cfg.get<std::string>(cfg.section("model"), "b_form", "x_pow_beta");
  if (form == "x_pow_beta") {
    s.b_form = SceBForm::x_pow_beta;
  } else if (form == "one_plus_a_pow_beta") {
    s.b_form = SceBForm::one_plus_a_pow_beta;
  } else {
    throw UsageError("config: unknown sce b_form '" + form + "'");
  }
  return s;
}

ModelSpec model_from_config(const RunConfig& cfg, const std::string& family) {
  const CovarianceSpec cov{cfg.param("phi", 1.0), cfg.param("nu", 1.0),
                           std::nullopt};
  if (family == "gaussian_copula") return GaussianCopulaSpec{cov};
  if (family == "hot") return HotSpec{cfg.param("beta", 1.0),
                                      cfg.param("gamma", 1.0), cov};
  if (family == "hot_beta0") return HotSpec{0.0, cfg.param("gamma", 1.0), cov};
  if (family == "hw") return HwSpec{cfg.param("delta", 0.5), cov};
  if (family == "location_mixture")
    return LocationMixSpec{cfg.param("theta", 1.0), cov};
  if (family == "brown_resnick")
    return MaxStableSpec::brown_resnick(cfg.param("phi", 1.0),
                                        cfg.param("nu", 1.0));
  if (family == "extremal_t")
    return MaxStableSpec::extremal_t(cfg.param("dof", 1.0), cov);
  if (family == "rpareto_brown_resnick") {
    const auto fname =
        cfg.get<std::string>(cfg.section("model"), "functional", "max");
    RiskFunctional r = RiskFunctional::max();
    if (fname == "max") {
      r = RiskFunctional::max();
    } else if (fname == "min") {
      r = RiskFunctional::min();
    } else if (fname == "mean") {
      r = RiskFunctional::mean();
    } else if (fname == "site") {
      r = RiskFunctional::site(
          cfg.get<std::size_t>(cfg.section("model"), "s0", 0));
    } else {
      throw UsageError("config: unknown risk functional '" + fname + "'");
    }
    return RParetoSpec{MaxStableSpec::brown_resnick(cfg.param("phi", 1.0),
                                                    cfg.param("nu", 1.0)),
                       r};
  }
  if (family == "inverted_brown_resnick")
    return ImsSpec{MaxStableSpec::brown_resnick(cfg.param("phi", 1.0),
                                                cfg.param("nu", 1.0))};
  if (family == "max_mixture")
    return MaxMixSpec{
        cfg.param("a", 0.5),
        MaxStableSpec::brown_resnick(cfg.param("ms_phi", 1.0),
                                     cfg.param("ms_nu", 1.0)),
        MaxStableSpec::brown_resnick(cfg.param("ims_phi", 1.0),
                                     cfg.param("ims_nu", 1.0))};
  throw UsageError("config: family '" + family +
                   "' has no parametric model mapping");
}

void write_fit_outputs(const RunConfig& cfg, const std::string& family,
                       const FitResult& fit, OutputGuard& guard,
                       const std::optional<FitResult>& aniso) {
  fs::create_directories(cfg.out_dir);
  const std::string txt = guard.track(cfg.out_dir + "/fit_result.txt");
  std::ofstream out(txt);
  if (!out) throw StageError("persist", "cannot write " + txt);
  out << "family: " << family << "\n";
  out << "converged: " << (fit.converged ? "true" : "false") << "\n";
  out << "loglik: " << format_double(fit.loglik) << "\n";
  out << "bic: " << format_double(fit.bic) << "\n";
  out << "n_effective: " << fit.n_effective << "\n";
  out << "censor_level: " << format_double(fit.censor_level) << "\n";
  out << "evaluations: " << fit.evaluations << "\n";
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    out << "param " << fit.names[j] << ": " << format_double(fit.estimates[j]);
    if (j < fit.stderrs.size() && std::isfinite(fit.stderrs[j]))
      out << " (se " << format_double(fit.stderrs[j]) << ")";
    if (j < fit.se_flagged.size() && fit.se_flagged[j]) out << " [se flagged]";
    out << "\n";
  }
  if (aniso) {
    out << "anisotropy_prefit_psi: " << format_double(aniso->estimates[2])
        << "\n";
    out << "anisotropy_prefit_L: " << format_double(aniso->estimates[3])
        << "\n";
  }
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";

  const std::string csv = guard.track(cfg.out_dir + "/fit_params.csv");
  std::ofstream pout(csv);
  pout << "name,estimate,stderr\n";
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    pout << fit.names[j] << ',' << format_double(fit.estimates[j]) << ',';
    if (std::isfinite(fit.stderrs[j])) pout << format_double(fit.stderrs[j]);
    pout << '\n';
  }
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions opt;
  const auto& fitc = cfg.section("fit");
  opt.optim.restarts = cfg.get<int>(fitc, "restarts", 2);
  opt.optim.max_evals = cfg.get<std::size_t>(fitc, "max_evals", 50000);
  opt.optim.seed = derive_seed(cfg.seed, 0xf17);
  opt.compute_se = cfg.get<bool>(fitc, "standard_errors", true);
  return opt;
}

// Fits the configured family on appropriately rescaled data; shared by
// cmd_fit and cmd_bootstrap.
FitResult fit_family(const RunConfig& cfg, const std::string& family,
                     const ObservationMatrix& native, const SiteSet& sites,
                     const FitOptions& opt) {
  const double u = censor_level(cfg);
  if (family == "gaussian_copula")
    return fit_gaussian_copula(native, sites, u, cfg.param("phi", 1.0),
                               cfg.param("nu", 1.0), opt);
  if (family == "hot")
    return fit_hot(native, sites, u, cfg.param("phi", 1.0),
                   cfg.param("nu", 1.0), cfg.param("beta", 1.0),
                   cfg.param("gamma", 1.0), false, opt);
  if (family == "hot_beta0")
    return fit_hot(native, sites, u, cfg.param("phi", 1.0),
                   cfg.param("nu", 1.0), 0.0, cfg.param("gamma", 1.0), true,
                   opt);
  if (family == "hw")
    return fit_hw(native, sites, u, cfg.param("phi", 1.0),
                  cfg.param("nu", 1.0), cfg.param("delta", 0.5), opt);
  if (family == "rpareto_brown_resnick")
    return fit_rpareto_brown_resnick(native, sites, u, cfg.param("phi", 1.0),
                                     cfg.param("nu", 1.0), opt);
  if (family == "brown_resnick")
    return fit_brown_resnick_pairwise(native, sites, cfg.param("phi", 1.0),
                                      cfg.param("nu", 1.0), opt);
  if (family == "inverted_brown_resnick")
    return fit_ims_pairwise(native, sites, u, cfg.param("phi", 1.0),
                            cfg.param("nu", 1.0), opt);
  if (family == "sce") {
    const auto& model = cfg.section("model");
    const auto subset_size =
        cfg.get<std::size_t>(model, "conditioning_subset_size", 30);
    const auto subset = select_conditioning_subset(sites, subset_size);
    std::vector<std::string> free =
        cfg.get<std::vector<std::string>>(model, "free",
                                          {"kappa", "lambda", "beta"});
    return fit_sce(native, sites, subset, u, sce_spec_from_config(cfg), free,
                   opt);
  }
  throw UsageError("config: family '" + family + "' is not fittable");
}

// The fit pipeline: margins -> rescale -> optional anisotropy prefit ->
// model fit -> persist.
int cmd_fit(const RunConfig& cfg) {
  OutputGuard guard;
  set_thread_count(cfg.threads);
  const std::string family = model_family(cfg);

  LoadedData data;
  try {
    data = load_data(cfg);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }

  ObservationMatrix uniform;
  try {
    const auto& margins = cfg.section("margins");
    const std::uint64_t mseed =
        cfg.get<std::uint64_t>(margins, "seed", derive_seed(cfg.seed, 0xa1));
    uniform = empirical_uniform(drop_incomplete_rows(data.raw), mseed);
  } catch (const std::exception& e) {
    throw StageError("margins", e.what());
  }

  SiteSet sites = data.sites;
  std::optional<FitResult> aniso_fit;
  try {
    const auto& aniso = cfg.section("anisotropy");
    if (cfg.get<bool>(aniso, "prefit", false)) {
      const auto opt = fit_options(cfg);
      aniso_fit = fit_anisotropy(uniform, sites, censor_level(cfg),
                                 cfg.get<double>(aniso, "phi", 1.0),
                                 cfg.get<double>(aniso, "nu", 1.0),
                                 cfg.get<double>(aniso, "psi", 0.0),
                                 cfg.get<double>(aniso, "L", 1.0), opt);
      sites = transform_sites(sites, aniso_fit->estimates[2],
                              aniso_fit->estimates[3]);
    } else if (aniso.contains("psi") || aniso.contains("L")) {
      sites = transform_sites(sites, cfg.get<double>(aniso, "psi", 0.0),
                              cfg.get<double>(aniso, "L", 1.0));
    }
  } catch (const std::exception& e) {
    throw StageError("anisotropy", e.what());
  }

  FitResult fit;
  try {
    const auto native = rescale(uniform, family_scale(family));
    fit = fit_family(cfg, family, native, sites, fit_options(cfg));
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("fit", e.what());
  }

  try {
    write_fit_outputs(cfg, family, fit, guard, aniso_fit);
  } catch (const std::exception& e) {
    throw StageError("persist", e.what());
  }
  guard.disarm();
  std::cout << "fit: " << family << " loglik=" << format_double(fit.loglik)
            << " bic=" << format_double(fit.bic)
            << (fit.converged ? "" : " (not converged)") << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  OutputGuard guard;
  set_thread_count(cfg.threads);
  const std::string family = model_family(cfg);
  const auto& sim = cfg.section("simulate");
  const std::size_t n = cfg.get<std::size_t>(sim, "n", 100);
  const auto sta = cfg.get<std::string>(cfg.section("data"), "stations", "");
  if (sta.empty()) throw UsageError("config: data.stations is required");
  const SiteSet sites = read_stations_csv(sta);

  ObservationMatrix out;
  try {
    if (family == "sce") {
      const SceSpec spec = sce_spec_from_config(cfg);
      const auto s0 = cfg.get<std::size_t>(cfg.section("model"), "s0", 0);
      const double u = laplace_quantile(censor_level(cfg));
      out = sce_simulate(spec, sites, s0, u, n, cfg.seed);
    } else {
      const ModelSpec model = model_from_config(cfg, family);
      struct Visitor {
        const SiteSet& sites;
        std::size_t n;
        std::uint64_t seed;
        ObservationMatrix operator()(const GaussianCopulaSpec& s) {
          return gaussian_copula_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const HotSpec& s) {
          return mixture_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const HwSpec& s) {
          return mixture_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const LocationMixSpec& s) {
          return mixture_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const MaxStableSpec& s) {
          return maxstable_simulate(s, sites, n, seed).data;
        }
        ObservationMatrix operator()(const RParetoSpec& s) {
          return rpareto_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const ImsSpec& s) {
          return ims_simulate(s, sites, n, seed);
        }
        ObservationMatrix operator()(const MaxMixSpec& s) {
          return maxmix_simulate(s, sites, n, seed);
        }
      };
      out = std::visit(Visitor{sites, n, cfg.seed}, model);
    }
  } catch (const std::exception& e) {
    throw StageError("simulate", e.what());
  }

  fs::create_directories(cfg.out_dir);
  const std::string path = guard.track(cfg.out_dir + "/simulations.csv");
  write_observations_csv(path, out);
  guard.disarm();
  std::cout << "simulate: " << family << " n=" << n << " -> " << path << "\n";
  return 0;
}

int cmd_diagnose(const RunConfig& cfg) {
  OutputGuard guard;
  set_thread_count(cfg.threads);
  const std::string family = model_family(cfg);
  const auto data = load_data(cfg);
  const auto& diag = cfg.section("diagnose");
  const auto levels =
      cfg.get<std::vector<double>>(diag, "levels", {0.95, 0.99});

  ObservationMatrix uniform;
  SiteSet sites = data.sites;
  try {
    uniform = empirical_uniform(
        data.raw, cfg.get<std::uint64_t>(cfg.section("margins"), "seed",
                                         derive_seed(cfg.seed, 0xa1)));
    const auto& aniso = cfg.section("anisotropy");
    if (aniso.contains("psi") || aniso.contains("L"))
      sites = transform_sites(sites, cfg.get<double>(aniso, "psi", 0.0),
                              cfg.get<double>(aniso, "L", 1.0));
  } catch (const std::exception& e) {
    throw StageError("margins", e.what());
  }

  fs::create_directories(cfg.out_dir);

  try {
    // chi / eta curves per pair and level (empirical and model).
    Table chi;
    chi.columns = {"site_a", "site_b", "distance",      "level",
                   "chi_empirical",    "chi_model",     "eta_empirical",
                   "eta_model"};
    const std::size_t d = sites.size();
    std::optional<ModelSpec> model;
    if (family != "sce") model = model_from_config(cfg, family);
    const SceSpec sce = family == "sce" ? sce_spec_from_config(cfg) : SceSpec{};
    const auto s0 = cfg.get<std::size_t>(cfg.section("model"), "s0", 0);

    auto add_pair = [&](std::size_t a, std::size_t b) {
      const double h = site_distance(sites, a, b);
      for (double u : levels) {
        double chi_emp = std::numeric_limits<double>::quiet_NaN();
        double eta_emp = std::numeric_limits<double>::quiet_NaN();
        try {
          chi_emp = chi_u_empirical(uniform, a, b, u);
          eta_emp = eta_u_empirical(uniform, a, b, u);
        } catch (const std::exception&) {
          continue;  // insufficient exceedances: pair skipped at this level
        }
        double chi_mod = std::numeric_limits<double>::quiet_NaN();
        double eta_mod = std::numeric_limits<double>::quiet_NaN();
        if (model) {
          chi_mod = chi_u_model(*model, h, u);
          try {
            eta_mod = eta_theoretical(*model, h);
          } catch (const std::exception&) {
          }
        } else {
          // Conditional model: chi from conditional simulation at s0.
          const double q = laplace_quantile(u);
          const auto simu = sce_simulate(
              sce, sites, a, q,
              cfg.get<std::size_t>(diag, "model_chi_nsim", 20000),
              derive_seed(cfg.seed, a, static_cast<std::uint64_t>(u * 1e6)));
          std::size_t hits = 0;
          for (std::size_t i = 0; i < simu.n_rows; ++i)
            if (simu.at(i, b) > q) ++hits;
          chi_mod = static_cast<double>(hits) / simu.n_rows;
        }
        chi.rows.push_back({static_cast<double>(a), static_cast<double>(b), h,
                            u, chi_emp, chi_mod, eta_emp, eta_mod});
      }
    };
    if (family == "sce") {
      for (std::size_t b = 0; b < d; ++b)
        if (b != s0) add_pair(s0, b);
    } else {
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b) add_pair(a, b);
    }
    write_table_csv(guard.track(cfg.out_dir + "/dependence_curves.csv"), chi);

    // Extremogram at the configured site.
    const auto ext_site = cfg.get<std::size_t>(diag, "extremogram_site", 0);
    const auto max_lag = cfg.get<std::size_t>(diag, "extremogram_max_lag", 20);
    const double ext_u = cfg.get<double>(diag, "extremogram_level", 0.95);
    std::vector<double> series(uniform.n_rows);
    for (std::size_t i = 0; i < uniform.n_rows; ++i)
      series[i] = uniform.at(i, ext_site);
    const auto ext =
        extremogram(series, ext_u, max_lag, derive_seed(cfg.seed, 0xe0));
    Table et;
    et.columns = {"lag", "value", "upper_bound_95", "n_conditioning"};
    for (std::size_t h = 0; h < max_lag; ++h)
      et.rows.push_back({static_cast<double>(h + 1), ext.values[h],
                         ext.upper_bound[h],
                         static_cast<double>(ext.n_conditioning[h])});
    write_table_csv(guard.track(cfg.out_dir + "/extremogram.csv"), et);

    // P(max over sites exceeds the level): empirical, plus the model value
    // for the conditional family.
    Table mx;
    mx.columns = {"level", "p_max_empirical", "p_max_model"};
    const auto grid = cfg.get<std::vector<double>>(
        diag, "max_levels", {0.8, 0.85, 0.9, 0.95, 0.98, 0.99, 0.995, 0.999});
    for (double u : grid) {
      std::size_t hits = 0, rows = 0;
      for (std::size_t i = 0; i < uniform.n_rows; ++i) {
        bool any = false, all_missing = true;
        for (std::size_t j = 0; j < d; ++j) {
          if (uniform.is_missing(i, j)) continue;
          all_missing = false;
          any = any || uniform.at(i, j) > u;
        }
        if (all_missing) continue;
        ++rows;
        if (any) ++hits;
      }
      double p_model = std::numeric_limits<double>::quiet_NaN();
      if (family == "sce") {
        p_model = exceedance_prob_max(
                      sce, sites, laplace_quantile(u),
                      cfg.get<std::size_t>(diag, "max_nsim", 20000),
                      derive_seed(cfg.seed, 0x3a,
                                  static_cast<std::uint64_t>(u * 1e6)))
                      .prob;
      }
      mx.rows.push_back(
          {u, rows ? static_cast<double>(hits) / rows
                   : std::numeric_limits<double>::quiet_NaN(),
           p_model});
    }
    write_table_csv(guard.track(cfg.out_dir + "/max_exceedance.csv"), mx);
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("diagnose", e.what());
  }
  guard.disarm();
  std::cout << "diagnose: wrote dependence_curves.csv, extremogram.csv, "
               "max_exceedance.csv in "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_transform_coords(const RunConfig& cfg) {
  OutputGuard guard;
  const auto sta = cfg.get<std::string>(cfg.section("data"), "stations", "");
  if (sta.empty()) throw UsageError("config: data.stations is required");
  SiteSet sites = read_stations_csv(sta);
  const auto& tc = cfg.section("transform");

  if (cfg.get<bool>(tc, "lonlat_to_km", false)) {
    // Equirectangular projection about the mean latitude.
    double lat0 = 0.0;
    for (const auto& c : sites.coords) lat0 += c[1];
    lat0 /= sites.size();
    const double rad = kPi / 180.0;
    const double r_earth = 6371.0;
    for (auto& c : sites.coords) {
      const double x = r_earth * std::cos(lat0 * rad) * c[0] * rad;
      const double y = r_earth * c[1] * rad;
      c = {x, y};
    }
  }
  if (tc.contains("psi") || tc.contains("L"))
    sites = transform_sites(sites, cfg.get<double>(tc, "psi", 0.0),
                            cfg.get<double>(tc, "L", 1.0));

  fs::create_directories(cfg.out_dir);
  const std::string path = guard.track(cfg.out_dir + "/stations_transformed.csv");
  write_stations_csv(path, sites);
  guard.disarm();
  std::cout << "transform-coords: wrote " << path << "\n";
  return 0;
}

int cmd_bootstrap(const RunConfig& cfg) {
  OutputGuard guard;
  set_thread_count(cfg.threads);
  const std::string family = model_family(cfg);
  const auto data = load_data(cfg);
  const auto& bs = cfg.section("bootstrap");
  const std::size_t B = cfg.get<std::size_t>(bs, "replicates", 100);
  const double mean_block = cfg.get<double>(bs, "mean_block", 10.0);
  const auto levels =
      cfg.get<std::vector<double>>(bs, "quantiles", {0.05, 0.95});

  const auto complete = drop_incomplete_rows(data.raw);
  FitOptions opt = fit_options(cfg);
  opt.compute_se = false;  // uncertainty comes from the bootstrap itself

  std::vector<std::string> names;
  auto fitter = [&](const ObservationMatrix& resampled)
      -> std::optional<std::vector<double>> {
    try {
      const auto uniform =
          empirical_uniform(resampled, derive_seed(cfg.seed, 0xa1));
      const auto native = rescale(uniform, family_scale(family));
      const auto fit = fit_family(cfg, family, native, data.sites, opt);
      if (names.empty()) names = fit.names;
      return fit.estimates;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };

  BootstrapResult res;
  try {
    res = stationary_bootstrap(complete, mean_block, B, fitter,
                               derive_seed(cfg.seed, 0xb0), levels);
  } catch (const std::exception& e) {
    throw StageError("bootstrap", e.what());
  }
  if (res.replicates.empty())
    throw StageError("bootstrap", "all replicate fits failed");

  fs::create_directories(cfg.out_dir);
  Table q;
  q.columns = {"param_index"};
  for (double lvl : levels) q.columns.push_back("q" + format_double(lvl));
  for (std::size_t j = 0; j < res.quantiles.size(); ++j) {
    std::vector<double> row{static_cast<double>(j)};
    for (double v : res.quantiles[j]) row.push_back(v);
    q.rows.push_back(row);
  }
  write_table_csv(guard.track(cfg.out_dir + "/bootstrap_quantiles.csv"), q);

  Table reps;
  reps.columns = names.empty()
                     ? std::vector<std::string>{"p0"}
                     : names;
  for (const auto& r : res.replicates) reps.rows.push_back(r);
  write_table_csv(guard.track(cfg.out_dir + "/bootstrap_replicates.csv"), reps);
  guard.disarm();
  std::cout << "bootstrap: " << res.replicates.size() << " replicates ("
            << res.n_failures << " failures)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatial extremes toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config path")->required();
    cmd->add_option("--seed", seed, "master seed override");
    cmd->add_option("--threads", threads, "worker thread cap");
    cmd->add_option("--out", out_dir, "output directory override");
  };
  auto* fit = app.add_subcommand("fit", "fit a dependence model");
  auto* sim = app.add_subcommand("simulate", "simulate from a model");
  auto* dia = app.add_subcommand("diagnose", "emit dependence diagnostics");
  auto* tra = app.add_subcommand("transform-coords",
                                 "project and/or rotate station coordinates");
  auto* boo = app.add_subcommand("bootstrap", "stationary bootstrap refits");
  for (auto* c : {fit, sim, dia, tra, boo}) add_common(c);

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = load_config(config_path, seed, threads, out_dir);
    if (fit->parsed()) return cmd_fit(cfg);
    if (sim->parsed()) return cmd_simulate(cfg);
    if (dia->parsed()) return cmd_diagnose(cfg);
    if (tra->parsed()) return cmd_transform_coords(cfg);
    if (boo->parsed()) return cmd_bootstrap(cfg);
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
