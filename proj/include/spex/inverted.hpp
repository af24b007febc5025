// Inverted max-stable processes (unit exponential margins) and max-mixture
// hybrids (unit Frechet margins): bivariate distribution functions, analytic
// partial derivatives, censored pairwise likelihoods, and simulation.

#ifndef SPEX_INVERTED_HPP
#define SPEX_INVERTED_HPP

#include <cmath>
#include <memory>
#include <stdexcept>
#include <variant>
#include <vector>

#include "spex/margins.hpp"
#include "spex/maxstable.hpp"

namespace spex {

// Z_IMS = 1/Z for a unit-Frechet max-stable Z: unit exponential margins,
// asymptotically independent with eta = 1/V(1,1).
struct ImsSpec {
  MaxStableSpec base;
};

// Max-mixture: Z = max{a Z1, (1-a) Z2} with Z1 max-stable and Z2 an
// inverted max-stable mapped back to the unit Frechet scale.
struct MaxMixSpec {
  double a = 0.5;  // mixture proportion in [0,1]
  MaxStableSpec ms;
  MaxStableSpec ims_base;

  void validate() const {
    if (!(a >= 0.0 && a <= 1.0))
      throw std::invalid_argument("max-mixture: a must lie in [0,1]");
    if (a < 1.0) ims_base.validate();
    if (a > 0.0) ms.validate();
  }
};

enum class ImsKind { survival, density, cdf };

namespace detail {

// Joint survival, CDF and derivatives of the inverted max-stable pair on
// the unit exponential scale, driven by the bivariate exponent function of
// the base model between sites i and j.
struct ImsPair {
  const MsModel* model;
  int i, j;

  double survival(double z1, double z2) const {
    return std::exp(-model->pair_v(i, j, 1.0 / z1, 1.0 / z2));
  }

  double cdf(double z1, double z2) const {
    return 1.0 - std::exp(-z1) - std::exp(-z2) + survival(z1, z2);
  }

  // d/dz1 of the joint CDF at (z1, z2).
  double dcdf_dz1(double z1, double z2) const {
    const double w1 = 1.0 / z1, w2 = 1.0 / z2;
    return std::exp(-z1) +
           survival(z1, z2) * model->pair_v1(i, j, w1, w2) * w1 * w1;
  }

  // Joint density: exp(-V(w))(V1 V2 - V12)(z1 z2)^-2 at w = (1/z1, 1/z2).
  double density(double z1, double z2) const {
    const double w1 = 1.0 / z1, w2 = 1.0 / z2;
    const double v1 = model->pair_v1(i, j, w1, w2);
    const double v2 = model->pair_v2(i, j, w1, w2);
    const double v12 = model->pair_v12(i, j, w1, w2);
    return survival(z1, z2) * (v1 * v2 - v12) * w1 * w1 * w2 * w2;
  }
};

// Frechet-scale coordinate map for the inverted component of a max-mixture:
// e(y) = -log(1 - exp(-1/y)) sends unit Frechet to unit exponential.
inline double frechet_to_exp(double y) {
  return -std::log(-std::expm1(-1.0 / y));
}
inline double frechet_to_exp_deriv(double y) {
  const double q = std::exp(-1.0 / y);
  return q / (-std::expm1(-1.0 / y) * y * y);
}

// Bivariate CDF and derivatives of the max-mixture on the Frechet scale.
struct MaxMixPair {
  double a;
  const MsModel* ms;      // null when a == 0
  const MsModel* ims;     // null when a == 1
  int i, j;

  double ms_factor(double z1, double z2) const {
    if (a == 0.0) return 1.0;
    return std::exp(-ms->pair_v(i, j, z1 / a, z2 / a));
  }

  double ims_factor(double z1, double z2) const {
    if (a == 1.0) return 1.0;
    const ImsPair pair{ims, i, j};
    return pair.cdf(frechet_to_exp(z1 / (1.0 - a)),
                    frechet_to_exp(z2 / (1.0 - a)));
  }

  double cdf(double z1, double z2) const {
    return ms_factor(z1, z2) * ims_factor(z1, z2);
  }

  double dms_dz1(double z1, double z2) const {
    if (a == 0.0) return 0.0;
    return ms_factor(z1, z2) * (-ms->pair_v1(i, j, z1 / a, z2 / a) / a);
  }

  double dims_dz1(double z1, double z2) const {
    if (a == 1.0) return 0.0;
    const ImsPair pair{ims, i, j};
    const double y1 = z1 / (1.0 - a), y2 = z2 / (1.0 - a);
    return pair.dcdf_dz1(frechet_to_exp(y1), frechet_to_exp(y2)) *
           frechet_to_exp_deriv(y1) / (1.0 - a);
  }

  double dcdf_dz1(double z1, double z2) const {
    return dms_dz1(z1, z2) * ims_factor(z1, z2) +
           ms_factor(z1, z2) * dims_dz1(z1, z2);
  }

  double dcdf_dz2(double z1, double z2) const {
    MaxMixPair swapped{a, ms, ims, j, i};
    return swapped.dcdf_dz1(z2, z1);
  }

  double density(double z1, double z2) const {
    // Product rule across the two factors.
    double ms12 = 0.0, msf = ms_factor(z1, z2);
    if (a > 0.0) {
      const double za = z1 / a, zb = z2 / a;
      ms12 = msf *
             (ms->pair_v1(i, j, za, zb) * ms->pair_v2(i, j, za, zb) -
              ms->pair_v12(i, j, za, zb)) /
             (a * a);
    }
    double ims12 = 0.0, imsf = ims_factor(z1, z2);
    if (a < 1.0) {
      const ImsPair pair{ims, i, j};
      const double y1 = z1 / (1.0 - a), y2 = z2 / (1.0 - a);
      ims12 = pair.density(frechet_to_exp(y1), frechet_to_exp(y2)) *
              frechet_to_exp_deriv(y1) * frechet_to_exp_deriv(y2) /
              ((1.0 - a) * (1.0 - a));
    }
    return ms12 * imsf + dms_dz1(z1, z2) * dims_dz2_(z1, z2) +
           dms_dz2_(z1, z2) * dims_dz1(z1, z2) + msf * ims12;
  }

 private:
  double dms_dz2_(double z1, double z2) const {
    MaxMixPair swapped{a, ms, ims, j, i};
    return swapped.dms_dz1(z2, z1);
  }
  double dims_dz2_(double z1, double z2) const {
    MaxMixPair swapped{a, ms, ims, j, i};
    return swapped.dims_dz1(z2, z1);
  }
};

}  // namespace detail

// Bivariate inverted max-stable distribution at pair distance h, on the
// unit exponential scale.
inline double ims_bivariate(const ImsSpec& spec, double h, double z1,
                            double z2, ImsKind kind) {
  if (!(z1 > 0.0 && z2 > 0.0))
    throw std::invalid_argument("ims_bivariate: z must be positive");
  SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
  MsModel model(spec.base, pair);
  const detail::ImsPair p{&model, 0, 1};
  switch (kind) {
    case ImsKind::survival: return p.survival(z1, z2);
    case ImsKind::density: return p.density(z1, z2);
    case ImsKind::cdf: return p.cdf(z1, z2);
  }
  throw std::logic_error("ims_bivariate: bad kind");
}

// Bivariate max-mixture CDF at pair distance h on the unit Frechet scale:
// the product of the max-stable factor at z/a and the inverted factor at
// z/(1-a).
inline double maxmix_bivariate_cdf(const MaxMixSpec& spec, double h, double z1,
                                   double z2) {
  spec.validate();
  if (!(z1 > 0.0 && z2 > 0.0))
    throw std::invalid_argument("maxmix_bivariate_cdf: z must be positive");
  SiteSet pair = SiteSet::from_coords({{0.0, 0.0}, {h, 0.0}});
  std::unique_ptr<MsModel> ms, ims;
  if (spec.a > 0.0) ms = std::make_unique<MsModel>(spec.ms, pair);
  if (spec.a < 1.0) ims = std::make_unique<MsModel>(spec.ims_base, pair);
  const detail::MaxMixPair p{spec.a, ms.get(), ims.get(), 0, 1};
  return p.cdf(z1, z2);
}

using SubModelSpec = std::variant<ImsSpec, MaxMixSpec>;

// Censored pairwise log-likelihood for inverted max-stable (unit
// exponential data) or max-mixture (unit Frechet data) models. u is a
// probability level; pairs with both coordinates below the corresponding
// native threshold contribute the CDF, one-sided exceedances the partial
// derivative, joint exceedances the full density.
inline double pairwise_loglik_sub(const SubModelSpec& model_spec,
                                  const SiteSet& sites,
                                  const ObservationMatrix& data, double u,
                                  bool censored,
                                  const std::vector<double>* weights = nullptr) {
  const int d = static_cast<int>(sites.size());
  if (static_cast<int>(data.n_sites) != d)
    throw std::invalid_argument("pairwise_loglik_sub: data/site mismatch");
  const std::size_t n_pairs = static_cast<std::size_t>(d) * (d - 1) / 2;
  if (weights && weights->size() != n_pairs)
    throw std::invalid_argument("pairwise_loglik_sub: weight count mismatch");

  const bool is_ims = std::holds_alternative<ImsSpec>(model_spec);
  std::unique_ptr<MsModel> base, ims2;
  double mix_a = 1.0;
  if (is_ims) {
    base = std::make_unique<MsModel>(std::get<ImsSpec>(model_spec).base, sites);
    if (data.scale != MarginScale::exponential)
      throw std::invalid_argument(
          "pairwise_loglik_sub: inverted max-stable expects exponential-scale data");
  } else {
    const auto& mm = std::get<MaxMixSpec>(model_spec);
    mm.validate();
    mix_a = mm.a;
    if (mm.a > 0.0) base = std::make_unique<MsModel>(mm.ms, sites);
    if (mm.a < 1.0) ims2 = std::make_unique<MsModel>(mm.ims_base, sites);
    if (data.scale != MarginScale::frechet)
      throw std::invalid_argument(
          "pairwise_loglik_sub: max-mixture expects Frechet-scale data");
  }
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("pairwise_loglik_sub: u must lie in (0,1)");
  const double thr = is_ims ? uniform_to_scale(u, MarginScale::exponential)
                            : uniform_to_scale(u, MarginScale::frechet);

  return parallel_map_sum(data.n_rows, [&](std::size_t row) {
    double ll = 0.0;
    std::size_t pair_idx = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j, ++pair_idx) {
        const double w = weights ? (*weights)[pair_idx] : 1.0;
        if (w == 0.0) continue;
        const double z1 = data.at(row, i);
        const double z2 = data.at(row, j);
        if (std::isnan(z1) || std::isnan(z2)) continue;
        const bool e1 = !censored || z1 > thr;
        const bool e2 = !censored || z2 > thr;
        // Orient the pair so any single exceedance sits in the first slot.
        auto contribution = [&](auto&& fwd, auto&& flipped) {
          if (e1 && e2) return std::log(fwd.density(z1, z2));
          if (e1) return std::log(fwd.dcdf_dz1(z1, thr));
          if (e2) return std::log(flipped.dcdf_dz1(z2, thr));
          return std::log(fwd.cdf(thr, thr));
        };
        double term;
        if (is_ims) {
          term = contribution(detail::ImsPair{base.get(), i, j},
                              detail::ImsPair{base.get(), j, i});
        } else {
          term = contribution(
              detail::MaxMixPair{mix_a, base.get(), ims2.get(), i, j},
              detail::MaxMixPair{mix_a, base.get(), ims2.get(), j, i});
        }
        if (!std::isfinite(term))
          throw std::runtime_error(
              "pairwise_loglik_sub: non-finite contribution at pair (" +
              std::to_string(i) + "," + std::to_string(j) + "), row " +
              std::to_string(row));
        ll += w * term;
      }
    }
    return ll;
  });
}

// Simulation by inversion of a max-stable field: Z_IMS = 1/Z has unit
// exponential margins.
inline ObservationMatrix ims_simulate(const ImsSpec& spec, const SiteSet& sites,
                                      std::size_t n, std::uint64_t seed,
                                      const MsSimOptions& opt = {}) {
  auto sim = maxstable_simulate(spec.base, sites, n, seed, opt);
  ObservationMatrix out = std::move(sim.data);
  for (auto& v : out.values) v = 1.0 / v;
  out.scale = MarginScale::exponential;
  return out;
}

// Max-mixture simulation on the unit Frechet scale.
inline ObservationMatrix maxmix_simulate(const MaxMixSpec& spec,
                                         const SiteSet& sites, std::size_t n,
                                         std::uint64_t seed,
                                         const MsSimOptions& opt = {}) {
  spec.validate();
  const std::size_t d = sites.size();
  ObservationMatrix out(n, d, MarginScale::frechet);
  out.site_ids = sites.labels;
  ObservationMatrix z1, z2;
  if (spec.a > 0.0)
    z1 = maxstable_simulate(spec.ms, sites, n, derive_seed(seed, 1), opt).data;
  if (spec.a < 1.0) {
    z2 = maxstable_simulate(spec.ims_base, sites, n, derive_seed(seed, 2), opt)
             .data;
    // Z2 = -1/log(1 - exp(-1/Ztilde)): invert, then back to Frechet.
    for (auto& v : z2.values) v = -1.0 / std::log(-std::expm1(-1.0 / v));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double v = -std::numeric_limits<double>::infinity();
      if (spec.a > 0.0) v = spec.a * z1.at(i, j);
      if (spec.a < 1.0) v = std::max(v, (1.0 - spec.a) * z2.at(i, j));
      out.at(i, j) = v;
    }
  }
  return out;
}

}  // namespace spex

#endif  // SPEX_INVERTED_HPP
