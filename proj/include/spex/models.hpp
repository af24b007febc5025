// Tagged union over the dependence-model families handled by the library.

#ifndef SPEX_MODELS_HPP
#define SPEX_MODELS_HPP

#include <variant>

#include "spex/inverted.hpp"
#include "spex/maxstable.hpp"
#include "spex/mixtures.hpp"
#include "spex/rpareto.hpp"

namespace spex {

using ModelSpec =
    std::variant<GaussianCopulaSpec, HotSpec, HwSpec, LocationMixSpec,
                 MaxStableSpec, RParetoSpec, ImsSpec, MaxMixSpec>;

inline const char* model_family_name(const ModelSpec& m) {
  struct Visitor {
    const char* operator()(const GaussianCopulaSpec&) { return "gaussian_copula"; }
    const char* operator()(const HotSpec& s) {
      return s.beta < kShapeEps ? "hot_beta0" : "hot";
    }
    const char* operator()(const HwSpec&) { return "hw"; }
    const char* operator()(const LocationMixSpec&) { return "location_mixture"; }
    const char* operator()(const MaxStableSpec& s) {
      return s.family == MsFamily::brown_resnick ? "brown_resnick"
                                                 : "extremal_t";
    }
    const char* operator()(const RParetoSpec&) { return "rpareto"; }
    const char* operator()(const ImsSpec&) { return "inverted_maxstable"; }
    const char* operator()(const MaxMixSpec&) { return "max_mixture"; }
  };
  return std::visit(Visitor{}, const_cast<ModelSpec&>(m));
}

}  // namespace spex

#endif  // SPEX_MODELS_HPP
