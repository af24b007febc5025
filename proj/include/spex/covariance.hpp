// Powered exponential correlation with optional geometric anisotropy, and
// the rotation-stretch coordinate transformation that makes it isotropic.

#ifndef SPEX_COVARIANCE_HPP
#define SPEX_COVARIANCE_HPP

#include <cmath>
#include <optional>
#include <stdexcept>

#include "spex/data.hpp"

namespace spex {

struct Anisotropy {
  double psi = 0.0;  // rotation angle in (-pi/2, pi/2)
  double L = 1.0;    // stretch > 0
};

// Correlation rho(s1,s2) = exp{-(d/phi)^nu} with d the Mahalanobis distance
// under the rotation-stretch matrix when anisotropy is present.
struct CovarianceSpec {
  double phi = 1.0;  // range > 0
  double nu = 1.0;   // smoothness in (0,2]; nu == 2 is a boundary case
  std::optional<Anisotropy> aniso;

  void validate() const {
    if (!(phi > 0.0)) throw std::invalid_argument("covariance: phi must be > 0");
    if (!(nu > 0.0 && nu <= 2.0))
      throw std::invalid_argument("covariance: nu must lie in (0,2]");
    if (aniso) {
      if (!(aniso->L > 0.0))
        throw std::invalid_argument("covariance: stretch L must be > 0");
      if (!(aniso->psi > -kPiHalf() && aniso->psi < kPiHalf()))
        throw std::invalid_argument("covariance: psi must lie in (-pi/2,pi/2)");
    }
  }

  // nu == 2 yields a Gaussian-shape correlation; simulation accepts it but
  // callers may want to surface it as a boundary value.
  bool smoothness_at_boundary() const { return nu == 2.0; }

 private:
  static double kPiHalf() { return 1.5707963267948966; }
};

// Coordinates of s mapped by diag(1, L) * Rotation(psi).
inline std::array<double, 2> transform_coord(const std::array<double, 2>& s,
                                             double psi, double L) {
  const double c = std::cos(psi), sn = std::sin(psi);
  return {c * s[0] + sn * s[1], L * (-sn * s[0] + c * s[1])};
}

inline SiteSet transform_sites(const SiteSet& sites, double psi, double L) {
  SiteSet out = sites;
  for (auto& s : out.coords) s = transform_coord(s, psi, L);
  return out;
}

// Mahalanobis distance under the anisotropy of the spec (plain Euclidean
// distance when no anisotropy is set or L == 1 with any rotation).
inline double aniso_distance(const CovarianceSpec& spec,
                             const std::array<double, 2>& s1,
                             const std::array<double, 2>& s2) {
  const std::array<double, 2> d{s1[0] - s2[0], s1[1] - s2[1]};
  if (!spec.aniso) return std::hypot(d[0], d[1]);
  const auto t = transform_coord(d, spec.aniso->psi, spec.aniso->L);
  return std::hypot(t[0], t[1]);
}

inline double correlation_at_distance(const CovarianceSpec& spec, double h) {
  if (h <= 0.0) return 1.0;
  return std::exp(-std::pow(h / spec.phi, spec.nu));
}

inline double correlation(const CovarianceSpec& spec,
                          const std::array<double, 2>& s1,
                          const std::array<double, 2>& s2) {
  spec.validate();
  return correlation_at_distance(spec, aniso_distance(spec, s1, s2));
}

}  // namespace spex

#endif  // SPEX_COVARIANCE_HPP
