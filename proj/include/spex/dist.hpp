// Scalar distribution utilities: normal, Student t, incomplete gamma,
// and deterministic bivariate normal / t rectangle probabilities.

#ifndef SPEX_DIST_HPP
#define SPEX_DIST_HPP

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spex {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double norm_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

// Wichura's AS241 (PPND16): double-precision normal quantile.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("norm_quantile: p outside [0,1]");
  }
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                      r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e0) *
                    r +
                3.64784832476320460504e0) *
                   r +
               5.76949722146069140550e0) *
                  r +
              4.63033784615654529590e0) *
                 r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                      r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e0) *
                  r +
              2.05319162663775882187e0) *
                 r +
             1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                      r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e0) *
                  r +
              5.46378491116411436990e0) *
                 r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r +
                   1.42151175831644588870e-7) *
                      r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
  }
  return q < 0.0 ? -value : value;
}

inline double student_t_cdf(double x, double dof) {
  boost::math::students_t_distribution<double> d(dof);
  return cdf(d, x);
}

inline double student_t_pdf(double x, double dof) {
  boost::math::students_t_distribution<double> d(dof);
  return pdf(d, x);
}

inline double student_t_quantile(double p, double dof) {
  boost::math::students_t_distribution<double> d(dof);
  return quantile(d, p);
}

inline double chi_squared_quantile(double p, double dof) {
  boost::math::chi_squared_distribution<double> d(dof);
  return quantile(d, p);
}

// Regularized lower incomplete gamma P(a,x) and its inverse in x.
inline double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }
inline double gamma_p_inv(double a, double p) {
  return boost::math::gamma_p_inv(a, p);
}

namespace detail {
// Gauss-Legendre half-rules used by the bivariate normal algorithm.
inline constexpr double kGl6w[3] = {0.1713244923791705, 0.3607615730481384,
                                    0.4679139345726904};
inline constexpr double kGl6x[3] = {0.9324695142031522, 0.6612093864662647,
                                    0.2386191860831970};
inline constexpr double kGl12w[6] = {0.04717533638651177, 0.1069393259953183,
                                     0.1600783285433464,  0.2031674267230659,
                                     0.2334925365383547,  0.2491470458134029};
inline constexpr double kGl12x[6] = {0.9815606342467191, 0.9041172563704750,
                                     0.7699026741943050, 0.5873179542866171,
                                     0.3678314989981802, 0.1252334085114692};
inline constexpr double kGl20w[10] = {
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
    0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
    0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
    0.1527533871307259};
inline constexpr double kGl20x[10] = {
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
    0.07652652113349733};
}  // namespace detail

// Genz's BVND algorithm: upper-quadrant probability P(X > dh, Y > dk) for a
// standard bivariate normal pair with correlation r. Accuracy ~1e-15.
inline double bvn_upper(double dh, double dk, double r) {
  const double inf = std::numeric_limits<double>::infinity();
  if (dh == inf || dk == inf) return 0.0;
  if (dh == -inf) return dk == -inf ? 1.0 : norm_sf(dk);
  if (dk == -inf) return norm_sf(dh);
  if (r == 0.0) return norm_sf(dh) * norm_sf(dk);

  const double* w;
  const double* x;
  int ng;
  if (std::fabs(r) < 0.3) {
    w = detail::kGl6w;
    x = detail::kGl6x;
    ng = 3;
  } else if (std::fabs(r) < 0.75) {
    w = detail::kGl12w;
    x = detail::kGl12x;
    ng = 6;
  } else {
    w = detail::kGl20w;
    x = detail::kGl20x;
    ng = 10;
  }

  double h = dh, k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (std::fabs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (int i = 0; i < ng; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        const double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
        bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / (4.0 * kPi) + norm_sf(h) * norm_sf(k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::fabs(r) < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0) {
        bvn = a * std::exp(asr) *
              (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 +
               c * d * as * as / 5.0);
      }
      if (-hk < 100.0) {
        const double b = std::sqrt(bs);
        bvn -= std::exp(-hk / 2.0) * std::sqrt(2.0 * kPi) * norm_cdf(-b / a) *
               b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < ng; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double xs = a * (is * x[i] + 1.0) * a * (is * x[i] + 1.0);
          const double rs = std::sqrt(1.0 - xs);
          asr = -(bs / xs + hk) / 2.0;
          if (asr > -100.0) {
            bvn += a * w[i] * std::exp(asr) *
                   (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                    (1.0 + c * xs * (1.0 + d * xs)));
          }
        }
      }
      bvn = -bvn / (2.0 * kPi);
    }
    if (r > 0.0) {
      bvn += norm_sf(std::max(h, k));
    } else {
      bvn = -bvn;
      if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
    }
  }
  return std::max(0.0, std::min(1.0, bvn));
}

// P(X <= h, Y <= k) for standard bivariate normal with correlation r.
inline double bvn_cdf(double h, double k, double r) {
  return bvn_upper(-h, -k, r);
}

// P(T1 <= h, T2 <= k) for a central bivariate t with correlation r and
// dof degrees of freedom, via the chi-squared scale-mixture representation
// integrated with a fixed Gauss-Legendre rule.
inline double bvt_cdf(double h, double k, double r, double dof) {
  if (dof <= 0.0) throw std::domain_error("bvt_cdf: dof must be positive");
  // Composite Gauss-Legendre with 4 panels of the 20-point rule on the
  // probability scale of the chi-squared mixing variable.
  double prob = 0.0;
  for (int panel = 0; panel < 4; ++panel) {
    const double lo = panel / 4.0;
    const double hi = (panel + 1) / 4.0;
    const double c = (lo + hi) / 2.0, hw = (hi - lo) / 2.0;
    for (int i = 0; i < 10; ++i) {
      for (int is = -1; is <= 1; is += 2) {
        const double t = c + hw * is * detail::kGl20x[i];
        const double s = chi_squared_quantile(t, dof);
        const double scale = std::sqrt(s / dof);
        prob += hw * detail::kGl20w[i] * bvn_cdf(h * scale, k * scale, r);
      }
    }
  }
  return std::max(0.0, std::min(1.0, prob));
}

}  // namespace spex

#endif  // SPEX_DIST_HPP
