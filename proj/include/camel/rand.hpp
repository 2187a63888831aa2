#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "camel/errors.hpp"
#include "camel/field.hpp"

namespace camel {

// All randomness is drawn from caller-supplied mt19937_64 engines through the
// helpers below, never through std::uniform_*_distribution, so that sequences
// are identical across standard library implementations.
using Rng = std::mt19937_64;

inline u64 rand_u64(Rng& rng) { return rng(); }

/// Uniform double in [0, 1) with 53 bits of precision.
inline double rand_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool rand_bernoulli(Rng& rng, double p) { return rand_unit(rng) < p; }

/// Uniform index in [0, n) by rejection.
inline std::size_t rand_index(Rng& rng, std::size_t n) {
  if (n == 0) throw UsageError("rand_index: n must be positive");
  const u64 limit = UINT64_MAX - UINT64_MAX % n;
  u64 v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

/// Uniform field element by rejection from 128 random bits.
template <class Mod = Mersenne127>
inline Fp<Mod> rand_field(Rng& rng) {
  for (;;) {
    u128 v = (static_cast<u128>(rng()) << 64) | rng();
    if constexpr (Fp<Mod>::kModulus == Mersenne127::modulus) {
      v &= Fp<Mod>::kModulus;  // keep 127 bits; only the value p itself is rejected
    }
    if (v < Fp<Mod>::kModulus) return Fp<Mod>::from_raw(v);
  }
}

/// k distinct indices from [0, n), order random (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t k) {
  if (k > n) throw UsageError("sample_without_replacement: k > n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rand_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

/// Inverse standard normal CDF (Wichura's AS 241, PPND16). Accurate to about
/// 1e-15 over (0, 1); used both for the sphere-direction encoding and for
/// synthetic Gaussian data.
inline double inv_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("inv_normal_cdf: p must be in (0,1)");
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
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
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
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
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
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
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
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
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
  return q < 0.0 ? -val : val;
}

/// Standard normal variate via the inverse CDF (deterministic given the rng).
inline double rand_gaussian(Rng& rng) {
  // (v + 0.5) / 2^53 stays strictly inside (0, 1)
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  return inv_normal_cdf(u);
}

}  // namespace camel
