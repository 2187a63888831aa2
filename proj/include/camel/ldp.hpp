#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "camel/errors.hpp"
#include "camel/prg.hpp"
#include "camel/rand.hpp"

namespace camel {

struct LdpParams {
  double epsilon0 = 1.0;  // per-message LDP level
  double L = 1.0;         // l2 clipping bound
  std::uint32_t d = 1;    // gradient dimension
  std::uint32_t e = 32;   // bits per coordinate in the direction encoding

  void validate() const {
    if (!(epsilon0 >= 0)) throw ParamError("epsilon0 must be non-negative");
    if (!(L > 0)) throw ParamError("L must be positive");
    if (d < 1) throw ParamError("d must be at least 1");
    if (e < 8 || e > 48) throw ParamError("e must be in [8, 48]");
  }
};

using Gradient = std::vector<double>;

inline double l2_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Rescales g onto the l2 ball of radius L; inputs already inside are
/// unchanged and direction is preserved.
inline Gradient clip(std::span<const double> g, double L) {
  if (!(L > 0)) throw ParamError("clip: L must be positive");
  Gradient out(g.begin(), g.end());
  const double n = l2_norm(g);
  if (n > L) {
    const double scale = L / n;
    for (double& x : out) x *= scale;
  }
  return out;
}

/// The sign-and-seed wire form of a perturbed gradient.
struct CompressedGrad {
  int sgn = 1;  // -1 or +1
  Seed seed;

  static constexpr std::size_t kWireBytes = 1 + Seed::kBytes;

  /// 1 byte sign (0x00 = -1, 0x01 = +1) + 16-byte seed.
  std::array<std::uint8_t, kWireBytes> to_wire() const {
    std::array<std::uint8_t, kWireBytes> out{};
    out[0] = sgn > 0 ? 0x01 : 0x00;
    std::copy(seed.bytes.begin(), seed.bytes.end(), out.begin() + 1);
    return out;
  }
  static CompressedGrad from_wire(std::span<const std::uint8_t> in) {
    if (in.size() != kWireBytes) throw UsageError("bad CompressedGrad wire size");
    if (in[0] != 0x00 && in[0] != 0x01) throw UsageError("bad CompressedGrad sign byte");
    CompressedGrad r;
    r.sgn = in[0] == 0x01 ? 1 : -1;
    std::copy(in.begin() + 1, in.end(), r.seed.bytes.begin());
    return r;
  }

  friend bool operator==(const CompressedGrad& a, const CompressedGrad& b) {
    return a.sgn == b.sgn && a.seed == b.seed;
  }
};

namespace detail {

/// Reads e-bit chunks (LSB-first) from a PRG stream.
class BitReader {
 public:
  explicit BitReader(PrgStream& s) : s_(s) {}
  u64 next(unsigned bits) {
    u64 v = 0;
    for (unsigned i = 0; i < bits; ++i) {
      if (avail_ == 0) {
        std::uint8_t b;
        s_.fill(std::span<std::uint8_t>(&b, 1));
        cur_ = b;
        avail_ = 8;
      }
      v |= static_cast<u64>(cur_ & 1) << i;
      cur_ >>= 1;
      --avail_;
    }
    return v;
  }

 private:
  PrgStream& s_;
  std::uint8_t cur_ = 0;
  unsigned avail_ = 0;
};

}  // namespace detail

/// Expands a seed into a unit direction: each e-bit chunk u maps through the
/// standard normal inverse CDF at (u + 0.5) / 2^e and the Gaussian vector is
/// normalized, so directions are uniform on the sphere. The (practically
/// unreachable) all-zero expansion re-expands from the next d*e bits of the
/// same stream.
inline std::vector<double> expand_direction(const Seed& seed, std::uint32_t d, std::uint32_t e,
                                            const PrgFactory& prg = aes_prg()) {
  if (d < 1) throw UsageError("expand_direction: d must be at least 1");
  if (e < 8 || e > 48) throw ParamError("expand_direction: e must be in [8, 48]");
  auto stream = prg(seed);
  detail::BitReader bits(*stream);
  const double denom = std::ldexp(1.0, static_cast<int>(e));  // 2^e
  std::vector<double> v(d);
  for (;;) {
    for (std::uint32_t i = 0; i < d; ++i)
      v[i] = inv_normal_cdf((static_cast<double>(bits.next(e)) + 0.5) / denom);
    const double n = l2_norm(v);
    if (n > 0) {
      for (double& x : v) x /= n;
      return v;
    }
  }
}

/// Decompressed magnitude M = L * (sqrt(pi)/2) * d*Gamma((d-1)/2+1)/Gamma(d/2+1)
/// * (e^eps0+1)/(e^eps0-1), computed through log-gamma to stay finite at
/// large d.
inline double decompress_magnitude(const LdpParams& p) {
  p.validate();
  if (!(p.epsilon0 > 0))
    throw ParamError("decompress magnitude undefined at epsilon0 = 0");
  const double d = p.d;
  const double log_gamma_ratio = std::lgamma((d - 1) / 2 + 1) - std::lgamma(d / 2 + 1);
  const double ratio = (std::exp(p.epsilon0) + 1) / (std::exp(p.epsilon0) - 1);
  return p.L * (std::sqrt(M_PI) / 2) * d * std::exp(log_gamma_ratio) * ratio;
}

/// Pr[U = 1] in the sign randomization.
inline double sign_keep_probability(double epsilon0) {
  return std::exp(epsilon0) / (std::exp(epsilon0) + 1);
}

/// Pr[the norm randomization keeps the + direction].
inline double positive_flip_probability(double norm, double L) {
  return 0.5 + norm / (2 * L);
}

/// Perturbs a clipped vector under eps0-LDP and compresses it to a sign bit
/// plus a seed. The transmitted sign is (2U-1) * sign(<v, xbar>) where xbar
/// is the norm-randomized vector, so that decompression reproduces the
/// DJW18 output distribution.
inline CompressedGrad noisy_grad_cmpr(std::span<const double> x, const LdpParams& p, Rng& rng,
                                      const PrgFactory& prg = aes_prg()) {
  p.validate();
  if (x.size() != p.d) throw UsageError("noisy_grad_cmpr: dimension mismatch");
  const double norm = l2_norm(x);
  if (norm > p.L * (1 + 1e-9)) throw UsageError("noisy_grad_cmpr: input norm exceeds L");

  // line 1: xbar = +-L * x/||x||; a zero input takes a fresh uniform direction
  std::vector<double> xbar(x.begin(), x.end());
  if (norm < 1e-300) {
    for (auto& c : xbar) c = rand_gaussian(rng);
    double n = l2_norm(xbar);
    while (n < 1e-300) {  // never in practice
      for (auto& c : xbar) c = rand_gaussian(rng);
      n = l2_norm(xbar);
    }
    const double s = (rand_bernoulli(rng, 0.5) ? 1.0 : -1.0) * p.L / n;
    for (auto& c : xbar) c *= s;
  } else {
    const double s =
        (rand_bernoulli(rng, positive_flip_probability(norm, p.L)) ? 1.0 : -1.0) * p.L / norm;
    for (auto& c : xbar) c *= s;
  }

  const bool u = rand_bernoulli(rng, sign_keep_probability(p.epsilon0));
  const Seed seed = Seed::random(rng);
  const auto v = expand_direction(seed, p.d, p.e, prg);
  double dot = 0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * xbar[i];
  const int align = dot < 0 ? -1 : 1;
  CompressedGrad r;
  r.sgn = (u ? 1 : -1) * align;
  r.seed = seed;
  return r;
}

/// Deterministic decompression: sgn * M * vbar, with ||output|| = M.
inline Gradient noisy_grad_dcmp(const CompressedGrad& r, const LdpParams& p,
                                const PrgFactory& prg = aes_prg()) {
  const double m = decompress_magnitude(p);
  auto v = expand_direction(r.seed, p.d, p.e, prg);
  for (double& c : v) c *= m * r.sgn;
  return v;
}

/// Lemma bound on E||R(x) - x||^2.
inline double variance_bound(const LdpParams& p) {
  const double ratio = (std::exp(p.epsilon0) + 1) / (std::exp(p.epsilon0) - 1);
  const double c = 3 * std::sqrt(M_PI) / 4 * ratio;
  return p.L * p.L * p.d * c * c;
}

struct OracleStats {
  Gradient mean;
  double mse = 0;  // empirical E||R(x) - x||^2
};

/// Monte Carlo estimate of E[R(x)] and E||R(x)-x||^2 over compress/decompress
/// round trips; the independent arbiter for unbiasedness.
inline OracleStats unbiasedness_oracle(std::span<const double> x, const LdpParams& p,
                                       std::size_t trials, Rng& rng,
                                       const PrgFactory& prg = aes_prg()) {
  if (trials < 1) throw UsageError("unbiasedness_oracle: trials must be positive");
  OracleStats st;
  st.mean.assign(p.d, 0.0);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto r = noisy_grad_cmpr(x, p, rng, prg);
    const auto g = noisy_grad_dcmp(r, p, prg);
    double err = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      st.mean[i] += g[i];
      const double diff = g[i] - x[i];
      err += diff * diff;
    }
    st.mse += err;
  }
  for (double& c : st.mean) c /= static_cast<double>(trials);
  st.mse /= static_cast<double>(trials);
  return st;
}

}  // namespace camel
