#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "camel/errors.hpp"
#include "camel/field.hpp"
#include "camel/rand.hpp"

namespace camel {

/// A 128-bit PRG seed. Seeds drawn via random() are rejection-sampled so the
/// little-endian value is < p and the seed doubles as a field element.
struct Seed {
  std::array<std::uint8_t, 16> bytes{};

  static constexpr std::size_t kBytes = 16;

  u128 value() const {
    u128 v = 0;
    for (int i = 15; i >= 0; --i) v = (v << 8) | bytes[i];
    return v;
  }

  FieldElem as_field() const {
    const u128 v = value();
    if (v >= FieldElem::kModulus) throw UsageError("seed value not below the field modulus");
    return FieldElem::from_raw(v);
  }

  static Seed from_field(const FieldElem& x) {
    Seed s;
    x.write_le(s.bytes);
    return s;
  }

  /// Uniform seed with value < p.
  static Seed random(Rng& rng) { return from_field(rand_field(rng)); }

  friend bool operator==(const Seed& a, const Seed& b) { return a.bytes == b.bytes; }
};

/// Deterministic byte stream expanded from a seed. Sequential fills are
/// prefix-consistent: reading n then m bytes equals reading n+m at once.
class PrgStream {
 public:
  virtual ~PrgStream() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  u64 next_u64() {
    std::array<std::uint8_t, 8> b;
    fill(b);
    u64 v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  /// Uniform field element, rejection-sampled from the stream.
  template <class Mod = Mersenne127>
  Fp<Mod> next_field() {
    std::array<std::uint8_t, 16> b;
    for (;;) {
      fill(b);
      u128 v = 0;
      for (int i = 15; i >= 0; --i) v = (v << 8) | b[i];
      if constexpr (Fp<Mod>::kModulus == Mersenne127::modulus) v &= Fp<Mod>::kModulus;
      if (v < Fp<Mod>::kModulus) return Fp<Mod>::from_raw(v);
    }
  }

  /// Uniform index in [0, n) by rejection.
  std::size_t next_index(std::size_t n) {
    if (n == 0) throw UsageError("next_index: n must be positive");
    const u64 limit = UINT64_MAX - UINT64_MAX % n;
    u64 v;
    do {
      v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
  }
};

/// AES-128 in counter mode keyed by the seed (zero IV), the protocol PRG.
class AesCtrPrg final : public PrgStream {
 public:
  explicit AesCtrPrg(const Seed& seed) : ctx_(EVP_CIPHER_CTX_new()) {
    if (!ctx_) throw Error("EVP_CIPHER_CTX_new failed");
    static const std::uint8_t iv[16] = {0};
    if (EVP_EncryptInit_ex(ctx_, EVP_aes_128_ctr(), nullptr, seed.bytes.data(), iv) != 1) {
      EVP_CIPHER_CTX_free(ctx_);
      throw Error("AES-CTR init failed");
    }
  }
  ~AesCtrPrg() override { EVP_CIPHER_CTX_free(ctx_); }
  AesCtrPrg(const AesCtrPrg&) = delete;
  AesCtrPrg& operator=(const AesCtrPrg&) = delete;

  void fill(std::span<std::uint8_t> out) override {
    if (out.empty()) return;
    // keystream = encryption of zeros
    std::memset(out.data(), 0, out.size());
    int len = 0;
    if (EVP_EncryptUpdate(ctx_, out.data(), &len, out.data(), static_cast<int>(out.size())) != 1 ||
        len != static_cast<int>(out.size())) {
      throw Error("AES-CTR update failed");
    }
  }

 private:
  EVP_CIPHER_CTX* ctx_;
};

/// Factory indirection so tests can substitute a recorded stream for the PRG.
using PrgFactory = std::function<std::unique_ptr<PrgStream>(const Seed&)>;

inline const PrgFactory& aes_prg() {
  static const PrgFactory f = [](const Seed& s) -> std::unique_ptr<PrgStream> {
    return std::make_unique<AesCtrPrg>(s);
  };
  return f;
}

/// Expands a seed to n_bits pseudorandom bits (packed LSB-first in bytes).
inline std::vector<std::uint8_t> prg_expand(const Seed& seed, std::size_t n_bits,
                                            const PrgFactory& prg = aes_prg()) {
  if (n_bits == 0) throw UsageError("prg_expand: n_bits must be positive");
  std::vector<std::uint8_t> out((n_bits + 7) / 8);
  prg(seed)->fill(out);
  const unsigned rem = n_bits % 8;
  if (rem != 0) out.back() &= static_cast<std::uint8_t>((1u << rem) - 1);
  return out;
}

}  // namespace camel
