#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "camel/errors.hpp"

namespace camel {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

namespace detail {

// 128x128 -> 256 bit product as (hi, lo).
inline void mul_wide(u128 a, u128 b, u128& hi, u128& lo) {
  const u64 a0 = static_cast<u64>(a), a1 = static_cast<u64>(a >> 64);
  const u64 b0 = static_cast<u64>(b), b1 = static_cast<u64>(b >> 64);
  const u128 p00 = static_cast<u128>(a0) * b0;
  const u128 p01 = static_cast<u128>(a0) * b1;
  const u128 p10 = static_cast<u128>(a1) * b0;
  const u128 p11 = static_cast<u128>(a1) * b1;
  u128 mid = p01 + p10;                       // may carry
  const u128 carry_mid = (mid < p01) ? (u128(1) << 64) : 0;
  lo = p00 + (mid << 64);
  const u128 carry_lo = (lo < p00) ? 1 : 0;
  hi = p11 + (mid >> 64) + carry_mid + carry_lo;
}

// (hi, lo) mod m via binary long division. Slow path for non-Mersenne moduli.
inline u128 mod_256_generic(u128 hi, u128 lo, u128 m) {
  u128 rem = 0;
  for (int i = 255; i >= 0; --i) {
    const int bit = i >= 128 ? static_cast<int>((hi >> (i - 128)) & 1)
                             : static_cast<int>((lo >> i) & 1);
    const bool top = (rem >> 127) & 1;
    rem = (rem << 1) | static_cast<u128>(bit);
    if (top || rem >= m) rem -= m;
  }
  return rem;
}

}  // namespace detail

/// Modulus tag for p = 2^127 - 1 (Mersenne prime; fast folding reduction).
struct Mersenne127 {
  static constexpr u128 modulus = (u128(1) << 127) - 1;
};

/// Prime field Z_p. The modulus is a compile-time tag; any prime >= 2^126
/// that fits 128 bits works, with a fast path for 2^127 - 1.
template <class Mod = Mersenne127>
class Fp {
 public:
  static constexpr u128 kModulus = Mod::modulus;
  static_assert(kModulus >= (u128(1) << 126), "modulus must be at least 2^126");

  constexpr Fp() : v_(0) {}
  constexpr explicit Fp(u128 v) : v_(v % kModulus) {}
  constexpr explicit Fp(u64 v) : v_(v % kModulus) {}
  constexpr explicit Fp(int v)
      : v_(v >= 0 ? static_cast<u128>(v) % kModulus
                  : kModulus - (static_cast<u128>(-(static_cast<long long>(v))) % kModulus)) {}

  static constexpr Fp zero() { return Fp(); }
  static constexpr Fp one() { return Fp(u128(1)); }
  static constexpr u128 modulus() { return kModulus; }

  constexpr u128 raw() const { return v_; }

  Fp& operator+=(const Fp& o) {
    v_ += o.v_;  // both < p < 2^127, no overflow
    if (v_ >= kModulus) v_ -= kModulus;
    return *this;
  }
  Fp& operator-=(const Fp& o) {
    v_ = (v_ >= o.v_) ? v_ - o.v_ : v_ + kModulus - o.v_;
    return *this;
  }
  Fp& operator*=(const Fp& o) {
    u128 hi, lo;
    detail::mul_wide(v_, o.v_, hi, lo);
    if constexpr (kModulus == Mersenne127::modulus) {
      // 2^128 == 2 (mod p), so hi*2^128 + lo == 2*hi + lo. hi < 2^126.
      constexpr u128 mask = Mersenne127::modulus;
      u128 r = (lo & mask) + (lo >> 127) + (hi << 1);
      r = (r & mask) + (r >> 127);
      if (r >= kModulus) r -= kModulus;
      v_ = r;
    } else {
      v_ = detail::mod_256_generic(hi, lo, kModulus);
    }
    return *this;
  }
  Fp negate() const { return v_ == 0 ? Fp() : from_raw(kModulus - v_); }

  friend Fp operator+(Fp a, const Fp& b) { return a += b; }
  friend Fp operator-(Fp a, const Fp& b) { return a -= b; }
  friend Fp operator*(Fp a, const Fp& b) { return a *= b; }
  friend bool operator==(const Fp& a, const Fp& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Fp& a, const Fp& b) { return a.v_ != b.v_; }

  /// Constructs from an already-reduced value; caller guarantees v < p.
  static constexpr Fp from_raw(u128 v) {
    Fp r;
    r.v_ = v;
    return r;
  }

  /// 16-byte little-endian serialization; round-trips bit-exactly.
  void write_le(std::span<std::uint8_t, 16> out) const {
    u128 v = v_;
    for (int i = 0; i < 16; ++i) {
      out[i] = static_cast<std::uint8_t>(v);
      v >>= 8;
    }
  }
  static Fp read_le(std::span<const std::uint8_t, 16> in) {
    u128 v = 0;
    for (int i = 15; i >= 0; --i) v = (v << 8) | in[i];
    if (v >= kModulus) throw UsageError("field element out of range");
    return from_raw(v);
  }

 private:
  u128 v_;
};

using FieldElem = Fp<>;

inline constexpr std::size_t kFieldBytes = 16;

inline void append_field(std::vector<std::uint8_t>& out, const FieldElem& x) {
  std::array<std::uint8_t, 16> buf;
  x.write_le(buf);
  out.insert(out.end(), buf.begin(), buf.end());
}

inline FieldElem read_field(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + kFieldBytes > in.size()) throw UsageError("field read out of bounds");
  return FieldElem::read_le(std::span<const std::uint8_t, 16>(in.data() + offset, 16));
}

inline std::vector<std::uint8_t> fields_to_bytes(std::span<const FieldElem> xs) {
  std::vector<std::uint8_t> out;
  out.reserve(xs.size() * kFieldBytes);
  for (const auto& x : xs) append_field(out, x);
  return out;
}

inline std::vector<FieldElem> bytes_to_fields(std::span<const std::uint8_t> in) {
  if (in.size() % kFieldBytes != 0) throw UsageError("byte length not a multiple of 16");
  std::vector<FieldElem> out(in.size() / kFieldBytes);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = read_field(in, i * kFieldBytes);
  return out;
}

inline std::string to_string(const FieldElem& x) {
  u128 v = x.raw();
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  return s;
}

}  // namespace camel
