#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "camel/errors.hpp"
#include "camel/prg.hpp"

namespace camel {

/// A bijection on [0, n). Applying it moves input index map[i] to output
/// index i, matching the convention pi(v) = (v_{pi(1)}, ..., v_{pi(n)}).
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::uint32_t> map) : map_(std::move(map)) {
    if (!is_bijection(map_)) throw UsageError("permutation mapping is not a bijection");
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::uint32_t> m(n);
    std::iota(m.begin(), m.end(), 0u);
    Permutation p;
    p.map_ = std::move(m);
    return p;
  }

  std::size_t size() const { return map_.size(); }
  std::uint32_t operator[](std::size_t i) const { return map_[i]; }
  const std::vector<std::uint32_t>& mapping() const { return map_; }

  template <class T>
  std::vector<T> apply(std::span<const T> v) const {
    if (v.size() != map_.size()) throw UsageError("permutation size mismatch");
    std::vector<T> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(v[map_[i]]);
    return out;
  }
  template <class T>
  std::vector<T> apply(const std::vector<T>& v) const {
    return apply(std::span<const T>(v));
  }

  Permutation inverse() const {
    std::vector<std::uint32_t> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) inv[map_[i]] = static_cast<std::uint32_t>(i);
    Permutation p;
    p.map_ = std::move(inv);
    return p;
  }

  /// Output position of input index j under this permutation.
  std::uint32_t position_of(std::uint32_t j) const {
    for (std::size_t i = 0; i < map_.size(); ++i)
      if (map_[i] == j) return static_cast<std::uint32_t>(i);
    throw UsageError("index out of range");
  }

  static bool is_bijection(const std::vector<std::uint32_t>& m) {
    std::vector<bool> seen(m.size(), false);
    for (auto v : m) {
      if (v >= m.size() || seen[v]) return false;
      seen[v] = true;
    }
    return true;
  }

 private:
  std::vector<std::uint32_t> map_;
};

/// compose(outer, inner).apply(v) == outer.apply(inner.apply(v)).
inline Permutation compose(const Permutation& outer, const Permutation& inner) {
  if (outer.size() != inner.size()) throw UsageError("compose: size mismatch");
  std::vector<std::uint32_t> m(outer.size());
  for (std::size_t i = 0; i < outer.size(); ++i) m[i] = inner[outer[i]];
  return Permutation(std::move(m));
}

/// Deterministic uniform permutation from a seed: Fisher-Yates driven by
/// rejection-sampled indices from the PRG stream.
inline Permutation derive_permutation(const Seed& seed, std::size_t n,
                                      const PrgFactory& prg = aes_prg()) {
  if (n == 0) throw UsageError("derive_permutation: n must be positive");
  auto stream = prg(seed);
  std::vector<std::uint32_t> m(n);
  std::iota(m.begin(), m.end(), 0u);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t j = stream->next_index(i + 1);
    std::swap(m[i], m[j]);
  }
  return Permutation(std::move(m));
}

}  // namespace camel
