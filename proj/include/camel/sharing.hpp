#pragma once

#include <span>
#include <utility>
#include <vector>

#include "camel/errors.hpp"
#include "camel/field.hpp"
#include "camel/rand.hpp"

namespace camel {

enum class PartyId : std::uint8_t { P1 = 1, P2 = 2 };

/// One party's additive share of a field element.
struct Share {
  PartyId party;
  FieldElem value;
};

/// 2-of-2 additive sharing: share1 uniform, share1 + share2 == x (mod p).
inline std::pair<Share, Share> share(const FieldElem& x, Rng& rng) {
  const FieldElem s1 = rand_field(rng);
  return {Share{PartyId::P1, s1}, Share{PartyId::P2, x - s1}};
}

inline FieldElem reconstruct(const Share& s1, const Share& s2) {
  if (s1.party != PartyId::P1 || s2.party != PartyId::P2)
    throw UsageError("reconstruct: party mismatch");
  return s1.value + s2.value;
}

inline std::pair<std::vector<FieldElem>, std::vector<FieldElem>> share_vec(
    std::span<const FieldElem> xs, Rng& rng) {
  std::vector<FieldElem> a(xs.size()), b(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    a[i] = rand_field(rng);
    b[i] = xs[i] - a[i];
  }
  return {std::move(a), std::move(b)};
}

inline std::vector<FieldElem> reconstruct_vec(std::span<const FieldElem> a,
                                              std::span<const FieldElem> b) {
  if (a.size() != b.size()) throw UsageError("reconstruct_vec: length mismatch");
  std::vector<FieldElem> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline std::vector<FieldElem> add_vec(std::span<const FieldElem> a,
                                      std::span<const FieldElem> b) {
  if (a.size() != b.size()) throw UsageError("add_vec: length mismatch");
  std::vector<FieldElem> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline std::vector<FieldElem> sub_vec(std::span<const FieldElem> a,
                                      std::span<const FieldElem> b) {
  if (a.size() != b.size()) throw UsageError("sub_vec: length mismatch");
  std::vector<FieldElem> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline std::vector<FieldElem> rand_field_vec(Rng& rng, std::size_t n) {
  std::vector<FieldElem> out(n);
  for (auto& x : out) x = rand_field(rng);
  return out;
}

}  // namespace camel
