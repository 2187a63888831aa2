#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camel/beaver.hpp"
#include "camel/errors.hpp"
#include "camel/hash.hpp"
#include "camel/ldp.hpp"
#include "camel/prg.hpp"
#include "camel/sharing.hpp"
#include "camel/transport.hpp"

namespace camel {

/// Payload length for compressed-mode entries: element 0 carries the sign
/// (0 or 1), element 1 the seed as a field element.
inline constexpr std::uint32_t kCompressedPayloadLen = 2;

/// Width of a full entry row [tag | payload(l) | key(l)].
inline constexpr std::uint32_t entry_width(std::uint32_t l) { return 2 * l + 1; }

/// G: Z_p -> Z_p^l, the MAC key expansion (rejection-sampled from the PRG).
inline std::vector<FieldElem> key_expand(const Seed& m, std::uint32_t l,
                                         const PrgFactory& prg = aes_prg()) {
  if (l < 1) throw UsageError("key_expand: l must be at least 1");
  auto stream = prg(m);
  std::vector<FieldElem> key(l);
  for (auto& k : key) k = stream->next_field();
  return key;
}

/// Carter-Wegman tag t = sum_j key[j] * payload[j].
inline FieldElem mac_tag(std::span<const FieldElem> payload, std::span<const FieldElem> key) {
  if (payload.size() != key.size()) throw UsageError("mac_tag: length mismatch");
  FieldElem t;
  for (std::size_t j = 0; j < payload.size(); ++j) t += key[j] * payload[j];
  return t;
}

/// A plaintext (tag, payload, key) triple of total field length 2l+1.
struct MacEntry {
  FieldElem tag;
  std::vector<FieldElem> payload;
  std::vector<FieldElem> key;

  bool verify() const { return mac_tag(payload, key) == tag; }
};

/// One party's material for a MACed entry: shares of tag and payload plus
/// this party's MAC key seed (the key share is G(seed), computed locally).
struct SharedMacEntry {
  struct PartyShare {
    FieldElem tag;
    std::vector<FieldElem> payload;
    Seed key_seed;

    static constexpr std::size_t wire_bytes(std::uint32_t l) {
      return kFieldBytes * (1 + l) + Seed::kBytes;
    }
    std::vector<std::uint8_t> to_wire() const {
      std::vector<std::uint8_t> out;
      out.reserve(wire_bytes(static_cast<std::uint32_t>(payload.size())));
      append_field(out, tag);
      for (const auto& x : payload) append_field(out, x);
      out.insert(out.end(), key_seed.bytes.begin(), key_seed.bytes.end());
      return out;
    }
    static PartyShare from_wire(std::span<const std::uint8_t> in, std::uint32_t l) {
      if (in.size() != wire_bytes(l)) throw UsageError("bad PartyShare wire size");
      PartyShare ps;
      ps.tag = read_field(in, 0);
      ps.payload.resize(l);
      for (std::uint32_t j = 0; j < l; ++j) ps.payload[j] = read_field(in, (1 + j) * kFieldBytes);
      std::copy(in.end() - 16, in.end(), ps.key_seed.bytes.begin());
      return ps;
    }

    /// Flattened protocol row [tag | payload | G(key_seed)].
    std::vector<FieldElem> to_row(const PrgFactory& prg = aes_prg()) const {
      std::vector<FieldElem> row;
      row.reserve(entry_width(static_cast<std::uint32_t>(payload.size())));
      row.push_back(tag);
      row.insert(row.end(), payload.begin(), payload.end());
      const auto key = key_expand(key_seed, static_cast<std::uint32_t>(payload.size()), prg);
      row.insert(row.end(), key.begin(), key.end());
      return row;
    }
  };
  PartyShare p1, p2;
};

namespace detail {

inline SharedMacEntry package_payload(std::span<const FieldElem> payload, Rng& rng,
                                      const PrgFactory& prg) {
  const auto l = static_cast<std::uint32_t>(payload.size());
  SharedMacEntry e;
  e.p1.key_seed = Seed::random(rng);
  e.p2.key_seed = Seed::random(rng);
  const auto k1 = key_expand(e.p1.key_seed, l, prg);
  const auto k2 = key_expand(e.p2.key_seed, l, prg);
  const auto key = add_vec(k1, k2);
  const FieldElem tag = mac_tag(payload, key);
  auto [t1, t2] = share_vec(payload, rng);
  e.p1.payload = std::move(t1);
  e.p2.payload = std::move(t2);
  e.p1.tag = rand_field(rng);
  e.p2.tag = tag - e.p1.tag;
  return e;
}

}  // namespace detail

inline std::array<FieldElem, 2> encode_compressed_payload(const CompressedGrad& r) {
  return {FieldElem(r.sgn > 0 ? 1 : 0), r.seed.as_field()};
}

inline CompressedGrad decode_compressed_payload(std::span<const FieldElem> payload) {
  if (payload.size() != kCompressedPayloadLen) throw UsageError("bad compressed payload length");
  if (payload[0] != FieldElem(0) && payload[0] != FieldElem(1))
    throw UsageError("malformed compressed payload sign");
  CompressedGrad r;
  r.sgn = payload[0] == FieldElem(1) ? 1 : -1;
  r.seed = Seed::from_field(payload[1]);
  return r;
}

/// Client-side packaging: payload encodes r in l = 2 field elements, the tag
/// is honest per the Carter-Wegman rule, and shares split between S1 and S2.
inline SharedMacEntry client_package(const CompressedGrad& r, Rng& rng,
                                     const PrgFactory& prg = aes_prg()) {
  const auto payload = encode_compressed_payload(r);
  return detail::package_payload(payload, rng, prg);
}

// --- vec-mode payload codec (fixed point, 2^32 scale) ---

inline constexpr double kVecScale = 4294967296.0;  // 2^32

inline FieldElem encode_real(double v) {
  const double scaled = std::nearbyint(v * kVecScale);
  if (!(std::fabs(scaled) < 9.2e18)) throw UsageError("encode_real: value out of range");
  const long long s = static_cast<long long>(scaled);
  return s >= 0 ? FieldElem(static_cast<u128>(s))
                : FieldElem(static_cast<u128>(-s)).negate();
}

inline double decode_real(const FieldElem& x) {
  const u128 half = FieldElem::kModulus / 2;
  if (x.raw() <= half) return static_cast<double>(static_cast<long double>(x.raw())) / kVecScale;
  const u128 neg = FieldElem::kModulus - x.raw();
  return -static_cast<double>(static_cast<long double>(neg)) / kVecScale;
}

inline std::vector<FieldElem> encode_vec_payload(std::span<const double> g) {
  std::vector<FieldElem> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = encode_real(g[i]);
  return out;
}

inline std::vector<double> decode_vec_payload(std::span<const FieldElem> payload) {
  std::vector<double> out(payload.size());
  for (std::size_t i = 0; i < payload.size(); ++i) out[i] = decode_real(payload[i]);
  return out;
}

/// Packaging for the vec baseline: the payload is the full d-dimensional
/// perturbed gradient, MACed with a length-d key.
inline SharedMacEntry client_package_vec(std::span<const double> g, Rng& rng,
                                         const PrgFactory& prg = aes_prg()) {
  const auto payload = encode_vec_payload(g);
  return detail::package_payload(payload, rng, prg);
}

// --- blind batched verification (Eq. 2) ---

struct MacVerifyOptions {
  bool commit_exchange = true;       // hash f-shares before disclosure
  std::string context = "camel.f";   // domain tag for the commitment
  std::string check_name;            // prefixes abort reasons when set
};

/// Adversarial interception points for the verification endgame; honest runs
/// leave both unset.
struct MacVerifyHooks {
  // Replaces this party's f-share reveal after observing the peer's reveal.
  std::function<FieldElem(FieldElem own_share, FieldElem their_reveal)> forge_reveal;
  // Tampers this party's product-share sum before f is formed.
  std::function<FieldElem(FieldElem)> tamper_product_sum;
};

namespace detail {

inline Digest commit_f_share(const MacVerifyOptions& opt, std::uint16_t round,
                             const FieldElem& f_share) {
  std::vector<std::uint8_t> buf;
  buf.push_back(static_cast<std::uint8_t>(round));
  buf.push_back(static_cast<std::uint8_t>(round >> 8));
  append_field(buf, f_share);
  return hash_digest(opt.context, buf);
}

}  // namespace detail

/// Blind batched MAC verification over shared entry rows. Both parties hold
/// their side of N rows [tag | payload(l) | key(l)]; one Beaver triple per
/// payload element plus one for the random factor w. Throws AbortError when
/// f != 0 or a revealed f-share does not match its committed hash. Only f
/// and hashes of f-shares cross the channel besides masked Beaver openings.
inline void blind_mac_verify(Duplex& peer, bool adds_ef,
                             std::span<const std::vector<FieldElem>> rows, std::uint32_t l,
                             TripleBatch& triples, Rng& rng,
                             const MacVerifyOptions& opt = {},
                             const MacVerifyHooks* hooks = nullptr) {
  const std::uint32_t w = entry_width(l);
  std::vector<FieldElem> ks, rs;
  ks.reserve(rows.size() * l);
  rs.reserve(rows.size() * l);
  FieldElem tag_sum;
  for (const auto& row : rows) {
    if (row.size() != w) throw UsageError("blind_mac_verify: bad row width");
    tag_sum += row[0];
    for (std::uint32_t j = 0; j < l; ++j) {
      rs.push_back(row[1 + j]);
      ks.push_back(row[1 + l + j]);
    }
  }
  const auto products = beaver_mul_batch(peer, ks, rs, triples, adds_ef);
  FieldElem prod_sum;
  for (const auto& z : products) prod_sum += z;
  if (hooks && hooks->tamper_product_sum) prod_sum = hooks->tamper_product_sum(prod_sum);

  const FieldElem w_share = rand_field(rng);  // joint randomness, sampled locally
  const FieldElem diff_share = tag_sum - prod_sum;
  FieldElem f_share = beaver_mul(peer, w_share, diff_share, triples.take(), adds_ef);

  std::optional<Digest> their_commit;
  std::uint16_t their_commit_round = 0;
  if (opt.commit_exchange) {
    const Digest mine = detail::commit_f_share(opt, peer.out.next_send_round(), f_share);
    peer.out.send(MsgType::FHashCommit, std::vector<std::uint8_t>(mine.begin(), mine.end()));
    const auto msg = peer.in.recv(MsgType::FHashCommit);
    if (msg.payload.size() != 32) throw ProtocolError("bad commit size");
    Digest d;
    std::copy(msg.payload.begin(), msg.payload.end(), d.begin());
    their_commit = d;
    their_commit_round = msg.round;
  }

  FieldElem their_f;
  if (hooks && hooks->forge_reveal) {
    // adversary waits for the peer's reveal, then answers
    their_f = peer.in.recv_fields(MsgType::FReveal).at(0);
    const FieldElem forged = hooks->forge_reveal(f_share, their_f);
    peer.out.send_fields(MsgType::FReveal, std::array<FieldElem, 1>{forged});
    f_share = forged;
  } else {
    peer.out.send_fields(MsgType::FReveal, std::array<FieldElem, 1>{f_share});
    their_f = peer.in.recv_fields(MsgType::FReveal).at(0);
  }

  const std::string prefix = opt.check_name.empty() ? "" : opt.check_name + "/";
  if (their_commit) {
    const Digest expect = detail::commit_f_share(opt, their_commit_round, their_f);
    if (expect != *their_commit)
      throw AbortError(prefix + "f-hash-mismatch", "revealed f-share does not match its hash");
  }
  if (f_share + their_f != FieldElem(0))
    throw AbortError(prefix + "mac-f-nonzero", "blind MAC verification failed: f != 0");
}

}  // namespace camel
