#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "camel/beaver.hpp"
#include "camel/errors.hpp"
#include "camel/mac.hpp"
#include "camel/permutation.hpp"
#include "camel/prg.hpp"
#include "camel/sharing.hpp"
#include "camel/transport.hpp"

namespace camel {

enum class Role : std::uint8_t { S1 = 1, S2 = 2, S3 = 3 };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::S1: return "S1";
    case Role::S2: return "S2";
    default: return "S3";
  }
}

/// One shuffled unit: a MacEntry row of width 2l+1 (or any fixed width when
/// integrity checks are off).
using Row = std::vector<FieldElem>;

inline std::vector<std::uint8_t> rows_to_bytes(std::span<const Row> rows) {
  std::vector<std::uint8_t> out;
  if (rows.empty()) return out;
  out.reserve(rows.size() * rows[0].size() * kFieldBytes);
  for (const auto& r : rows)
    for (const auto& x : r) append_field(out, x);
  return out;
}

inline std::vector<Row> bytes_to_rows(std::span<const std::uint8_t> in, std::size_t width) {
  const auto flat = bytes_to_fields(in);
  if (width == 0 || flat.size() % width != 0) throw ProtocolError("bad row payload shape");
  std::vector<Row> rows(flat.size() / width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    rows[i].assign(flat.begin() + i * width, flat.begin() + (i + 1) * width);
  return rows;
}

inline std::vector<Row> add_rows(std::span<const Row> a, std::span<const Row> b) {
  if (a.size() != b.size()) throw UsageError("add_rows: length mismatch");
  std::vector<Row> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = add_vec(a[i], b[i]);
  return out;
}

inline std::vector<Row> sub_rows(std::span<const Row> a, std::span<const Row> b) {
  if (a.size() != b.size()) throw UsageError("sub_rows: length mismatch");
  std::vector<Row> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = sub_vec(a[i], b[i]);
  return out;
}

inline std::vector<Row> rand_rows(Rng& rng, std::size_t n, std::size_t width) {
  std::vector<Row> out(n);
  for (auto& r : out) r = rand_field_vec(rng, width);
  return out;
}

// --- correlation expansion -------------------------------------------------

namespace detail {

inline Permutation fisher_yates(PrgStream& stream, std::size_t n) {
  std::vector<std::uint32_t> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = static_cast<std::uint32_t>(i);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t j = stream.next_index(i + 1);
    std::swap(m[i], m[j]);
  }
  return Permutation(std::move(m));
}

inline std::vector<Row> stream_rows(PrgStream& stream, std::size_t n, std::size_t width) {
  std::vector<Row> rows(n);
  for (auto& r : rows) {
    r.resize(width);
    for (auto& x : r) x = stream.next_field();
  }
  return rows;
}

}  // namespace detail

/// seed1 expands to (pi1, a2prime, b2), in that stream order.
struct S1Bundle {
  Permutation pi1;
  std::vector<Row> a2prime, b2;
};
inline S1Bundle expand_seed1(const Seed& s, std::size_t n, std::size_t width,
                             const PrgFactory& prg = aes_prg()) {
  auto stream = prg(s);
  S1Bundle b;
  b.pi1 = detail::fisher_yates(*stream, n);
  b.a2prime = detail::stream_rows(*stream, n, width);
  b.b2 = detail::stream_rows(*stream, n, width);
  return b;
}

/// seed2 expands to (pi2, a1).
struct S2Bundle {
  Permutation pi2;
  std::vector<Row> a1;
};
inline S2Bundle expand_seed2(const Seed& s, std::size_t n, std::size_t width,
                             const PrgFactory& prg = aes_prg()) {
  auto stream = prg(s);
  S2Bundle b;
  b.pi2 = detail::fisher_yates(*stream, n);
  b.a1 = detail::stream_rows(*stream, n, width);
  return b;
}

/// The full plaintext shuffle correlation; test oracle only, no single party
/// ever holds this.
struct ShuffleCorrelation {
  Permutation pi1, pi2, pi12;
  std::vector<Row> a1, a2prime, b2, delta;
};

inline std::vector<Row> compute_delta(const Permutation& pi1, const Permutation& pi2,
                                      std::span<const Row> a1, std::span<const Row> a2prime,
                                      std::span<const Row> b2) {
  return sub_rows(pi2.apply(add_rows(pi1.apply(a1), a2prime)), b2);
}

inline ShuffleCorrelation derive_correlation(const Seed& seed1, const Seed& seed2,
                                             const Seed& seed12, std::size_t n,
                                             std::size_t width,
                                             const PrgFactory& prg = aes_prg()) {
  ShuffleCorrelation c;
  auto b1 = expand_seed1(seed1, n, width, prg);
  auto b2 = expand_seed2(seed2, n, width, prg);
  c.pi1 = std::move(b1.pi1);
  c.pi2 = std::move(b2.pi2);
  c.pi12 = derive_permutation(seed12, n, prg);
  c.a1 = std::move(b2.a1);
  c.a2prime = std::move(b1.a2prime);
  c.b2 = std::move(b1.b2);
  c.delta = compute_delta(c.pi1, c.pi2, c.a1, c.a2prime, c.b2);
  return c;
}

/// What one role may hold after the offline phase; fields a role must not
/// know stay disengaged.
struct PartyView {
  Role role;
  std::optional<Permutation> pi1, pi2, pi12;
  std::optional<std::vector<Row>> a1, a2prime, b2, delta;
};

struct OfflineViews {
  PartyView s1, s2, s3;
};

/// Channel-driven offline correlation generation: S1 and S2 send their seeds
/// to S3, S3 expands and answers with delta to S2. pi12 is assumed exchanged
/// at session setup. The only bytes on the wire are the two seeds and delta.
inline OfflineViews offline_gen(Endpoint& s1_to_s3, Endpoint& s2_to_s3, Endpoint& s3_in_s1,
                                Endpoint& s3_in_s2, Endpoint& s3_to_s2, Endpoint& s2_in_s3,
                                const Seed& seed1, const Seed& seed2, const Seed& seed12,
                                std::size_t n, std::size_t width,
                                const PrgFactory& prg = aes_prg()) {
  OfflineViews views;
  std::thread t1([&] {
    s1_to_s3.send(MsgType::SeedShare, std::vector<std::uint8_t>(seed1.bytes.begin(),
                                                                seed1.bytes.end()));
    auto b = expand_seed1(seed1, n, width, prg);
    views.s1 = PartyView{Role::S1, std::move(b.pi1), std::nullopt,
                         derive_permutation(seed12, n, prg), std::nullopt,
                         std::move(b.a2prime), std::move(b.b2), std::nullopt};
  });
  std::thread t2([&] {
    s2_to_s3.send(MsgType::SeedShare, std::vector<std::uint8_t>(seed2.bytes.begin(),
                                                                seed2.bytes.end()));
    auto b = expand_seed2(seed2, n, width, prg);
    auto delta_rows = bytes_to_rows(s2_in_s3.recv(MsgType::Delta).payload, width);
    views.s2 = PartyView{Role::S2, std::nullopt, std::move(b.pi2),
                         derive_permutation(seed12, n, prg), std::move(b.a1), std::nullopt,
                         std::nullopt, std::move(delta_rows)};
  });
  std::thread t3([&] {
    Seed r1, r2;
    const auto m1 = s3_in_s1.recv(MsgType::SeedShare);
    const auto m2 = s3_in_s2.recv(MsgType::SeedShare);
    if (m1.payload.size() != 16 || m2.payload.size() != 16)
      throw ProtocolError("bad seed payload");
    std::copy(m1.payload.begin(), m1.payload.end(), r1.bytes.begin());
    std::copy(m2.payload.begin(), m2.payload.end(), r2.bytes.begin());
    auto b1 = expand_seed1(r1, n, width, prg);
    auto b2 = expand_seed2(r2, n, width, prg);
    auto delta = compute_delta(b1.pi1, b2.pi2, b2.a1, b1.a2prime, b1.b2);
    s3_to_s2.send_fields(MsgType::Delta, [&] {
      std::vector<FieldElem> flat;
      for (const auto& r : delta)
        flat.insert(flat.end(), r.begin(), r.end());
      return flat;
    }());
    views.s3 = PartyView{Role::S3, std::move(b1.pi1), std::move(b2.pi2), std::nullopt,
                         std::move(b2.a1), std::move(b1.a2prime), std::move(b1.b2),
                         std::move(delta)};
  });
  t1.join();
  t2.join();
  t3.join();
  return views;
}

// --- the maliciously secure shuffle ----------------------------------------

struct ShuffleOptions {
  std::uint32_t l = kCompressedPayloadLen;  // MacEntry payload length
  bool check_z2 = true;                     // in-shuffle check for z2
  bool check_z1 = true;                     // in-shuffle check for z1
  bool post_check = true;                   // post-shuffle blind MAC check
  bool commit_exchange = true;              // hash f-shares before reveal
  // Row width override for check-free shuffles of plain vectors.
  std::optional<std::uint32_t> width_override;

  std::uint32_t width() const { return width_override ? *width_override : entry_width(l); }
  std::size_t triples_per_check(std::size_t n) const { return n * l + 1; }
};

/// Adversarial interception points; honest roles leave everything unset.
struct S1Hooks {
  std::function<void(std::vector<Row>&)> tamper_z1;
  std::function<void(std::vector<Row>&)> tamper_output;
  MacVerifyHooks mac;
};
struct S2Hooks {
  std::function<void(std::vector<Row>&)> tamper_z2;
  std::function<void(std::vector<Row>&)> tamper_output;
  std::function<void(std::vector<TripleShare>&, std::vector<TripleShare>&)> tamper_dealt_triples;
  MacVerifyHooks mac;
};
struct S3Hooks {
  std::function<void(std::vector<Row>&)> tamper_delta;
  std::function<void(std::vector<TripleShare>&, std::vector<TripleShare>&)> tamper_dealt_triples;
  MacVerifyHooks mac;
};

struct ShuffleResult {
  std::vector<Row> out_share;
  bool aborted = false;
  std::string abort_check;
};

namespace detail {

inline void send_seed(Endpoint& ep, const Seed& s) {
  ep.send(MsgType::SeedShare, std::vector<std::uint8_t>(s.bytes.begin(), s.bytes.end()));
}

inline Seed recv_seed(Endpoint& ep) {
  const auto m = ep.recv(MsgType::SeedShare);
  if (m.payload.size() != 16) throw ProtocolError("bad seed payload");
  Seed s;
  std::copy(m.payload.begin(), m.payload.end(), s.bytes.begin());
  return s;
}

inline void send_rows(Endpoint& ep, MsgType type, std::span<const Row> rows) {
  ep.send(type, rows_to_bytes(rows));
}

inline std::vector<Row> recv_rows(Endpoint& ep, MsgType type, std::size_t n,
                                  std::size_t width) {
  auto rows = bytes_to_rows(ep.recv(type).payload, width);
  if (rows.size() != n) throw ProtocolError("unexpected row count");
  return rows;
}

inline void send_triples(Endpoint& ep, std::span<const TripleShare> ts) {
  ep.send(MsgType::TripleShare, triples_to_bytes(ts));
}

inline TripleBatch recv_triples(Endpoint& ep, std::size_t expect) {
  auto ts = bytes_to_triples(ep.recv(MsgType::TripleShare).payload);
  if (ts.size() != expect) throw ProtocolError("unexpected triple count");
  return TripleBatch(std::move(ts));
}

/// Re-share exchange of the pairwise checks: discloses a fresh share of
/// `mine` to the peer and returns this side's share of the summed sharing.
inline std::vector<Row> fresh_pair_share(Duplex& peer, std::span<const Row> mine, Rng& rng,
                                         std::size_t n, std::size_t width) {
  auto disclose = rand_rows(rng, n, width);
  send_rows(peer.out, MsgType::ReShare, disclose);
  auto keep = sub_rows(mine, disclose);
  auto theirs = recv_rows(peer.in, MsgType::ReShare, n, width);
  return add_rows(keep, theirs);
}

}  // namespace detail

/// S1: sends seed12 and seed1, deals the z1-check triples, receives z2, runs
/// the z2 check with S3, sends z1, outputs b2, runs the post-shuffle check.
inline ShuffleResult run_shuffle_s1(Duplex& to_s2, Duplex& to_s3, std::vector<Row> x_share,
                                    const Seed& seed1, const Seed& seed12,
                                    const ShuffleOptions& opts, Rng& rng,
                                    const S1Hooks& hooks = {},
                                    const PrgFactory& prg = aes_prg()) {
  const std::size_t n = x_share.size();
  const std::size_t width = opts.width();
  try {
    to_s2.out.channel().set_phase(Phase::Offline);
    to_s3.out.channel().set_phase(Phase::Offline);
    detail::send_seed(to_s2.out, seed12);
    detail::send_seed(to_s3.out, seed1);
    auto bundle = expand_seed1(seed1, n, width, prg);
    const auto pi12 = derive_permutation(seed12, n, prg);
    TripleBatch z1_triples;
    if (opts.check_z1) {  // S1 deals for the S2/S3 check
      auto [t2, t3] = deal_triples(opts.triples_per_check(n), rng);
      detail::send_triples(to_s2.out, t2);
      detail::send_triples(to_s3.out, t3);
    }
    TripleBatch post_triples = detail::recv_triples(to_s3.in, opts.triples_per_check(n));
    TripleBatch z2_triples;
    if (opts.check_z2) z2_triples = detail::recv_triples(to_s2.in, opts.triples_per_check(n));

    to_s2.out.channel().set_phase(Phase::Online);
    to_s3.out.channel().set_phase(Phase::Online);
    const auto x_hat = pi12.apply(x_share);
    const auto z2 = detail::recv_rows(to_s2.in, MsgType::Z2, n, width);
    const auto x_hat_minus_a1 = add_rows(z2, x_hat);
    if (opts.check_z2) {
      // Fig. 2: fresh sharing of x_hat with S3, then blind verification
      auto my_share = detail::fresh_pair_share(to_s3, x_hat_minus_a1, rng, n, width);
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.z2";
      mv.check_name = "check-z2";
      blind_mac_verify(to_s3, /*adds_ef=*/true, my_share, opts.l, z2_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    auto z1 = sub_rows(bundle.pi1.apply(x_hat_minus_a1), bundle.a2prime);
    if (hooks.tamper_z1) hooks.tamper_z1(z1);
    detail::send_rows(to_s2.out, MsgType::Z1, z1);
    auto out = std::move(bundle.b2);
    if (hooks.tamper_output) hooks.tamper_output(out);
    if (opts.post_check) {
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.post";
      mv.check_name = "post-shuffle";
      blind_mac_verify(to_s2, /*adds_ef=*/true, out, opts.l, post_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    return {std::move(out), false, ""};
  } catch (const AbortError& e) {
    to_s2.out.send_abort(e.check());
    to_s3.out.send_abort(e.check());
    return {{}, true, e.check()};
  } catch (const ProtocolError& e) {
    to_s2.out.send_abort("protocol-error");
    to_s3.out.send_abort("protocol-error");
    return {{}, true, std::string("protocol-error: ") + e.what()};
  }
}

/// S2: sends seed2, deals the z2-check triples, sends z2, runs the z1 check
/// with S3, outputs pi2(z1) + delta, runs the post-shuffle check.
inline ShuffleResult run_shuffle_s2(Duplex& to_s1, Duplex& to_s3, std::vector<Row> x_share,
                                    const Seed& seed2, const ShuffleOptions& opts, Rng& rng,
                                    const S2Hooks& hooks = {},
                                    const PrgFactory& prg = aes_prg()) {
  const std::size_t n = x_share.size();
  const std::size_t width = opts.width();
  try {
    to_s1.out.channel().set_phase(Phase::Offline);
    to_s3.out.channel().set_phase(Phase::Offline);
    const Seed seed12 = detail::recv_seed(to_s1.in);
    detail::send_seed(to_s3.out, seed2);
    auto bundle = expand_seed2(seed2, n, width, prg);
    const auto pi12 = derive_permutation(seed12, n, prg);
    TripleBatch z2_triples;
    if (opts.check_z2) {  // S2 deals for the S1/S3 check
      auto [t1, t3] = deal_triples(opts.triples_per_check(n), rng);
      if (hooks.tamper_dealt_triples) hooks.tamper_dealt_triples(t1, t3);
      detail::send_triples(to_s1.out, t1);
      detail::send_triples(to_s3.out, t3);
    }
    TripleBatch z1_triples;
    if (opts.check_z1) z1_triples = detail::recv_triples(to_s1.in, opts.triples_per_check(n));
    const auto delta = detail::recv_rows(to_s3.in, MsgType::Delta, n, width);
    TripleBatch post_triples = detail::recv_triples(to_s3.in, opts.triples_per_check(n));

    to_s1.out.channel().set_phase(Phase::Online);
    to_s3.out.channel().set_phase(Phase::Online);
    const auto x_hat = pi12.apply(x_share);
    auto z2 = sub_rows(x_hat, bundle.a1);
    if (hooks.tamper_z2) hooks.tamper_z2(z2);
    detail::send_rows(to_s1.out, MsgType::Z2, z2);
    const auto z1 = detail::recv_rows(to_s1.in, MsgType::Z1, n, width);
    const auto pi2_z1 = bundle.pi2.apply(z1);
    if (opts.check_z1) {
      // Fig. 3: fresh sharing of pi2(pi1(x_hat)) with S3
      auto my_share = detail::fresh_pair_share(to_s3, pi2_z1, rng, n, width);
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.z1";
      mv.check_name = "check-z1";
      blind_mac_verify(to_s3, /*adds_ef=*/true, my_share, opts.l, z1_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    auto out = add_rows(pi2_z1, delta);
    if (hooks.tamper_output) hooks.tamper_output(out);
    if (opts.post_check) {
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.post";
      mv.check_name = "post-shuffle";
      blind_mac_verify(to_s1, /*adds_ef=*/false, out, opts.l, post_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    return {std::move(out), false, ""};
  } catch (const AbortError& e) {
    to_s1.out.send_abort(e.check());
    to_s3.out.send_abort(e.check());
    return {{}, true, e.check()};
  } catch (const ProtocolError& e) {
    to_s1.out.send_abort("protocol-error");
    to_s3.out.send_abort("protocol-error");
    return {{}, true, std::string("protocol-error: ") + e.what()};
  }
}

/// S3: expands both seeds, sends delta, deals the post-shuffle triples, then
/// assists the two in-shuffle checks. Holds no data share.
inline ShuffleResult run_shuffle_s3(Duplex& to_s1, Duplex& to_s2, std::size_t n,
                                    const ShuffleOptions& opts, Rng& rng,
                                    const S3Hooks& hooks = {},
                                    const PrgFactory& prg = aes_prg()) {
  const std::size_t width = opts.width();
  try {
    to_s1.out.channel().set_phase(Phase::Offline);
    to_s2.out.channel().set_phase(Phase::Offline);
    const Seed seed1 = detail::recv_seed(to_s1.in);
    const Seed seed2 = detail::recv_seed(to_s2.in);
    auto b1 = expand_seed1(seed1, n, width, prg);
    auto b2 = expand_seed2(seed2, n, width, prg);
    auto delta = compute_delta(b1.pi1, b2.pi2, b2.a1, b1.a2prime, b1.b2);
    if (hooks.tamper_delta) hooks.tamper_delta(delta);
    detail::send_rows(to_s2.out, MsgType::Delta, delta);
    {
      auto [t1, t2] = deal_triples(opts.triples_per_check(n), rng);
      if (hooks.tamper_dealt_triples) hooks.tamper_dealt_triples(t1, t2);
      detail::send_triples(to_s1.out, t1);
      detail::send_triples(to_s2.out, t2);
    }
    TripleBatch z2_triples, z1_triples;
    if (opts.check_z2) z2_triples = detail::recv_triples(to_s2.in, opts.triples_per_check(n));
    if (opts.check_z1) z1_triples = detail::recv_triples(to_s1.in, opts.triples_per_check(n));

    to_s1.out.channel().set_phase(Phase::Online);
    to_s2.out.channel().set_phase(Phase::Online);
    if (opts.check_z2) {
      auto my_share = detail::fresh_pair_share(to_s1, b2.a1, rng, n, width);
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.z2";
      mv.check_name = "check-z2";
      blind_mac_verify(to_s1, /*adds_ef=*/false, my_share, opts.l, z2_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    if (opts.check_z1) {
      const auto mine = b2.pi2.apply(add_rows(b1.pi1.apply(b2.a1), b1.a2prime));
      auto my_share = detail::fresh_pair_share(to_s2, mine, rng, n, width);
      MacVerifyOptions mv;
      mv.commit_exchange = opts.commit_exchange;
      mv.context = "camel.f.z1";
      mv.check_name = "check-z1";
      blind_mac_verify(to_s2, /*adds_ef=*/false, my_share, opts.l, z1_triples, rng, mv,
                       hooks.mac.forge_reveal || hooks.mac.tamper_product_sum ? &hooks.mac
                                                                              : nullptr);
    }
    return {{}, false, ""};
  } catch (const AbortError& e) {
    to_s1.out.send_abort(e.check());
    to_s2.out.send_abort(e.check());
    return {{}, true, e.check()};
  } catch (const ProtocolError& e) {
    to_s1.out.send_abort("protocol-error");
    to_s2.out.send_abort("protocol-error");
    return {{}, true, std::string("protocol-error: ") + e.what()};
  }
}

// --- convenience drivers ----------------------------------------------------

/// The six directed channels of a three-server session.
struct ServerMesh {
  std::unique_ptr<Channel> c12, c21, c13, c31, c23, c32;

  static ServerMesh make(TransportKind kind = TransportKind::InProcess) {
    ServerMesh m;
    m.c12 = make_channel(kind, "s1->s2");
    m.c21 = make_channel(kind, "s2->s1");
    m.c13 = make_channel(kind, "s1->s3");
    m.c31 = make_channel(kind, "s3->s1");
    m.c23 = make_channel(kind, "s2->s3");
    m.c32 = make_channel(kind, "s3->s2");
    return m;
  }
  std::vector<Channel*> all() const {
    return {c12.get(), c21.get(), c13.get(), c31.get(), c23.get(), c32.get()};
  }
  void enable_taps() {
    for (auto* c : all()) c->enable_tap();
  }
};

struct VeriShuffleSeeds {
  Seed seed1, seed2, seed12;
};

struct VeriShuffleOutcome {
  ShuffleResult s1, s2, s3;
  bool aborted() const { return s1.aborted || s2.aborted || s3.aborted; }
  std::string abort_check() const {
    if (s1.aborted) return s1.abort_check;
    if (s2.aborted) return s2.abort_check;
    return s3.abort_check;
  }
};

struct VeriShuffleHooks {
  S1Hooks s1;
  S2Hooks s2;
  S3Hooks s3;
};

/// Runs one complete VeriShuffle round over a mesh, one thread per server.
inline VeriShuffleOutcome veri_shuffle(ServerMesh& mesh, std::vector<Row> x1,
                                       std::vector<Row> x2, const VeriShuffleSeeds& seeds,
                                       const ShuffleOptions& opts, u64 rng_seed,
                                       const VeriShuffleHooks& hooks = {},
                                       const PrgFactory& prg = aes_prg()) {
  VeriShuffleOutcome out;
  const std::size_t n = x2.size();
  Rng rng1(rng_seed * 6364136223846793005ULL + 1);
  Rng rng2(rng_seed * 6364136223846793005ULL + 2);
  Rng rng3(rng_seed * 6364136223846793005ULL + 3);
  Duplex d12(mesh.c12.get(), mesh.c21.get());
  Duplex d13(mesh.c13.get(), mesh.c31.get());
  Duplex d21(mesh.c21.get(), mesh.c12.get());
  Duplex d23(mesh.c23.get(), mesh.c32.get());
  Duplex d31(mesh.c31.get(), mesh.c13.get());
  Duplex d32(mesh.c32.get(), mesh.c23.get());
  std::thread t1([&] {
    out.s1 = run_shuffle_s1(d12, d13, std::move(x1), seeds.seed1, seeds.seed12, opts, rng1,
                            hooks.s1, prg);
  });
  std::thread t2([&] {
    out.s2 = run_shuffle_s2(d21, d23, std::move(x2), seeds.seed2, opts, rng2, hooks.s2, prg);
  });
  std::thread t3([&] { out.s3 = run_shuffle_s3(d31, d32, n, opts, rng3, hooks.s3, prg); });
  t1.join();
  t2.join();
  t3.join();
  return out;
}

/// Semi-honest oblivious shuffle: the same message flow with every integrity
/// check disabled. Works over rows of any fixed width.
inline VeriShuffleOutcome online_shuffle(ServerMesh& mesh, std::vector<Row> x1,
                                         std::vector<Row> x2, const VeriShuffleSeeds& seeds,
                                         std::uint32_t row_width, u64 rng_seed,
                                         const PrgFactory& prg = aes_prg()) {
  ShuffleOptions opts;
  opts.width_override = row_width;
  opts.check_z2 = opts.check_z1 = opts.post_check = false;
  return veri_shuffle(mesh, std::move(x1), std::move(x2), seeds, opts, rng_seed, {}, prg);
}

}  // namespace camel
