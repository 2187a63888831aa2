#pragma once

#include <span>
#include <utility>
#include <vector>

#include "camel/errors.hpp"
#include "camel/field.hpp"
#include "camel/rand.hpp"
#include "camel/sharing.hpp"
#include "camel/transport.hpp"

namespace camel {

/// One party's additive share of a multiplication triple (a, b, c = a*b).
struct TripleShare {
  FieldElem a, b, c;
  bool used = false;
};

/// Dealer-side generation: returns the two parties' share vectors.
inline std::pair<std::vector<TripleShare>, std::vector<TripleShare>> deal_triples(
    std::size_t n, Rng& rng) {
  std::vector<TripleShare> t1(n), t2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FieldElem a = rand_field(rng), b = rand_field(rng);
    const FieldElem c = a * b;
    t1[i].a = rand_field(rng);
    t2[i].a = a - t1[i].a;
    t1[i].b = rand_field(rng);
    t2[i].b = b - t1[i].b;
    t1[i].c = rand_field(rng);
    t2[i].c = c - t1[i].c;
  }
  return {std::move(t1), std::move(t2)};
}

inline std::vector<std::uint8_t> triples_to_bytes(std::span<const TripleShare> ts) {
  std::vector<std::uint8_t> out;
  out.reserve(ts.size() * 3 * kFieldBytes);
  for (const auto& t : ts) {
    append_field(out, t.a);
    append_field(out, t.b);
    append_field(out, t.c);
  }
  return out;
}

inline std::vector<TripleShare> bytes_to_triples(std::span<const std::uint8_t> in) {
  if (in.size() % (3 * kFieldBytes) != 0) throw UsageError("bad triple payload length");
  std::vector<TripleShare> out(in.size() / (3 * kFieldBytes));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].a = read_field(in, (3 * i + 0) * kFieldBytes);
    out[i].b = read_field(in, (3 * i + 1) * kFieldBytes);
    out[i].c = read_field(in, (3 * i + 2) * kFieldBytes);
  }
  return out;
}

/// Sequential one-time consumption of a dealt batch.
class TripleBatch {
 public:
  TripleBatch() = default;
  explicit TripleBatch(std::vector<TripleShare> ts) : ts_(std::move(ts)) {}

  /// Hands out each dealt triple exactly once; consumers mark it used.
  TripleShare& take() {
    if (next_ >= ts_.size()) throw ProtocolError("beaver triples exhausted");
    TripleShare& t = ts_[next_++];
    if (t.used) throw ProtocolError("beaver triple reuse");
    return t;
  }
  std::size_t remaining() const { return ts_.size() - next_; }

 private:
  std::vector<TripleShare> ts_;
  std::size_t next_ = 0;
};

/// Batched two-party Beaver multiplication. Both parties call this with
/// their share vectors; one round exchanges all (e, f) openings, then each
/// side computes its product share. `adds_ef` must be true on exactly one
/// side (it contributes the public e*f term).
inline std::vector<FieldElem> beaver_mul_batch(Duplex& peer, std::span<const FieldElem> x,
                                               std::span<const FieldElem> y,
                                               TripleBatch& triples, bool adds_ef) {
  if (x.size() != y.size()) throw UsageError("beaver_mul_batch: length mismatch");
  const std::size_t n = x.size();
  std::vector<const TripleShare*> used(n);
  std::vector<FieldElem> open(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    TripleShare& t = triples.take();
    t.used = true;
    used[i] = &t;
    open[i] = x[i] - t.a;        // e share
    open[n + i] = y[i] - t.b;    // f share
  }
  peer.out.send_fields(MsgType::MulOpen, open);
  const auto theirs = peer.in.recv_fields(MsgType::MulOpen);
  if (theirs.size() != 2 * n) throw ProtocolError("beaver_mul_batch: bad opening size");
  std::vector<FieldElem> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FieldElem e = open[i] + theirs[i];
    const FieldElem f = open[n + i] + theirs[n + i];
    z[i] = f * used[i]->a + e * used[i]->b + used[i]->c;
    if (adds_ef) z[i] += e * f;
  }
  return z;
}

/// Single secret-shared multiplication consuming one explicit triple.
/// Throws ProtocolError if the triple was already used.
inline FieldElem beaver_mul(Duplex& peer, const FieldElem& x, const FieldElem& y,
                            TripleShare& triple, bool adds_ef) {
  if (triple.used) throw ProtocolError("beaver triple reuse");
  triple.used = true;
  const FieldElem e_share = x - triple.a;
  const FieldElem f_share = y - triple.b;
  peer.out.send_fields(MsgType::MulOpen, std::array<FieldElem, 2>{e_share, f_share});
  const auto theirs = peer.in.recv_fields(MsgType::MulOpen);
  if (theirs.size() != 2) throw ProtocolError("beaver_mul: bad opening size");
  const FieldElem e = e_share + theirs[0];
  const FieldElem f = f_share + theirs[1];
  FieldElem z = f * triple.a + e * triple.b + triple.c;
  if (adds_ef) z += e * f;
  return z;
}

}  // namespace camel
