#include <gtest/gtest.h>

#include <thread>

#include "camel/mac.hpp"

namespace camel {
namespace {

struct VerifyRig {
  InProcessChannel c12{"s1->s2"};
  InProcessChannel c21{"s2->s1"};
  Duplex side1{&c12, &c21};
  Duplex side2{&c21, &c12};
};

struct HonestBatch {
  std::vector<std::vector<FieldElem>> rows1, rows2;
  std::vector<CompressedGrad> grads;
};

HonestBatch make_batch(std::size_t n, Rng& rng) {
  HonestBatch b;
  LdpParams p;
  p.epsilon0 = 1.0;
  p.L = 1.0;
  p.d = 4;
  for (std::size_t i = 0; i < n; ++i) {
    const Gradient x{0.1, -0.2, 0.3, 0.05};
    const auto r = noisy_grad_cmpr(x, p, rng);
    const auto e = client_package(r, rng);
    b.rows1.push_back(e.p1.to_row());
    b.rows2.push_back(e.p2.to_row());
    b.grads.push_back(r);
  }
  return b;
}

// Runs verification on both sides; returns the failing check name seen by the
// honest side(s), or empty when both accept.
std::string run_verify(std::span<const std::vector<FieldElem>> rows1,
                       std::span<const std::vector<FieldElem>> rows2, Rng& rng,
                       const MacVerifyOptions& opt = {},
                       const MacVerifyHooks* hooks1 = nullptr,
                       const MacVerifyHooks* hooks2 = nullptr) {
  const std::size_t need = rows1.size() * kCompressedPayloadLen + 1;
  auto [t1, t2] = deal_triples(need, rng);
  TripleBatch b1(std::move(t1)), b2(std::move(t2));
  Rng rng1(rng()), rng2(rng());
  VerifyRig rig;
  std::string fail1, fail2;
  std::thread th1([&] {
    try {
      blind_mac_verify(rig.side1, true, rows1, kCompressedPayloadLen, b1, rng1, opt, hooks1);
    } catch (const AbortError& e) {
      fail1 = e.check();
      rig.side1.out.send_abort(e.check());
    }
  });
  std::thread th2([&] {
    try {
      blind_mac_verify(rig.side2, false, rows2, kCompressedPayloadLen, b2, rng2, opt, hooks2);
    } catch (const AbortError& e) {
      fail2 = e.check();
      rig.side2.out.send_abort(e.check());
    }
  });
  th1.join();
  th2.join();
  return !fail1.empty() ? fail1 : fail2;
}

TEST(KeyExpand, DeterministicLengthAndRange) {
  Rng rng(31);
  const Seed m = Seed::random(rng);
  const auto k1 = key_expand(m, 2);
  EXPECT_EQ(k1, key_expand(m, 2));
  EXPECT_EQ(k1.size(), 2u);
  for (const auto& k : k1) EXPECT_LT(k.raw(), FieldElem::kModulus);
  for (int i = 0; i < 100; ++i) {
    const Seed a = Seed::random(rng), b = Seed::random(rng);
    if (a == b) continue;
    EXPECT_NE(key_expand(a, 4), key_expand(b, 4));
  }
}

TEST(MacTag, ClosedForms) {
  const std::vector<FieldElem> payload{FieldElem(3), FieldElem(5)};
  EXPECT_EQ(mac_tag(payload, std::vector<FieldElem>{FieldElem(1), FieldElem(1)}),
            FieldElem(8));
  EXPECT_EQ(mac_tag(payload, std::vector<FieldElem>{FieldElem(0), FieldElem(0)}),
            FieldElem(0));
  EXPECT_EQ(mac_tag(payload, std::vector<FieldElem>{FieldElem(2), FieldElem(4)}),
            FieldElem(26));
  EXPECT_THROW(mac_tag(payload, std::vector<FieldElem>{FieldElem(1)}), UsageError);
}

TEST(ClientPackage, SharesReconstructAndDecode) {
  Rng rng(32);
  for (int i = 0; i < 50; ++i) {
    CompressedGrad r;
    r.sgn = (i % 2 == 0) ? 1 : -1;
    r.seed = Seed::random(rng);
    const auto e = client_package(r, rng);
    const auto payload = reconstruct_vec(e.p1.payload, e.p2.payload);
    EXPECT_EQ(decode_compressed_payload(payload), r);
    const auto key = add_vec(key_expand(e.p1.key_seed, 2), key_expand(e.p2.key_seed, 2));
    EXPECT_EQ(e.p1.tag + e.p2.tag, mac_tag(payload, key));
    // wire form: 16-byte tag share + 2x16-byte payload shares + 16-byte seed
    const auto wire = e.p1.to_wire();
    EXPECT_EQ(wire.size(), 64u);
    const auto back = SharedMacEntry::PartyShare::from_wire(wire, 2);
    EXPECT_EQ(back.tag, e.p1.tag);
    EXPECT_EQ(back.payload, e.p1.payload);
    EXPECT_EQ(back.key_seed, e.p1.key_seed);
  }
}

TEST(ClientPackage, ShareVectorsLookUniform) {
  // low-bit balance across single-party share vectors
  Rng rng(33);
  CompressedGrad r;
  r.sgn = 1;
  r.seed = Seed::random(rng);
  std::size_t ones = 0, total = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto e = client_package(r, rng);
    for (const auto& x : e.p1.payload) {
      ones += static_cast<std::size_t>(x.raw() & 1);
      ++total;
    }
    ones += static_cast<std::size_t>(e.p1.tag.raw() & 1);
    ++total;
  }
  const double expect = total / 2.0;
  const double sigma = std::sqrt(total * 0.25);
  EXPECT_LE(std::abs(static_cast<double>(ones) - expect), 3 * sigma);
}

TEST(BlindVerify, HonestBatchesOfAnySize) {
  Rng rng(34);
  for (const std::size_t n : {1u, 8u, 33u}) {
    auto b = make_batch(n, rng);
    EXPECT_EQ(run_verify(b.rows1, b.rows2, rng), "");
  }
}

TEST(BlindVerify, SingleElementTampersAreDetected) {
  Rng rng(35);
  const int trials = 1000;
  int aborts = 0;
  for (int t = 0; t < trials; ++t) {
    auto b = make_batch(4, rng);
    const std::size_t row = rand_index(rng, 4);
    // tamper target: payload columns 1..2, tag column 0, or the key column
    // paired with the seed payload (nonzero w.h.p.); a key tamper at a zero
    // payload coordinate is invisible to the MAC and also harmless
    const std::size_t choice = rand_index(rng, 4);
    const std::size_t col = choice == 0 ? 0 : (choice == 3 ? 4 : choice);
    b.rows1[row][col] += FieldElem(1) + FieldElem(rand_field(rng));
    if (run_verify(b.rows1, b.rows2, rng) == "mac-f-nonzero") ++aborts;
  }
  EXPECT_EQ(aborts, trials);
}

TEST(BlindVerify, ForgedFShareCaughtByCommitment) {
  Rng rng(36);
  auto b = make_batch(4, rng);
  // corrupt side 2 tampers its product sum, then tries to pass by revealing
  // the negation of the honest share
  MacVerifyHooks hooks;
  hooks.tamper_product_sum = [](FieldElem s) { return s + FieldElem(7); };
  hooks.forge_reveal = [](FieldElem, FieldElem theirs) { return theirs.negate(); };
  EXPECT_EQ(run_verify(b.rows1, b.rows2, rng, {}, nullptr, &hooks), "f-hash-mismatch");
}

TEST(BlindVerify, AblationWithoutCommitsFalselyAccepts) {
  Rng rng(37);
  auto b = make_batch(4, rng);
  b.rows1[1][1] += FieldElem(99);  // tampered data that must not verify
  MacVerifyHooks hooks;
  hooks.forge_reveal = [](FieldElem, FieldElem theirs) { return theirs.negate(); };
  MacVerifyOptions opt;
  opt.commit_exchange = false;
  // demonstrates the necessity of the hash exchange
  EXPECT_EQ(run_verify(b.rows1, b.rows2, rng, opt, nullptr, &hooks), "");
}

TEST(BlindVerify, TranscriptRevealsNoShares) {
  Rng rng(38);
  auto b = make_batch(6, rng);
  const std::size_t need = b.rows1.size() * kCompressedPayloadLen + 1;
  auto [t1, t2] = deal_triples(need, rng);
  TripleBatch bt1(std::move(t1)), bt2(std::move(t2));
  VerifyRig rig;
  rig.c12.enable_tap();
  rig.c21.enable_tap();
  Rng rng1(rng()), rng2(rng());
  std::thread th1([&] { blind_mac_verify(rig.side1, true, b.rows1, 2, bt1, rng1); });
  std::thread th2([&] { blind_mac_verify(rig.side2, false, b.rows2, 2, bt2, rng2); });
  th1.join();
  th2.join();
  auto contains = [](const std::vector<std::vector<std::uint8_t>>& frames,
                     std::span<const std::uint8_t> pat) {
    for (const auto& f : frames)
      if (std::search(f.begin(), f.end(), pat.begin(), pat.end()) != f.end()) return true;
    return false;
  };
  for (const auto& rows : {b.rows1, b.rows2}) {
    for (const auto& row : rows) {
      for (std::size_t col = 1; col < row.size(); ++col) {  // payload and key shares
        std::array<std::uint8_t, 16> pat;
        row[col].write_le(pat);
        EXPECT_FALSE(contains(*rig.c12.tap(), pat));
        EXPECT_FALSE(contains(*rig.c21.tap(), pat));
      }
    }
  }
}

}  // namespace
}  // namespace camel
