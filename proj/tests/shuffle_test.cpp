#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "camel/shuffle.hpp"

namespace camel {
namespace {

struct HonestInput {
  std::vector<Row> rows1, rows2;
};

HonestInput make_entries(std::size_t n, Rng& rng) {
  HonestInput in;
  for (std::size_t i = 0; i < n; ++i) {
    CompressedGrad r;
    r.sgn = rand_bernoulli(rng, 0.5) ? 1 : -1;
    r.seed = Seed::random(rng);
    const auto e = client_package(r, rng);
    in.rows1.push_back(e.p1.to_row());
    in.rows2.push_back(e.p2.to_row());
  }
  return in;
}

VeriShuffleSeeds make_seeds(Rng& rng) {
  return {Seed::random(rng), Seed::random(rng), Seed::random(rng)};
}

std::vector<Row> plain_rows(const HonestInput& in) {
  std::vector<Row> out(in.rows1.size());
  for (std::size_t i = 0; i < in.rows1.size(); ++i)
    out[i] = add_vec(in.rows1[i], in.rows2[i]);
  return out;
}

std::vector<Row> oracle_shuffle(const VeriShuffleSeeds& seeds, std::vector<Row> x,
                                std::size_t width) {
  const auto c = derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, x.size(), width);
  return c.pi2.apply(c.pi1.apply(c.pi12.apply(x)));
}

std::string row_key(const Row& r) {
  std::string s;
  for (const auto& x : r) {
    std::array<std::uint8_t, 16> b;
    x.write_le(b);
    s.append(reinterpret_cast<const char*>(b.data()), b.size());
  }
  return s;
}

bool frames_contain(const std::vector<std::vector<std::uint8_t>>& frames,
                    std::span<const std::uint8_t> pat) {
  for (const auto& f : frames)
    if (std::search(f.begin(), f.end(), pat.begin(), pat.end()) != f.end()) return true;
  return false;
}

TEST(OfflineGen, IdentityAtN1AndDeltaOracle) {
  Rng rng(41);
  const auto seeds = make_seeds(rng);
  {
    const auto c = derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, 1, 5);
    EXPECT_EQ(c.pi1.mapping(), Permutation::identity(1).mapping());
    EXPECT_EQ(c.pi2.mapping(), Permutation::identity(1).mapping());
    EXPECT_EQ(c.pi12.mapping(), Permutation::identity(1).mapping());
  }
  const std::size_t n = 6, w = 5;
  auto mesh = ServerMesh::make();
  Endpoint s1_to_s3(mesh.c13.get()), s2_to_s3(mesh.c23.get());
  Endpoint s3_in_s1(mesh.c13.get()), s3_in_s2(mesh.c23.get());
  Endpoint s3_to_s2(mesh.c32.get()), s2_in_s3(mesh.c32.get());
  const auto views = offline_gen(s1_to_s3, s2_to_s3, s3_in_s1, s3_in_s2, s3_to_s2, s2_in_s3,
                                 seeds.seed1, seeds.seed2, seeds.seed12, n, w);
  // delta received by S2 matches the plaintext oracle recomputation
  const auto c = derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, n, w);
  ASSERT_TRUE(views.s2.delta.has_value());
  EXPECT_EQ(*views.s2.delta, c.delta);
  // knowledge sets: S1 has no bits of pi2, S2 none of pi1, S3 none of pi12
  EXPECT_FALSE(views.s1.pi2.has_value());
  EXPECT_FALSE(views.s1.a1.has_value());
  EXPECT_FALSE(views.s2.pi1.has_value());
  EXPECT_FALSE(views.s3.pi12.has_value());
  EXPECT_TRUE(views.s1.pi1 && views.s1.pi12 && views.s1.a2prime && views.s1.b2);
  EXPECT_TRUE(views.s2.pi2 && views.s2.pi12 && views.s2.a1);
  EXPECT_TRUE(views.s3.pi1 && views.s3.pi2 && views.s3.a1 && views.s3.a2prime &&
              views.s3.b2 && views.s3.delta);
  // offline bytes: two seed frames plus the delta frame
  EXPECT_EQ(mesh.c13->total().bytes, kFrameHeaderBytes + 16);
  EXPECT_EQ(mesh.c23->total().bytes, kFrameHeaderBytes + 16);
  EXPECT_EQ(mesh.c32->total().bytes, kFrameHeaderBytes + n * w * kFieldBytes);
  EXPECT_EQ(mesh.c12->total().bytes, 0u);
}

TEST(OnlineShuffle, ReconstructsSingleElement) {
  Rng rng(42);
  const auto seeds = make_seeds(rng);
  const std::vector<Row> x{{rand_field(rng)}};
  auto [x1, x2] = share_vec(x[0], rng);
  auto mesh = ServerMesh::make();
  const auto out = online_shuffle(mesh, {Row{x1[0]}}, {Row{x2[0]}}, seeds, 1, 7);
  ASSERT_FALSE(out.aborted());
  EXPECT_EQ(out.s1.out_share[0][0] + out.s2.out_share[0][0], x[0][0]);
}

TEST(OnlineShuffle, MatchesComposedPermutationOracle) {
  Rng rng(43);
  for (const std::size_t n : {3u, 16u}) {
    const auto seeds = make_seeds(rng);
    std::vector<Row> x(n), x1(n), x2(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rand_field_vec(rng, 1);
      x1[i] = rand_field_vec(rng, 1);
      x2[i] = sub_vec(x[i], x1[i]);
    }
    auto mesh = ServerMesh::make();
    const auto out = online_shuffle(mesh, x1, x2, seeds, 1, 11);
    ASSERT_FALSE(out.aborted());
    const auto got = add_rows(out.s1.out_share, out.s2.out_share);
    EXPECT_EQ(got, oracle_shuffle(seeds, x, 1));
    // multiset preservation
    std::multiset<std::string> a, b;
    for (const auto& r : x) a.insert(row_key(r));
    for (const auto& r : got) b.insert(row_key(r));
    EXPECT_EQ(a, b);
  }
}

TEST(VeriShuffle, HonestRunsMatchOracleAcrossSizes) {
  Rng rng(44);
  for (const std::size_t n : {1u, 2u, 3u, 8u, 64u}) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto seeds = make_seeds(rng);
      auto in = make_entries(n, rng);
      const auto plain = plain_rows(in);
      auto mesh = ServerMesh::make();
      const auto out =
          veri_shuffle(mesh, in.rows1, in.rows2, seeds, ShuffleOptions{}, rng());
      ASSERT_FALSE(out.aborted()) << "n=" << n << " check=" << out.abort_check();
      EXPECT_EQ(add_rows(out.s1.out_share, out.s2.out_share),
                oracle_shuffle(seeds, plain, 5));
    }
  }
}

TEST(VeriShuffle, EachCheckTriggersOnTargetedTamper) {
  Rng rng(45);
  const std::size_t n = 8;
  {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s2.tamper_z2 = [](std::vector<Row>& z) { z[3][1] += FieldElem(1); };
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("check-z2/", 0), 0u) << out.abort_check();
  }
  {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s1.tamper_z1 = [](std::vector<Row>& z) { z[5][2] += FieldElem(9); };
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("check-z1/", 0), 0u) << out.abort_check();
  }
  {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s3.tamper_delta = [](std::vector<Row>& d) { d[0][0] += FieldElem(5); };
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("post-shuffle/", 0), 0u) << out.abort_check();
  }
}

TEST(VeriShuffle, RandomizedFaultInjection) {
  Rng rng(46);
  const std::size_t n = 8;
  const int trials = 200;
  int aborts = 0;
  for (int t = 0; t < trials; ++t) {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    const std::size_t row = rand_index(rng, n);
    // tag and payload columns; a key-share tamper at a zero payload
    // coordinate is invisible to the MAC and leaves the data intact, so key
    // columns are exercised separately (mac_test) at the nonzero seed slot
    const std::size_t col = rand_index(rng, 3);
    const FieldElem delta = FieldElem(1) + rand_field(rng);
    switch (rand_index(rng, 5)) {
      case 0:
        hooks.s2.tamper_z2 = [=](std::vector<Row>& z) { z[row][col] += delta; };
        break;
      case 1:
        hooks.s1.tamper_z1 = [=](std::vector<Row>& z) { z[row][col] += delta; };
        break;
      case 2:
        hooks.s3.tamper_delta = [=](std::vector<Row>& d) { d[row][col] += delta; };
        break;
      case 3:
        hooks.s1.tamper_output = [=](std::vector<Row>& o) { o[row][col] += delta; };
        break;
      default:
        hooks.s2.tamper_output = [=](std::vector<Row>& o) { o[row][col] += delta; };
        break;
    }
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    if (out.aborted()) ++aborts;
  }
  EXPECT_EQ(aborts, trials);
}

TEST(VeriShuffle, MalformedTripleAbortsButNeverFalselyAccepts) {
  Rng rng(47);
  const std::size_t n = 4;
  // S3 deals a bad post-check triple over honest data: must abort
  {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s3.tamper_dealt_triples = [](std::vector<TripleShare>& t1,
                                       std::vector<TripleShare>&) {
      t1[2].c += FieldElem(1);
    };
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("post-shuffle/", 0), 0u);
  }
  // S2 deals a bad triple for the z2 check it is excluded from: abort-only
  {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s2.tamper_dealt_triples = [](std::vector<TripleShare>& t1,
                                       std::vector<TripleShare>&) {
      t1[0].a += FieldElem(3);
    };
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng(), hooks);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("check-z2/", 0), 0u);
  }
}

TEST(VeriShuffle, SelectiveFailureDefenseAndBaselineVulnerability) {
  Rng rng(48);
  const std::size_t n = 16;
  const std::uint32_t q = 5, col = 1;
  const FieldElem err(1234567);
  const auto seeds = make_seeds(rng);
  const auto c = derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, n, 5);
  // true landing position of an error injected at x-hat index q
  const std::uint32_t p_true = c.pi2.position_of(c.pi1.position_of(q));

  auto attack = [&](bool full_defense, std::uint32_t guess) {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s2.tamper_z2 = [&](std::vector<Row>& z) { z[q][col] += err; };
    hooks.s2.tamper_output = [&, guess](std::vector<Row>& o) { o[guess][col] -= err; };
    ShuffleOptions opts;
    opts.check_z2 = opts.check_z1 = full_defense;
    auto mesh = ServerMesh::make();
    return veri_shuffle(mesh, in.rows1, in.rows2, seeds, opts, rng(), hooks);
  };

  // full defense detects the tamper before the cancellation can apply
  for (const std::uint32_t guess :
       {p_true, static_cast<std::uint32_t>((p_true + 1) % n)}) {
    const auto out = attack(true, guess);
    EXPECT_TRUE(out.aborted());
    EXPECT_EQ(out.abort_check().rfind("check-z2/", 0), 0u);
  }
  // post-shuffle-only: escapes exactly when the guess hits pi(q)
  EXPECT_FALSE(attack(false, p_true).aborted());
  EXPECT_TRUE(attack(false, (p_true + 1) % n).aborted());

  // symmetric attack by S1 on z1
  const std::uint32_t p1_true = c.pi2.position_of(q);
  auto attack1 = [&](bool full_defense, std::uint32_t guess) {
    auto in = make_entries(n, rng);
    VeriShuffleHooks hooks;
    hooks.s1.tamper_z1 = [&](std::vector<Row>& z) { z[q][col] += err; };
    hooks.s1.tamper_output = [&, guess](std::vector<Row>& o) { o[guess][col] -= err; };
    ShuffleOptions opts;
    opts.check_z2 = opts.check_z1 = full_defense;
    auto mesh = ServerMesh::make();
    return veri_shuffle(mesh, in.rows1, in.rows2, seeds, opts, rng(), hooks);
  };
  EXPECT_TRUE(attack1(true, p1_true).aborted());
  EXPECT_FALSE(attack1(false, p1_true).aborted());
  EXPECT_TRUE(attack1(false, (p1_true + 3) % n).aborted());
}

TEST(VeriShuffle, KnowledgeSeparationTranscriptAudit) {
  Rng rng(49);
  const std::size_t n = 8;
  const auto seeds = make_seeds(rng);
  auto in = make_entries(n, rng);
  auto mesh = ServerMesh::make();
  mesh.enable_taps();
  const auto out = veri_shuffle(mesh, in.rows1, in.rows2, seeds, ShuffleOptions{}, rng());
  ASSERT_FALSE(out.aborted());

  const auto c = derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, n, 5);
  struct Named {
    Channel* ch;
  };
  // seed1 may appear only on s1->s3, seed2 only on s2->s3, seed12 only on s1->s2
  for (Channel* ch : mesh.all()) {
    const auto& frames = *ch->tap();
    if (ch->name() != "s1->s3") {
      EXPECT_FALSE(frames_contain(frames, seeds.seed1.bytes)) << ch->name();
    }
    if (ch->name() != "s2->s3") {
      EXPECT_FALSE(frames_contain(frames, seeds.seed2.bytes)) << ch->name();
    }
    if (ch->name() != "s1->s2") {
      EXPECT_FALSE(frames_contain(frames, seeds.seed12.bytes)) << ch->name();
    }
  }
  // no party sees a mask vector in clear alongside its masked data: the a1
  // rows themselves must never be serialized on any channel
  for (const auto& row : c.a1) {
    for (const auto& x : row) {
      std::array<std::uint8_t, 16> pat;
      x.write_le(pat);
      for (Channel* ch : mesh.all()) EXPECT_FALSE(frames_contain(*ch->tap(), pat));
    }
  }
  // S3 never observes x-hat - a1 in clear (only fresh shares of it)
  const auto plain = plain_rows(in);
  const auto x_hat = c.pi12.apply(plain);
  const auto x_hat_minus_a1 = sub_rows(x_hat, c.a1);
  for (const auto& row : x_hat_minus_a1) {
    for (const auto& x : row) {
      std::array<std::uint8_t, 16> pat;
      x.write_le(pat);
      EXPECT_FALSE(frames_contain(*mesh.c13->tap(), pat));
      EXPECT_FALSE(frames_contain(*mesh.c23->tap(), pat));
    }
  }
}

TEST(VeriShuffle, HonestRunsNeverAbortCompleteness) {
  Rng rng(50);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rand_index(rng, 12);
    auto in = make_entries(n, rng);
    auto mesh = ServerMesh::make();
    const auto out =
        veri_shuffle(mesh, in.rows1, in.rows2, make_seeds(rng), ShuffleOptions{}, rng());
    EXPECT_FALSE(out.aborted()) << out.abort_check();
  }
}

}  // namespace
}  // namespace camel
