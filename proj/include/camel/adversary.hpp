#pragma once

#include <future>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "camel/fl.hpp"
#include "camel/shuffle.hpp"

namespace camel {

enum class Behavior : std::uint8_t {
  Honest,
  SelectiveFailureZ2,
  SelectiveFailureZ1,
  ForgeFShare,
  TamperReconstructionShare,
  TamperAggregation,
  MalformedDelta,
  MalformedTriple,
};

enum class DefenseMode : std::uint8_t { Full, PostShuffleOnly };

inline const char* behavior_name(Behavior b) {
  switch (b) {
    case Behavior::Honest: return "honest";
    case Behavior::SelectiveFailureZ2: return "selective-failure-z2";
    case Behavior::SelectiveFailureZ1: return "selective-failure-z1";
    case Behavior::ForgeFShare: return "forge-f-share";
    case Behavior::TamperReconstructionShare: return "tamper-reconstruction-share";
    case Behavior::TamperAggregation: return "tamper-aggregation";
    case Behavior::MalformedDelta: return "malformed-delta";
    case Behavior::MalformedTriple: return "malformed-triple";
  }
  return "unknown";
}

inline std::optional<Behavior> parse_behavior(const std::string& s) {
  for (const Behavior b :
       {Behavior::Honest, Behavior::SelectiveFailureZ2, Behavior::SelectiveFailureZ1,
        Behavior::ForgeFShare, Behavior::TamperReconstructionShare,
        Behavior::TamperAggregation, Behavior::MalformedDelta, Behavior::MalformedTriple}) {
    if (s == behavior_name(b)) return b;
  }
  return std::nullopt;
}

/// Default corrupted role for a behavior (the honest-majority model allows
/// exactly one).
inline Role default_corrupt_role(Behavior b) {
  switch (b) {
    case Behavior::SelectiveFailureZ1: return Role::S1;
    case Behavior::MalformedDelta:
    case Behavior::MalformedTriple: return Role::S3;
    default: return Role::S2;
  }
}

struct AttackSpec {
  Behavior behavior = Behavior::Honest;
  Role corrupt = Role::S2;
  DefenseMode defense = DefenseMode::Full;
  std::optional<std::uint32_t> position_q;  // error position; random when unset
  std::optional<std::uint32_t> guess_p;     // cancellation guess; random when unset
  bool oracle_guess = false;      // test-only: derive p from the trial's seeds
  bool tamper_before_commit = false;  // reconstruction-share variant
  bool zero_change = false;           // no-op tamper sanity case
  bool disable_commit_exchange = false;  // ablation: skip f-share hash commits

  static AttackSpec for_behavior(Behavior b, DefenseMode d = DefenseMode::Full) {
    AttackSpec s;
    s.behavior = b;
    s.corrupt = default_corrupt_role(b);
    s.defense = d;
    return s;
  }

  void validate() const {
    switch (behavior) {
      case Behavior::SelectiveFailureZ2:
        if (corrupt != Role::S2) throw UsageError("z2 attack requires corrupt S2");
        break;
      case Behavior::SelectiveFailureZ1:
        if (corrupt != Role::S1) throw UsageError("z1 attack requires corrupt S1");
        break;
      case Behavior::MalformedDelta:
      case Behavior::MalformedTriple:
        if (corrupt != Role::S3) throw UsageError("offline attacks require corrupt S3");
        break;
      case Behavior::ForgeFShare:
      case Behavior::TamperReconstructionShare:
      case Behavior::TamperAggregation:
        if (corrupt == Role::S3) throw UsageError("attack requires a data-holding server");
        break;
      case Behavior::Honest: break;
    }
  }
};

struct AttackOutcome {
  bool detected = false;
  std::string detecting_check;  // empty when undetected
};

/// One full protocol round under the given attack: N MACed entries are
/// shuffled, the first B sampled and reconstructed, decompressed, aggregated,
/// and the model hash compared. The outcome reports whether any honest check
/// aborted and which.
inline AttackOutcome run_attack_trial(const AttackSpec& spec, std::uint32_t n_entries,
                                      std::uint32_t b_sample, Rng& rng,
                                      const PrgFactory& prg = aes_prg()) {
  spec.validate();
  if (b_sample > n_entries) throw UsageError("run_attack_trial: B exceeds N");
  LdpParams params;
  params.epsilon0 = 1.0;
  params.L = 1.0;
  params.d = 8;

  // honest client-side material
  std::vector<Row> rows1, rows2;
  Gradient probe(params.d, 0.0);
  probe[0] = 0.5;
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    const auto e = client_package(noisy_grad_cmpr(probe, params, rng, prg), rng, prg);
    rows1.push_back(e.p1.to_row());
    rows2.push_back(e.p2.to_row());
  }

  const VeriShuffleSeeds seeds{Seed::random(rng), Seed::random(rng), Seed::random(rng)};
  ShuffleOptions opts;
  opts.check_z2 = opts.check_z1 = spec.defense == DefenseMode::Full;
  opts.commit_exchange = !spec.disable_commit_exchange;

  const FieldElem err = spec.zero_change ? FieldElem(0) : FieldElem(1) + rand_field(rng);
  const std::uint32_t q =
      spec.position_q ? *spec.position_q
                      : static_cast<std::uint32_t>(rand_index(rng, n_entries));
  std::uint32_t p = spec.guess_p ? *spec.guess_p
                                 : static_cast<std::uint32_t>(rand_index(rng, n_entries));
  if (spec.oracle_guess) {
    const auto c =
        derive_correlation(seeds.seed1, seeds.seed2, seeds.seed12, n_entries, opts.width(), prg);
    p = spec.behavior == Behavior::SelectiveFailureZ1
            ? c.pi2.position_of(q)
            : c.pi2.position_of(c.pi1.position_of(q));
  }

  VeriShuffleHooks hooks;
  const std::uint32_t col = 1;  // a payload position
  switch (spec.behavior) {
    case Behavior::SelectiveFailureZ2:
      hooks.s2.tamper_z2 = [q, err](std::vector<Row>& z) { z[q][col] += err; };
      hooks.s2.tamper_output = [p, err](std::vector<Row>& o) { o[p][col] -= err; };
      break;
    case Behavior::SelectiveFailureZ1:
      hooks.s1.tamper_z1 = [q, err](std::vector<Row>& z) { z[q][col] += err; };
      hooks.s1.tamper_output = [p, err](std::vector<Row>& o) { o[p][col] -= err; };
      break;
    case Behavior::ForgeFShare: {
      MacVerifyHooks mac;
      if (!spec.zero_change)
        mac.tamper_product_sum = [err](FieldElem s) { return s + err; };
      mac.forge_reveal = [](FieldElem, FieldElem theirs) { return theirs.negate(); };
      (spec.corrupt == Role::S1 ? hooks.s1.mac : hooks.s2.mac) = mac;
      break;
    }
    case Behavior::MalformedDelta:
      hooks.s3.tamper_delta = [q, err](std::vector<Row>& d) { d[q][col] += err; };
      break;
    case Behavior::MalformedTriple:
      hooks.s3.tamper_dealt_triples = [err](std::vector<TripleShare>& t1,
                                            std::vector<TripleShare>&) {
        t1[0].c += err;
      };
      break;
    default:
      break;
  }

  auto mesh = ServerMesh::make();
  const auto shuffle_out = veri_shuffle(mesh, rows1, rows2, seeds, opts, rng(), hooks, prg);
  if (shuffle_out.aborted()) return {true, shuffle_out.abort_check()};

  // post-shuffle stage: sampling, decompression, aggregation, model hash
  SampleHooks sample_hooks;
  if (spec.behavior == Behavior::TamperReconstructionShare && !spec.zero_change) {
    auto tamper = [q, b_sample, err](std::vector<Row>& block) {
      block[q % b_sample][1] += err;
    };
    if (spec.tamper_before_commit)
      sample_hooks.tamper_before_commit = tamper;
    else
      sample_hooks.tamper_after_commit = tamper;
  }
  TrainConfig agg_cfg;
  agg_cfg.d = params.d;
  agg_cfg.L = params.L;
  agg_cfg.epsilon0 = params.epsilon0;
  agg_cfg.D = 2.0;

  Duplex side1(mesh.c12.get(), mesh.c21.get());
  Duplex side2(mesh.c21.get(), mesh.c12.get());
  std::string abort1, abort2;
  auto post_stage = [&](Duplex& peer, std::span<const Row> my_rows, bool corrupted,
                        std::string& abort_out) {
    try {
      const auto entries = sample_and_reconstruct(
          peer, my_rows, b_sample, kCompressedPayloadLen,
          corrupted && spec.behavior == Behavior::TamperReconstructionShare ? &sample_hooks
                                                                            : nullptr);
      ModelState model;
      model.theta.assign(agg_cfg.d, 0.0);
      model = decompress_aggregate_update(entries, model, 0.1, agg_cfg, prg);
      if (corrupted && spec.behavior == Behavior::TamperAggregation && !spec.zero_change)
        model.theta[0] += 1e-9;
      model_hash_exchange(peer, model.theta);
    } catch (const AbortError& e) {
      abort_out = e.check();
      peer.out.send_abort(e.check());
    }
  };
  std::thread t1([&] {
    post_stage(side1, shuffle_out.s1.out_share, spec.corrupt == Role::S1, abort1);
  });
  std::thread t2([&] {
    post_stage(side2, shuffle_out.s2.out_share, spec.corrupt == Role::S2, abort2);
  });
  t1.join();
  t2.join();
  // an abort seen by the honest server counts as detection
  const std::string& honest_abort = spec.corrupt == Role::S1 ? abort2 : abort1;
  const std::string& other_abort = spec.corrupt == Role::S1 ? abort1 : abort2;
  if (!honest_abort.empty()) return {true, honest_abort};
  if (!other_abort.empty()) return {true, other_abort};
  return {false, ""};
}

struct MatrixCell {
  std::string behavior;
  std::size_t trials = 0;
  std::size_t detected = 0;
  double escape_rate = 0;
};

/// Runs `trials` independent attack rounds; trials are seeded individually so
/// results are independent of the parallelism degree.
inline MatrixCell run_attack_cell(const AttackSpec& spec, std::uint32_t n_entries,
                                  std::uint32_t b_sample, std::size_t trials, u64 seed,
                                  int jobs = 1) {
  MatrixCell cell;
  cell.behavior = behavior_name(spec.behavior);
  cell.trials = trials;
  const int workers = jobs < 1 ? 1 : jobs;
  std::vector<std::future<std::size_t>> futures;
  const std::size_t chunk = (trials + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(trials, lo + chunk);
    if (lo >= hi) break;
    futures.push_back(std::async(std::launch::async, [&, lo, hi] {
      std::size_t detected = 0;
      for (std::size_t t = lo; t < hi; ++t) {
        Rng rng(detail::splitmix64(seed ^ (0xA77ACBULL + t)));
        if (run_attack_trial(spec, n_entries, b_sample, rng).detected) ++detected;
      }
      return detected;
    }));
  }
  for (auto& f : futures) cell.detected += f.get();
  cell.escape_rate =
      static_cast<double>(trials - cell.detected) / static_cast<double>(trials);
  return cell;
}

}  // namespace camel
