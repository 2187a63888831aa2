#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "camel/errors.hpp"
#include "camel/ldp.hpp"
#include "camel/mac.hpp"
#include "camel/shuffle.hpp"
#include "camel/transport.hpp"

namespace camel {

enum class PayloadMode : std::uint8_t { Compressed, Vec };

struct TrainConfig {
  std::uint32_t n = 10;   // clients
  std::uint32_t r = 100;  // data points per client
  std::uint32_t s = 10;   // per-client sample count
  std::uint32_t k = 5;    // server sample multiplier, B = k*s
  std::uint32_t T = 10;   // iterations
  double L = 0.5;         // clip bound
  double epsilon0 = 2.0;  // LDP level
  std::uint32_t d = 16;   // model dimension
  double D = 2.0;         // diameter of the feasible ball
  PayloadMode mode = PayloadMode::Compressed;
  u64 seed = 1;
  std::uint32_t e_bits = 32;

  std::uint32_t N() const { return n * s; }
  std::uint32_t B() const { return k * s; }
  std::uint32_t M() const { return n * r; }
  double gamma() const { return static_cast<double>(B()) / M(); }
  std::uint32_t payload_len() const {
    return mode == PayloadMode::Vec ? d : kCompressedPayloadLen;
  }

  LdpParams ldp() const {
    LdpParams p;
    p.epsilon0 = epsilon0;
    p.L = L;
    p.d = d;
    p.e = e_bits;
    return p;
  }

  void validate() const {
    if (n < 1 || r < 1 || s < 1 || k < 1 || T < 1 || d < 1)
      throw ParamError("train config: counts must be positive");
    if (s > r) throw ParamError("train config: s must not exceed r");
    if (B() > N()) throw ParamError("train config: B = ks must not exceed N = ns");
    if (!(gamma() > 0 && gamma() <= 1)) throw ParamError("train config: gamma out of (0,1]");
    if (!(L > 0) || !(D > 0)) throw ParamError("train config: L and D must be positive");
    if (!(epsilon0 > 0)) throw ParamError("train config: epsilon0 must be positive");
    ldp().validate();
  }

  /// G = L*sqrt(1 + 14d/(gamma*M) * ((e^eps0+1)/(e^eps0-1))^2), the second
  /// moment bound used in the step-size rule.
  double lipschitz_g() const {
    const double ratio = (std::exp(epsilon0) + 1) / (std::exp(epsilon0) - 1);
    return L * std::sqrt(1 + 14.0 * d / (gamma() * M()) * ratio * ratio);
  }
  double eta(std::uint32_t t) const { return D / (lipschitz_g() * std::sqrt(t)); }
};

struct ModelState {
  std::vector<double> theta;
  std::uint32_t iteration = 0;
};

/// l2 projection onto the ball of radius D/2 about the origin.
inline std::vector<double> project(std::vector<double> theta, double D) {
  if (!(D > 0)) throw ParamError("project: D must be positive");
  const double norm = l2_norm(theta);
  if (norm > D / 2) {
    const double scale = (D / 2) / norm;
    for (double& x : theta) x *= scale;
  }
  return theta;
}

// --- tasks ------------------------------------------------------------------

/// Supplies per-point loss gradients of a convex objective.
class Task {
 public:
  virtual ~Task() = default;
  virtual std::uint32_t dim() const = 0;
  virtual std::uint32_t clients() const = 0;
  virtual std::uint32_t points_per_client() const = 0;
  virtual Gradient point_gradient(std::span<const double> theta, std::uint32_t client,
                                  std::uint32_t point) const = 0;
  virtual double loss(std::span<const double> theta) const = 0;
};

/// Binary logistic regression on a two-cluster Gaussian mixture. The first
/// coordinate carries the class separation.
class SyntheticLogisticTask final : public Task {
 public:
  SyntheticLogisticTask(std::uint32_t n_clients, std::uint32_t r_points, std::uint32_t d,
                        u64 seed, double separation = 4.0, double noise_sd = 1.0)
      : d_(d), n_(n_clients), r_(r_points) {
    Rng rng(seed);
    features_.resize(static_cast<std::size_t>(n_) * r_);
    labels_.resize(features_.size());
    for (std::size_t i = 0; i < features_.size(); ++i) {
      const double y = rand_bernoulli(rng, 0.5) ? 1.0 : -1.0;
      labels_[i] = y;
      auto& x = features_[i];
      x.resize(d_);
      for (std::uint32_t j = 0; j < d_; ++j) x[j] = noise_sd * rand_gaussian(rng);
      x[0] += y * separation;
    }
  }

  std::uint32_t dim() const override { return d_; }
  std::uint32_t clients() const override { return n_; }
  std::uint32_t points_per_client() const override { return r_; }

  Gradient point_gradient(std::span<const double> theta, std::uint32_t client,
                          std::uint32_t point) const override {
    const auto& x = features_.at(static_cast<std::size_t>(client) * r_ + point);
    const double y = labels_[static_cast<std::size_t>(client) * r_ + point];
    double margin = 0;
    for (std::uint32_t j = 0; j < d_; ++j) margin += theta[j] * x[j];
    margin *= y;
    const double factor = -y / (1 + std::exp(margin));
    Gradient g(d_);
    for (std::uint32_t j = 0; j < d_; ++j) g[j] = factor * x[j];
    return g;
  }

  double loss(std::span<const double> theta) const override {
    double total = 0;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      double margin = 0;
      for (std::uint32_t j = 0; j < d_; ++j) margin += theta[j] * features_[i][j];
      margin *= labels_[i];
      // log(1 + exp(-margin)), stable in both tails
      total += margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin));
    }
    return total / static_cast<double>(features_.size());
  }

 private:
  std::uint32_t d_, n_, r_;
  std::vector<std::vector<double>> features_;
  std::vector<double> labels_;
};

// --- client side -------------------------------------------------------------

/// One client's local round: sample s points, compute and clip gradients,
/// perturb-compress (or perturb only, in vec mode), MAC and share.
inline std::vector<SharedMacEntry> client_round(const Task& task, std::uint32_t client,
                                                std::span<const double> theta,
                                                const TrainConfig& cfg, Rng& rng,
                                                const PrgFactory& prg = aes_prg()) {
  if (cfg.s > task.points_per_client()) throw ParamError("client_round: s exceeds r");
  const auto params = cfg.ldp();
  const auto picks = sample_without_replacement(rng, task.points_per_client(), cfg.s);
  std::vector<SharedMacEntry> out;
  out.reserve(cfg.s);
  for (const auto idx : picks) {
    const auto g = task.point_gradient(theta, client, static_cast<std::uint32_t>(idx));
    const auto clipped = clip(g, cfg.L);
    if (cfg.mode == PayloadMode::Compressed) {
      out.push_back(client_package(noisy_grad_cmpr(clipped, params, rng, prg), rng, prg));
    } else {
      // the vec baseline ships the full perturbed vector
      const auto perturbed = noisy_grad_dcmp(noisy_grad_cmpr(clipped, params, rng, prg),
                                             params, prg);
      out.push_back(client_package_vec(perturbed, rng, prg));
    }
  }
  return out;
}

inline std::vector<std::uint8_t> upload_payload(std::span<const SharedMacEntry> entries,
                                                PartyId party, const PrgFactory& = aes_prg()) {
  std::vector<std::uint8_t> out;
  for (const auto& e : entries) {
    const auto& ps = party == PartyId::P1 ? e.p1 : e.p2;
    const auto w = ps.to_wire();
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

inline std::vector<Row> decode_upload(std::span<const std::uint8_t> payload, std::uint32_t l,
                                      const PrgFactory& prg = aes_prg()) {
  const std::size_t per = SharedMacEntry::PartyShare::wire_bytes(l);
  if (per == 0 || payload.size() % per != 0) throw ProtocolError("bad upload payload");
  std::vector<Row> rows;
  rows.reserve(payload.size() / per);
  for (std::size_t off = 0; off < payload.size(); off += per)
    rows.push_back(SharedMacEntry::PartyShare::from_wire(payload.subspan(off, per), l)
                       .to_row(prg));
  return rows;
}

// --- server-side sampling and aggregation ------------------------------------

struct SampleHooks {
  std::function<void(std::vector<Row>&)> tamper_before_commit;
  std::function<void(std::vector<Row>&)> tamper_after_commit;
};

/// Reconstructs the first B shuffled entries: both servers hash-commit their
/// share blocks, exchange digests, reveal, cross-check, then verify each
/// entry's MAC. Returns the plaintext entries or throws AbortError.
inline std::vector<MacEntry> sample_and_reconstruct(Duplex& peer, std::span<const Row> my_rows,
                                                    std::size_t b, std::uint32_t l,
                                                    const SampleHooks* hooks = nullptr) {
  if (b > my_rows.size()) throw UsageError("sample_and_reconstruct: B exceeds N");
  std::vector<Row> block(my_rows.begin(), my_rows.begin() + b);
  if (hooks && hooks->tamper_before_commit) hooks->tamper_before_commit(block);
  const auto my_bytes = rows_to_bytes(block);
  const Digest my_digest = hash_digest("camel.block", my_bytes);
  peer.out.send(MsgType::FHashCommit, std::vector<std::uint8_t>(my_digest.begin(),
                                                                my_digest.end()));
  const auto commit_msg = peer.in.recv(MsgType::FHashCommit);
  if (commit_msg.payload.size() != 32) throw ProtocolError("bad block commit size");

  if (hooks && hooks->tamper_after_commit) {
    hooks->tamper_after_commit(block);
    peer.out.send(MsgType::ShareOpen, rows_to_bytes(block));
  } else {
    peer.out.send(MsgType::ShareOpen, my_bytes);
  }
  const auto open_msg = peer.in.recv(MsgType::ShareOpen);
  const Digest their_digest = hash_digest("camel.block", open_msg.payload);
  if (!std::equal(their_digest.begin(), their_digest.end(), commit_msg.payload.begin()))
    throw AbortError("sample-digest-mismatch", "revealed share block does not match its hash");

  const std::uint32_t width = entry_width(l);
  const auto their_rows = bytes_to_rows(open_msg.payload, width);
  if (their_rows.size() != b) throw ProtocolError("bad revealed block shape");
  std::vector<MacEntry> entries(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto row = add_vec(block[i], their_rows[i]);
    MacEntry& e = entries[i];
    e.tag = row[0];
    e.payload.assign(row.begin() + 1, row.begin() + 1 + l);
    e.key.assign(row.begin() + 1 + l, row.end());
    if (!e.verify())
      throw AbortError("sample-mac", "per-entry MAC check failed at sampled index " +
                                         std::to_string(i));
  }
  return entries;
}

/// Decompresses verified entries, averages, and applies one projected step.
/// Pure: both servers run it independently and must agree bit-exactly.
inline ModelState decompress_aggregate_update(std::span<const MacEntry> entries,
                                              const ModelState& model, double eta,
                                              const TrainConfig& cfg,
                                              const PrgFactory& prg = aes_prg()) {
  if (entries.empty()) throw UsageError("decompress_aggregate_update: no entries");
  const auto params = cfg.ldp();
  std::vector<double> sum(cfg.d, 0.0);
  for (const auto& e : entries) {
    Gradient g;
    if (cfg.mode == PayloadMode::Compressed) {
      g = noisy_grad_dcmp(decode_compressed_payload(e.payload), params, prg);
    } else {
      g = decode_vec_payload(e.payload);
      if (g.size() != cfg.d) throw ProtocolError("bad vec payload length");
    }
    for (std::uint32_t j = 0; j < cfg.d; ++j) sum[j] += g[j];
  }
  std::vector<double> theta = model.theta;
  const double inv_b = 1.0 / static_cast<double>(entries.size());
  for (std::uint32_t j = 0; j < cfg.d; ++j) theta[j] -= eta * sum[j] * inv_b;
  ModelState next;
  next.theta = project(std::move(theta), cfg.D);
  next.iteration = model.iteration + 1;
  return next;
}

inline std::vector<std::uint8_t> theta_bytes(std::span<const double> theta) {
  std::vector<std::uint8_t> out;
  out.reserve(theta.size() * 8);
  for (const double v : theta) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

inline std::vector<double> theta_from_bytes(std::span<const std::uint8_t> in) {
  if (in.size() % 8 != 0) throw ProtocolError("bad theta payload");
  std::vector<double> out(in.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | in[i * 8 + b];
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

/// Cross-server model consistency: exchange SHA-256 of the serialized model
/// and abort on mismatch.
inline void model_hash_exchange(Duplex& peer, std::span<const double> theta) {
  const Digest mine = hash_digest("camel.model", theta_bytes(theta));
  peer.out.send(MsgType::ModelHash, std::vector<std::uint8_t>(mine.begin(), mine.end()));
  const auto msg = peer.in.recv(MsgType::ModelHash);
  if (msg.payload.size() != 32 || !std::equal(mine.begin(), mine.end(), msg.payload.begin()))
    throw AbortError("model-hash-mismatch", "servers disagree on the updated model");
}

// --- transcripts --------------------------------------------------------------

struct CheckOutcome {
  std::string name;
  bool ok;
};

struct RoundTranscript {
  std::uint32_t iteration = 0;
  std::uint64_t bytes_offline = 0, bytes_online = 0;
  std::uint64_t rounds_offline = 0, rounds_online = 0;
  std::vector<CheckOutcome> checks;
  std::string abort_check;  // empty when clean
};

struct TrainResult {
  ModelState model;
  std::vector<double> loss_trace;  // loss(theta_t) for t = 0..T
  std::vector<RoundTranscript> rounds;
  std::vector<MeterRow> meters;
  bool aborted = false;
  std::string abort_check;
};

// --- full training loop --------------------------------------------------------

struct FlMesh {
  ServerMesh servers;
  std::unique_ptr<Channel> clients_to_s1, clients_to_s2, s1_to_clients, s2_to_clients;

  static FlMesh make(TransportKind kind = TransportKind::InProcess) {
    FlMesh m;
    m.servers = ServerMesh::make(kind);
    m.clients_to_s1 = make_channel(kind, "clients->s1");
    m.clients_to_s2 = make_channel(kind, "clients->s2");
    m.s1_to_clients = make_channel(kind, "s1->clients");
    m.s2_to_clients = make_channel(kind, "s2->clients");
    return m;
  }
  std::vector<Channel*> all() const {
    auto v = servers.all();
    v.push_back(clients_to_s1.get());
    v.push_back(clients_to_s2.get());
    v.push_back(s1_to_clients.get());
    v.push_back(s2_to_clients.get());
    return v;
  }
};

/// Attack surface of the training loop (decorates the honest roles).
struct TrainHooks {
  VeriShuffleHooks shuffle;
  SampleHooks sample_s1, sample_s2;
  // perturbs a server's locally computed model before the hash exchange;
  // applied at S1 or S2 respectively
  std::function<void(std::vector<double>&)> tamper_model_s1, tamper_model_s2;
};

namespace detail {

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct PhaseDelta {
  std::uint64_t bytes[2] = {0, 0};
  std::uint64_t rounds[2] = {0, 0};
};

/// Sender-side per-iteration accounting over the channels a thread owns.
class IterationMeter {
 public:
  explicit IterationMeter(std::vector<Channel*> owned) : owned_(std::move(owned)) {}
  PhaseDelta snapshot() {
    PhaseDelta d;
    for (Channel* ch : owned_) {
      for (int p = 0; p < 2; ++p) {
        const auto st = ch->stats(static_cast<Phase>(p));
        d.bytes[p] += st.bytes;
        d.rounds[p] += st.rounds;
      }
    }
    PhaseDelta delta;
    for (int p = 0; p < 2; ++p) {
      delta.bytes[p] = d.bytes[p] - last_.bytes[p];
      delta.rounds[p] = d.rounds[p] - last_.rounds[p];
    }
    last_ = d;
    return delta;
  }

 private:
  std::vector<Channel*> owned_;
  PhaseDelta last_;
};

}  // namespace detail

/// Runs the complete protocol for T iterations: clients perturb-compress and
/// share, servers VeriShuffle, sample the first B with hash-commit
/// reconstruction, check MACs, decompress, aggregate, and exchange model
/// hashes. Deterministic given (config, seed).
inline TrainResult run_training(const TrainConfig& cfg, const Task& task,
                                const TrainHooks& hooks = {},
                                TransportKind kind = TransportKind::InProcess,
                                const PrgFactory& prg = aes_prg()) {
  cfg.validate();
  if (task.dim() != cfg.d || task.clients() != cfg.n ||
      task.points_per_client() != cfg.r)
    throw UsageError("run_training: task shape does not match config");

  auto mesh = FlMesh::make(kind);
  const std::uint32_t n_entries = cfg.N();
  const std::uint32_t width = entry_width(cfg.payload_len());
  ShuffleOptions shuffle_opts;
  shuffle_opts.l = cfg.payload_len();

  struct ServerOut {
    std::vector<RoundTranscript> rounds;
    std::string abort_check;
    ModelState model;
  };
  ServerOut out1, out2, out3;
  std::vector<double> loss_trace;
  std::string driver_abort;

  // S1 and S2 run the same per-iteration server program; role seams are the
  // shuffle role, the ef tie-break, and the attack hooks.
  auto server_loop = [&](PartyId party, ServerOut& out) {
    const bool is_p1 = party == PartyId::P1;
    Rng rng(detail::splitmix64(cfg.seed ^ (is_p1 ? 0x5331 : 0x5332)));
    Duplex to_peer = is_p1 ? Duplex(mesh.servers.c12.get(), mesh.servers.c21.get())
                           : Duplex(mesh.servers.c21.get(), mesh.servers.c12.get());
    Duplex to_s3 = is_p1 ? Duplex(mesh.servers.c13.get(), mesh.servers.c31.get())
                         : Duplex(mesh.servers.c23.get(), mesh.servers.c32.get());
    Channel* bcast = is_p1 ? mesh.s1_to_clients.get() : mesh.s2_to_clients.get();
    Channel* uplink = is_p1 ? mesh.clients_to_s1.get() : mesh.clients_to_s2.get();
    bcast->set_phase(Phase::Online);
    Endpoint bcast_ep(bcast);
    Endpoint uplink_ep(uplink);
    detail::IterationMeter meter(is_p1
                                     ? std::vector<Channel*>{mesh.servers.c12.get(),
                                                             mesh.servers.c13.get(), bcast}
                                     : std::vector<Channel*>{mesh.servers.c21.get(),
                                                             mesh.servers.c23.get(), bcast});
    ModelState model;
    model.theta.assign(cfg.d, 0.0);
    const auto* sample_hooks = is_p1 ? &hooks.sample_s1 : &hooks.sample_s2;
    const auto& model_tamper = is_p1 ? hooks.tamper_model_s1 : hooks.tamper_model_s2;

    for (std::uint32_t t = 1; t <= cfg.T; ++t) {
      RoundTranscript rt;
      rt.iteration = t;
      try {
        bcast_ep.send(MsgType::ThetaBroadcast, theta_bytes(model.theta));
        std::vector<Row> rows;
        rows.reserve(n_entries);
        for (std::uint32_t c = 0; c < cfg.n; ++c) {
          const auto msg = uplink_ep.recv(MsgType::ShareUpload);
          auto client_rows = decode_upload(msg.payload, cfg.payload_len(), prg);
          if (client_rows.size() != cfg.s) throw ProtocolError("bad upload entry count");
          for (auto& r : client_rows) rows.push_back(std::move(r));
        }

        const Seed seed_a = Seed::random(rng);  // S1: seed1; S2: seed2
        const Seed seed_12 = Seed::random(rng); // used by S1 only
        ShuffleResult sh;
        if (is_p1) {
          sh = run_shuffle_s1(to_peer, to_s3, std::move(rows), seed_a, seed_12, shuffle_opts,
                              rng, hooks.shuffle.s1, prg);
        } else {
          sh = run_shuffle_s2(to_peer, to_s3, std::move(rows), seed_a, shuffle_opts, rng,
                              hooks.shuffle.s2, prg);
        }
        if (sh.aborted) throw AbortError(sh.abort_check, "shuffle aborted");
        rt.checks.push_back({"shuffle", true});

        const auto entries = sample_and_reconstruct(
            to_peer, sh.out_share, cfg.B(), cfg.payload_len(),
            (sample_hooks->tamper_before_commit || sample_hooks->tamper_after_commit)
                ? sample_hooks
                : nullptr);
        rt.checks.push_back({"sample-digest", true});
        rt.checks.push_back({"sample-mac", true});

        model = decompress_aggregate_update(entries, model, cfg.eta(t), cfg, prg);
        if (model_tamper) model_tamper(model.theta);
        model_hash_exchange(to_peer, model.theta);
        rt.checks.push_back({"model-hash", true});

        const auto delta = meter.snapshot();
        rt.bytes_offline = delta.bytes[0];
        rt.bytes_online = delta.bytes[1];
        rt.rounds_offline = delta.rounds[0];
        rt.rounds_online = delta.rounds[1];
        out.rounds.push_back(std::move(rt));
      } catch (const AbortError& e) {
        rt.abort_check = e.check();
        rt.checks.push_back({e.check(), false});
        out.rounds.push_back(std::move(rt));
        out.abort_check = e.check();
        to_peer.out.send_abort(e.check());
        to_s3.out.send_abort(e.check());
        bcast_ep.send_abort(e.check());
        break;
      } catch (const ProtocolError& e) {
        rt.abort_check = std::string("protocol-error: ") + e.what();
        out.rounds.push_back(std::move(rt));
        out.abort_check = rt.abort_check;
        to_peer.out.send_abort("protocol-error");
        to_s3.out.send_abort("protocol-error");
        bcast_ep.send_abort("protocol-error");
        break;
      }
    }
    if (out.abort_check.empty()) {
      bcast_ep.send(MsgType::ThetaBroadcast, theta_bytes(model.theta));
      // attribute the final broadcast to the last round so transcript byte
      // sums stay exact against the channel meters
      const auto delta = meter.snapshot();
      if (!out.rounds.empty()) {
        out.rounds.back().bytes_online += delta.bytes[1];
        out.rounds.back().rounds_online += delta.rounds[1];
      }
    }
    out.model = std::move(model);
  };

  auto s3_loop = [&](ServerOut& out) {
    Rng rng(detail::splitmix64(cfg.seed ^ 0x5333));
    Duplex to_s1(mesh.servers.c31.get(), mesh.servers.c13.get());
    Duplex to_s2(mesh.servers.c32.get(), mesh.servers.c23.get());
    detail::IterationMeter meter({mesh.servers.c31.get(), mesh.servers.c32.get()});
    for (std::uint32_t t = 1; t <= cfg.T; ++t) {
      const auto res =
          run_shuffle_s3(to_s1, to_s2, n_entries, shuffle_opts, rng, hooks.shuffle.s3, prg);
      RoundTranscript rt;
      rt.iteration = t;
      const auto delta = meter.snapshot();
      rt.bytes_offline = delta.bytes[0];
      rt.bytes_online = delta.bytes[1];
      rt.rounds_offline = delta.rounds[0];
      rt.rounds_online = delta.rounds[1];
      out.rounds.push_back(std::move(rt));
      if (res.aborted) {
        out.abort_check = res.abort_check;
        break;
      }
    }
  };

  std::vector<RoundTranscript> client_rounds;
  auto client_loop = [&] {
    Rng rng(detail::splitmix64(cfg.seed ^ 0xC11E));
    mesh.clients_to_s1->set_phase(Phase::Online);
    mesh.clients_to_s2->set_phase(Phase::Online);
    Endpoint up1(mesh.clients_to_s1.get());
    Endpoint up2(mesh.clients_to_s2.get());
    Endpoint down1(mesh.s1_to_clients.get());
    Endpoint down2(mesh.s2_to_clients.get());
    detail::IterationMeter meter({mesh.clients_to_s1.get(), mesh.clients_to_s2.get()});
    try {
      for (std::uint32_t t = 1; t <= cfg.T + 1; ++t) {
        const auto theta1 = theta_from_bytes(down1.recv(MsgType::ThetaBroadcast).payload);
        const auto theta2 = theta_from_bytes(down2.recv(MsgType::ThetaBroadcast).payload);
        if (theta1 != theta2)
          throw AbortError("model-broadcast-mismatch", "clients saw diverging models");
        loss_trace.push_back(task.loss(theta1));
        if (t == cfg.T + 1) break;
        for (std::uint32_t c = 0; c < cfg.n; ++c) {
          const auto entries = client_round(task, c, theta1, cfg, rng, prg);
          up1.send(MsgType::ShareUpload, upload_payload(entries, PartyId::P1));
          up2.send(MsgType::ShareUpload, upload_payload(entries, PartyId::P2));
        }
        RoundTranscript rt;
        rt.iteration = t;
        const auto delta = meter.snapshot();
        rt.bytes_online = delta.bytes[1];
        rt.rounds_online = delta.rounds[1];
        client_rounds.push_back(std::move(rt));
      }
    } catch (const AbortError& e) {
      driver_abort = e.check();
      up1.send_abort(e.check());
      up2.send_abort(e.check());
    } catch (const ProtocolError& e) {
      driver_abort = std::string("protocol-error: ") + e.what();
      up1.send_abort("protocol-error");
      up2.send_abort("protocol-error");
    }
  };

  std::thread t1([&] { server_loop(PartyId::P1, out1); });
  std::thread t2([&] { server_loop(PartyId::P2, out2); });
  std::thread t3([&] { s3_loop(out3); });
  std::thread tc(client_loop);
  t1.join();
  t2.join();
  t3.join();
  tc.join();

  TrainResult result;
  result.model = std::move(out1.model);
  result.loss_trace = std::move(loss_trace);
  const auto channels = mesh.all();
  result.meters = meter_report(channels);
  // merge the two server-side transcript streams; S1's stream carries the
  // byte deltas for its own channels, S2 entries are folded in
  result.rounds = std::move(out1.rounds);
  auto fold = [&](const std::vector<RoundTranscript>& more, const char* tag) {
    for (std::size_t i = 0; i < more.size(); ++i) {
      if (i >= result.rounds.size()) {
        result.rounds.push_back(more[i]);
        continue;
      }
      result.rounds[i].bytes_offline += more[i].bytes_offline;
      result.rounds[i].bytes_online += more[i].bytes_online;
      result.rounds[i].rounds_offline += more[i].rounds_offline;
      result.rounds[i].rounds_online += more[i].rounds_online;
      for (const auto& c : more[i].checks)
        result.rounds[i].checks.push_back({std::string(tag) + "/" + c.name, c.ok});
      if (result.rounds[i].abort_check.empty())
        result.rounds[i].abort_check = more[i].abort_check;
    }
  };
  fold(out2.rounds, "s2");
  fold(out3.rounds, "s3");
  fold(client_rounds, "clients");
  for (const auto* abort :
       {&out1.abort_check, &out2.abort_check, &out3.abort_check, &driver_abort}) {
    if (!abort->empty() && result.abort_check.empty()) result.abort_check = *abort;
  }
  result.aborted = !result.abort_check.empty();
  return result;
}

/// Idealized baseline: the same sampling pattern and step rule with exact
/// clipped gradients, no perturbation, compression, or protocol.
inline TrainResult run_noiseless_sgd(const TrainConfig& cfg, const Task& task) {
  cfg.validate();
  Rng rng(detail::splitmix64(cfg.seed ^ 0x90153));
  ModelState model;
  model.theta.assign(cfg.d, 0.0);
  TrainResult result;
  result.loss_trace.push_back(task.loss(model.theta));
  for (std::uint32_t t = 1; t <= cfg.T; ++t) {
    std::vector<double> sum(cfg.d, 0.0);
    std::size_t count = 0;
    // clients sample s points each; the server keeps a uniform B-subset
    std::vector<Gradient> grads;
    grads.reserve(cfg.N());
    for (std::uint32_t c = 0; c < cfg.n; ++c) {
      const auto picks = sample_without_replacement(rng, cfg.r, cfg.s);
      for (const auto idx : picks)
        grads.push_back(clip(
            task.point_gradient(model.theta, c, static_cast<std::uint32_t>(idx)), cfg.L));
    }
    const auto chosen = sample_without_replacement(rng, grads.size(), cfg.B());
    for (const auto gi : chosen) {
      for (std::uint32_t j = 0; j < cfg.d; ++j) sum[j] += grads[gi][j];
      ++count;
    }
    std::vector<double> theta = model.theta;
    for (std::uint32_t j = 0; j < cfg.d; ++j)
      theta[j] -= cfg.eta(t) * sum[j] / static_cast<double>(count);
    model.theta = project(std::move(theta), cfg.D);
    model.iteration = t;
    result.loss_trace.push_back(task.loss(model.theta));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace camel
