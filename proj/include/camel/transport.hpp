#pragma once

#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camel/errors.hpp"
#include "camel/field.hpp"

namespace camel {

// Core shuffle-protocol message types, then the FL-layer additions.
enum class MsgType : std::uint8_t {
  SeedShare = 0,
  Delta = 1,
  Z2 = 2,
  Z1 = 3,
  ReShare = 4,
  FHashCommit = 5,
  FReveal = 6,
  Abort = 7,
  TripleShare = 8,
  MulOpen = 9,
  ShareUpload = 10,
  ShareOpen = 11,
  ModelHash = 12,
  ThetaBroadcast = 13,
};

inline constexpr std::uint8_t kMaxMsgType = 13;

enum class Phase : std::uint8_t { Offline = 0, Online = 1 };

struct Message {
  MsgType type;
  std::uint16_t round = 0;
  std::vector<std::uint8_t> payload;
};

inline constexpr std::size_t kFrameHeaderBytes = 7;

/// Frame: 4-byte LE payload length | 1-byte type | 2-byte LE round | payload.
inline std::vector<std::uint8_t> encode_frame(const Message& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + m.payload.size());
  const std::uint32_t len = static_cast<std::uint32_t>(m.payload.size());
  out.push_back(static_cast<std::uint8_t>(len));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(m.type));
  out.push_back(static_cast<std::uint8_t>(m.round));
  out.push_back(static_cast<std::uint8_t>(m.round >> 8));
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

struct ChannelStats {
  std::uint64_t bytes = 0;
  std::uint64_t rounds = 0;
};

/// A reliable ordered unidirectional message channel with exact byte
/// accounting. Owned by exactly one sender thread and one receiver thread;
/// the sender alone updates the meters.
class Channel {
 public:
  explicit Channel(std::string name) : name_(std::move(name)) {}
  virtual ~Channel() = default;

  void send(const Message& m) {
    auto frame = encode_frame(m);
    auto& st = stats_[static_cast<int>(phase_)];
    st.bytes += frame.size();
    st.rounds += 1;
    if (tap_) tap_->push_back(frame);
    send_bytes(frame);
  }

  Message recv() {
    std::uint8_t hdr[kFrameHeaderBytes];
    recv_bytes(std::span<std::uint8_t>(hdr, kFrameHeaderBytes));
    const std::uint32_t len = static_cast<std::uint32_t>(hdr[0]) |
                              (static_cast<std::uint32_t>(hdr[1]) << 8) |
                              (static_cast<std::uint32_t>(hdr[2]) << 16) |
                              (static_cast<std::uint32_t>(hdr[3]) << 24);
    if (hdr[4] > kMaxMsgType)
      throw ProtocolError("malformed frame on channel " + name_ + ": unknown message type");
    Message m;
    m.type = static_cast<MsgType>(hdr[4]);
    m.round = static_cast<std::uint16_t>(hdr[5] | (hdr[6] << 8));
    m.payload.resize(len);
    if (len > 0) recv_bytes(m.payload);
    return m;
  }

  const std::string& name() const { return name_; }
  void set_phase(Phase p) { phase_ = p; }
  Phase phase() const { return phase_; }
  ChannelStats stats(Phase p) const { return stats_[static_cast<int>(p)]; }
  ChannelStats total() const {
    return {stats_[0].bytes + stats_[1].bytes, stats_[0].rounds + stats_[1].rounds};
  }

  void enable_tap() { tap_ = std::make_unique<std::vector<std::vector<std::uint8_t>>>(); }
  const std::vector<std::vector<std::uint8_t>>* tap() const { return tap_.get(); }

 protected:
  virtual void send_bytes(std::span<const std::uint8_t> data) = 0;
  virtual void recv_bytes(std::span<std::uint8_t> out) = 0;

 private:
  std::string name_;
  Phase phase_ = Phase::Offline;
  ChannelStats stats_[2];
  std::unique_ptr<std::vector<std::vector<std::uint8_t>>> tap_;
};

/// In-memory channel backed by a mutex-protected byte queue.
class InProcessChannel : public Channel {
 public:
  explicit InProcessChannel(std::string name) : Channel(std::move(name)) {}

 protected:
  void send_bytes(std::span<const std::uint8_t> data) override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      q_.emplace_back(data.begin(), data.end());
    }
    cv_.notify_one();
  }
  void recv_bytes(std::span<std::uint8_t> out) override {
    std::size_t got = 0;
    while (got < out.size()) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [&] { return !q_.empty(); });
      auto& front = q_.front();
      const std::size_t take = std::min(out.size() - got, front.size() - offset_);
      std::memcpy(out.data() + got, front.data() + offset_, take);
      got += take;
      offset_ += take;
      if (offset_ == front.size()) {
        q_.pop_front();
        offset_ = 0;
      }
    }
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> q_;
  std::size_t offset_ = 0;
};

/// Stream-socket channel over a socketpair; same framing as in-process.
class SocketChannel final : public Channel {
 public:
  explicit SocketChannel(std::string name) : Channel(std::move(name)) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
      throw Error("socketpair failed");
    fd_write_ = fds[0];
    fd_read_ = fds[1];
  }
  ~SocketChannel() override {
    ::close(fd_write_);
    ::close(fd_read_);
  }

 protected:
  void send_bytes(std::span<const std::uint8_t> data) override {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_write_, data.data() + sent, data.size() - sent, 0);
      if (n <= 0) throw Error("socket send failed on channel " + name());
      sent += static_cast<std::size_t>(n);
    }
  }
  void recv_bytes(std::span<std::uint8_t> out) override {
    std::size_t got = 0;
    while (got < out.size()) {
      const ssize_t n = ::recv(fd_read_, out.data() + got, out.size() - got, 0);
      if (n <= 0) throw Error("socket recv failed on channel " + name());
      got += static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_write_ = -1;
  int fd_read_ = -1;
};

enum class TransportKind { InProcess, Socket };

inline std::unique_ptr<Channel> make_channel(TransportKind kind, std::string name) {
  if (kind == TransportKind::Socket)
    return std::make_unique<SocketChannel>(std::move(name));
  return std::make_unique<InProcessChannel>(std::move(name));
}

/// Directed protocol endpoint: stamps send rounds, enforces in-order receipt
/// of the expected type, and converts Abort frames into AbortError.
class Endpoint {
 public:
  explicit Endpoint(Channel* ch) : ch_(ch) {}

  void send(MsgType type, std::vector<std::uint8_t> payload) {
    ch_->send(Message{type, next_send_++, std::move(payload)});
  }
  void send_fields(MsgType type, std::span<const FieldElem> xs) {
    send(type, fields_to_bytes(xs));
  }

  Message recv(MsgType expected) {
    Message m = ch_->recv();
    if (m.type == MsgType::Abort) {
      const std::string reason(m.payload.begin(), m.payload.end());
      throw AbortError(reason, "abort received on channel " + ch_->name() + ": " + reason);
    }
    if (m.round != next_recv_)
      throw ProtocolError("out-of-order message on channel " + ch_->name());
    ++next_recv_;
    if (m.type != expected)
      throw ProtocolError("unexpected message type on channel " + ch_->name());
    return m;
  }
  std::vector<FieldElem> recv_fields(MsgType expected) {
    return bytes_to_fields(recv(expected).payload);
  }

  std::uint16_t next_send_round() const { return next_send_; }

  /// Best-effort abort notification; never throws.
  void send_abort(const std::string& check) noexcept {
    try {
      std::vector<std::uint8_t> payload(check.begin(), check.end());
      ch_->send(Message{MsgType::Abort, next_send_++, std::move(payload)});
    } catch (...) {
    }
  }

  Channel& channel() { return *ch_; }

 private:
  Channel* ch_;
  std::uint16_t next_send_ = 0;
  std::uint16_t next_recv_ = 0;
};

/// A bidirectional peer link made of two directed channels.
struct Duplex {
  Endpoint out;
  Endpoint in;
  Duplex(Channel* out_ch, Channel* in_ch) : out(out_ch), in(in_ch) {}
};

struct MeterRow {
  std::string channel;
  Phase phase;
  std::uint64_t bytes;
  std::uint64_t rounds;

  friend bool operator==(const MeterRow&, const MeterRow&) = default;
};

inline std::vector<MeterRow> meter_report(std::span<Channel* const> channels) {
  std::vector<MeterRow> rows;
  for (Channel* ch : channels) {
    for (Phase p : {Phase::Offline, Phase::Online}) {
      const auto st = ch->stats(p);
      rows.push_back({ch->name(), p, st.bytes, st.rounds});
    }
  }
  return rows;
}

}  // namespace camel
