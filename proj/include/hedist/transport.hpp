// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

// Length-prefixed message framing and the two carriers that move frames
// between the server and its workers.
//
// Frame layout, all integers big-endian:
//   u32 length of everything after this field
//   u8  version | u8 kind | u16 reserved (zero) | u32 worker id | u64 round
//   payload bytes

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hedist {

inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr size_t kFrameHeaderSize = 16;
inline constexpr size_t kDefaultMaxPayload = size_t{256} << 20;

enum class MsgKind : uint8_t {
  kHello = 1,
  kShard = 2,
  kInitParams = 3,
  kRefreshRequest = 4,
  kRefreshReply = 5,
  kDone = 6,
  kAbort = 7,
};

const char* msg_kind_name(MsgKind k) noexcept;

struct Message {
  uint8_t version = kProtocolVersion;
  MsgKind kind = MsgKind::kHello;
  uint32_t worker = 0;
  uint64_t round = 0;
  std::vector<uint8_t> payload;

  bool operator==(const Message&) const = default;
};

/// Length prefix included.
std::vector<uint8_t> encode_frame(const Message& m, size_t max_payload = kDefaultMaxPayload);
/// `frame` must hold exactly one frame, length prefix included.
Message decode_frame(std::span<const uint8_t> frame, size_t max_payload = kDefaultMaxPayload);

struct ChannelStats {
  uint64_t msgs_tx = 0;
  uint64_t msgs_rx = 0;
  uint64_t bytes_tx = 0;  // frame bytes, length prefix included
  uint64_t bytes_rx = 0;
  /// Time spent framing, copying and moving bytes. Time blocked waiting for
  /// the peer is excluded.
  double comm_seconds = 0;

  ChannelStats& operator+=(const ChannelStats& o);
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// Throws kTransportClosed once the peer is gone.
  virtual void send(const Message& m) = 0;
  virtual Message recv() = 0;
  virtual void close() = 0;

  const ChannelStats& stats() const noexcept { return stats_; }
  void reset_stats() noexcept { stats_ = {}; }
  /// Extra per-message delay on send, in milliseconds.
  void set_latency_ms(double ms) noexcept { latency_ms_ = ms; }

 protected:
  void delay() const;
  ChannelStats stats_;
  double latency_ms_ = 0;
};

/// Connected pair backed by in-memory queues.
std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>> make_inproc_pair();

class TcpListener {
 public:
  /// Port 0 picks a free port.
  TcpListener(const std::string& host, uint16_t port);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const noexcept { return port_; }
  /// A positive timeout raises kTransportClosed when nobody connects in time.
  std::unique_ptr<Endpoint> accept(double timeout_seconds = 0);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

std::unique_ptr<Endpoint> tcp_connect(const std::string& host, uint16_t port,
                                      double timeout_seconds = 10.0);

}  // namespace hedist
