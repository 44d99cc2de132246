// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include "hedist/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "hedist/error.hpp"

namespace hedist {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void put_be(std::vector<uint8_t>& out, uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint64_t get_be(std::span<const uint8_t> in, size_t off, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | in[off + static_cast<size_t>(i)];
  return v;
}

bool valid_kind(uint8_t k) { return k >= 1 && k <= 7; }

}  // namespace

const char* msg_kind_name(MsgKind k) noexcept {
  switch (k) {
    case MsgKind::kHello:
      return "Hello";
    case MsgKind::kShard:
      return "Shard";
    case MsgKind::kInitParams:
      return "InitParams";
    case MsgKind::kRefreshRequest:
      return "RefreshRequest";
    case MsgKind::kRefreshReply:
      return "RefreshReply";
    case MsgKind::kDone:
      return "Done";
    case MsgKind::kAbort:
      return "Abort";
  }
  return "?";
}

std::vector<uint8_t> encode_frame(const Message& m, size_t max_payload) {
  require(m.payload.size() <= max_payload, ErrorCode::kOversize, "payload exceeds frame limit");
  require(valid_kind(static_cast<uint8_t>(m.kind)), ErrorCode::kBadKind, "unknown message kind");
  std::vector<uint8_t> out;
  out.reserve(4 + kFrameHeaderSize + m.payload.size());
  put_be(out, kFrameHeaderSize + m.payload.size(), 4);
  out.push_back(m.version);
  out.push_back(static_cast<uint8_t>(m.kind));
  put_be(out, 0, 2);
  put_be(out, m.worker, 4);
  put_be(out, m.round, 8);
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

Message decode_frame(std::span<const uint8_t> frame, size_t max_payload) {
  require(frame.size() >= 4 + kFrameHeaderSize, ErrorCode::kFrameTruncated, "frame shorter than header");
  const uint64_t len = get_be(frame, 0, 4);
  require(len >= kFrameHeaderSize, ErrorCode::kFrameTruncated, "frame length below header size");
  require(len - kFrameHeaderSize <= max_payload, ErrorCode::kOversize, "payload exceeds frame limit");
  require(frame.size() == 4 + len, ErrorCode::kFrameTruncated, "frame length does not match buffer");
  Message m;
  m.version = frame[4];
  require(m.version == kProtocolVersion, ErrorCode::kBadVersion, "unsupported protocol version");
  require(valid_kind(frame[5]), ErrorCode::kBadKind, "unknown message kind");
  m.kind = static_cast<MsgKind>(frame[5]);
  m.worker = static_cast<uint32_t>(get_be(frame, 8, 4));
  m.round = get_be(frame, 12, 8);
  m.payload.assign(frame.begin() + 4 + kFrameHeaderSize, frame.end());
  return m;
}

ChannelStats& ChannelStats::operator+=(const ChannelStats& o) {
  msgs_tx += o.msgs_tx;
  msgs_rx += o.msgs_rx;
  bytes_tx += o.bytes_tx;
  bytes_rx += o.bytes_rx;
  comm_seconds += o.comm_seconds;
  return *this;
}

void Endpoint::delay() const {
  if (latency_ms_ > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(latency_ms_));
}

namespace {

// One direction of an in-process channel. Frames, not messages, cross it so
// both carriers run the same encode and decode path.
struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<uint8_t>> frames;
  bool closed = false;
};

class InprocEndpoint final : public Endpoint {
 public:
  InprocEndpoint(std::shared_ptr<Queue> out, std::shared_ptr<Queue> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~InprocEndpoint() override { close(); }

  void send(const Message& m) override {
    delay();
    const auto t0 = Clock::now();
    auto frame = encode_frame(m);
    const size_t n = frame.size();
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) fail(ErrorCode::kTransportClosed, "peer closed the channel");
      out_->frames.push_back(std::move(frame));
    }
    out_->cv.notify_one();
    stats_.comm_seconds += since(t0);
    ++stats_.msgs_tx;
    stats_.bytes_tx += n;
  }

  Message recv() override {
    std::vector<uint8_t> frame;
    {
      std::unique_lock lock(in_->mu);
      in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
      if (in_->frames.empty()) fail(ErrorCode::kTransportClosed, "peer closed the channel");
      frame = std::move(in_->frames.front());
      in_->frames.pop_front();
    }
    const auto t0 = Clock::now();
    Message m = decode_frame(frame);
    stats_.comm_seconds += since(t0);
    ++stats_.msgs_rx;
    stats_.bytes_rx += frame.size();
    return m;
  }

  void close() override {
    for (auto* q : {out_.get(), in_.get()}) {
      {
        std::lock_guard lock(q->mu);
        q->closed = true;
      }
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> out_, in_;
};

class TcpEndpoint final : public Endpoint {
 public:
  explicit TcpEndpoint(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  ~TcpEndpoint() override { close(); }

  void send(const Message& m) override {
    delay();
    const auto t0 = Clock::now();
    const auto frame = encode_frame(m);
    size_t off = 0;
    while (off < frame.size()) {
      const ssize_t k = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (k < 0 && errno == EINTR) continue;
      if (k <= 0) fail(ErrorCode::kTransportClosed, "socket send failed");
      off += static_cast<size_t>(k);
    }
    stats_.comm_seconds += since(t0);
    ++stats_.msgs_tx;
    stats_.bytes_tx += frame.size();
  }

  Message recv() override {
    wait_readable();
    const auto t0 = Clock::now();
    std::vector<uint8_t> frame(4);
    read_exact(frame.data(), 4);
    const uint64_t len = get_be(frame, 0, 4);
    require(len >= kFrameHeaderSize, ErrorCode::kFrameTruncated, "frame length below header size");
    require(len - kFrameHeaderSize <= kDefaultMaxPayload, ErrorCode::kOversize,
            "payload exceeds frame limit");
    frame.resize(4 + len);
    read_exact(frame.data() + 4, len);
    Message m = decode_frame(frame);
    stats_.comm_seconds += since(t0);
    ++stats_.msgs_rx;
    stats_.bytes_rx += frame.size();
    return m;
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  void wait_readable() {
    if (fd_ < 0) fail(ErrorCode::kTransportClosed, "socket closed");
    pollfd p{fd_, POLLIN, 0};
    while (::poll(&p, 1, -1) < 0) {
      if (errno != EINTR) fail(ErrorCode::kTransportClosed, "socket poll failed");
    }
  }

  void read_exact(uint8_t* dst, size_t n) {
    size_t off = 0;
    while (off < n) {
      const ssize_t k = ::recv(fd_, dst + off, n - off, 0);
      if (k < 0 && errno == EINTR) continue;
      if (k == 0) fail(ErrorCode::kTransportClosed, "peer closed the connection");
      if (k < 0) fail(ErrorCode::kTransportClosed, "socket receive failed");
      off += static_cast<size_t>(k);
    }
  }

  int fd_;
};

addrinfo* resolve(const std::string& host, uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0)
    fail(ErrorCode::kIo, "cannot resolve " + host);
  return res;
}

}  // namespace

std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>> make_inproc_pair() {
  auto a = std::make_shared<Queue>();
  auto b = std::make_shared<Queue>();
  return {std::make_unique<InprocEndpoint>(a, b), std::make_unique<InprocEndpoint>(b, a)};
}

TcpListener::TcpListener(const std::string& host, uint16_t port) {
  addrinfo* res = resolve(host, port, true);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0) {
    ::freeaddrinfo(res);
    fail(ErrorCode::kIo, "cannot create socket");
  }
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const int rc = ::bind(fd_, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0 || ::listen(fd_, 64) != 0) {
    ::close(fd_);
    fail(ErrorCode::kIo, "cannot listen on " + host + ":" + std::to_string(port));
  }
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Endpoint> TcpListener::accept(double timeout_seconds) {
  for (;;) {
    if (timeout_seconds > 0) {
      pollfd pfd{fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(timeout_seconds * 1000));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0)
        fail(ErrorCode::kTransportClosed, "no connection within " +
                                              std::to_string(timeout_seconds) + " s");
      if (rc < 0) fail(ErrorCode::kIo, "poll failed");
    }
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c >= 0) return std::make_unique<TcpEndpoint>(c);
    if (errno != EINTR) fail(ErrorCode::kIo, "accept failed");
  }
}

std::unique_ptr<Endpoint> tcp_connect(const std::string& host, uint16_t port,
                                      double timeout_seconds) {
  const auto deadline = Clock::now() + std::chrono::duration<double>(timeout_seconds);
  for (;;) {
    addrinfo* res = resolve(host, port, false);
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    const int rc = fd >= 0 ? ::connect(fd, res->ai_addr, res->ai_addrlen) : -1;
    ::freeaddrinfo(res);
    if (rc == 0) return std::make_unique<TcpEndpoint>(fd);
    if (fd >= 0) ::close(fd);
    if (Clock::now() > deadline)
      fail(ErrorCode::kTransportClosed, "cannot connect to " + host + ":" + std::to_string(port));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace hedist
