// Copyright 2026 The hedist Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "backend_fixture.hpp"
#include "hedist/error.hpp"
#include "hedist/transport.hpp"

namespace hedist {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{0};
}

Message msg(MsgKind kind, uint32_t worker, uint64_t round, std::vector<uint8_t> payload = {}) {
  Message m;
  m.kind = kind;
  m.worker = worker;
  m.round = round;
  m.payload = std::move(payload);
  return m;
}

TEST(Inproc, LoopbackOneByte) {
  auto [a, b] = make_inproc_pair();
  a->send(msg(MsgKind::kHello, 3, 0, {0xab}));
  const Message m = b->recv();
  EXPECT_EQ(m.payload, std::vector<uint8_t>{0xab});
  EXPECT_EQ(m.worker, 3u);
}

TEST(Inproc, Fifo) {
  auto [a, b] = make_inproc_pair();
  for (uint64_t r = 1; r <= 3; ++r) a->send(msg(MsgKind::kRefreshRequest, 0, r));
  for (uint64_t r = 1; r <= 3; ++r) EXPECT_EQ(b->recv().round, r);
}

TEST(Inproc, ClosedPeer) {
  auto [a, b] = make_inproc_pair();
  b->close();
  EXPECT_EQ(code_of([&] { a->send(msg(MsgKind::kHello, 0, 0)); }), ErrorCode::kTransportClosed);
  EXPECT_EQ(code_of([&] { a->recv(); }), ErrorCode::kTransportClosed);
}

TEST(Inproc, RecvBlocksUntilSend) {
  auto [a, b] = make_inproc_pair();
  std::thread t([&, &a = a] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    a->send(msg(MsgKind::kDone, 1, 9));
  });
  EXPECT_EQ(b->recv().round, 9u);
  t.join();
}

TEST(Inproc, CiphertextRoundTripBitExact) {
  for (BackendKind kind : {BackendKind::kLattice, BackendKind::kMock}) {
    const auto& env = testing::backend_env("small");
    auto be = testing::make_backend(env, kind, 5);
    std::vector<double> v(be->slots());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.1 * static_cast<double>(i));
    const Ciphertext ct = be->encrypt(v, be->max_level());
    std::vector<uint8_t> bytes;
    be->serialize(ct, bytes);

    auto [a, b] = make_inproc_pair();
    a->send(msg(MsgKind::kRefreshRequest, 0, 1, bytes));
    const Message m = b->recv();
    ASSERT_EQ(m.payload, bytes);
    size_t off = 0;
    const Ciphertext back = be->deserialize(m.payload, off);
    EXPECT_EQ(off, bytes.size());
    std::vector<uint8_t> again;
    be->serialize(back, again);
    EXPECT_EQ(again, bytes);
    EXPECT_EQ(be->decrypt(back), be->decrypt(ct));
  }
}

TEST(Frame, EmptyHelloIsHeaderOnly) {
  const auto f = encode_frame(msg(MsgKind::kHello, 0, 0));
  ASSERT_EQ(f.size(), 4 + kFrameHeaderSize);
  const uint32_t len = (uint32_t{f[0]} << 24) | (uint32_t{f[1]} << 16) | (uint32_t{f[2]} << 8) | f[3];
  EXPECT_EQ(len, kFrameHeaderSize);
}

TEST(Frame, HeaderFieldsBigEndian) {
  const auto f = encode_frame(msg(MsgKind::kShard, 0x01020304u, 0x0a0b0c0d0e0f1011ull, {7}));
  const std::vector<uint8_t> want = {0, 0, 0, 17, kProtocolVersion, 2, 0, 0, 1, 2, 3, 4,
                                     0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f, 0x10, 0x11, 7};
  EXPECT_EQ(f, want);
}

TEST(Frame, DistinctErrorCodes) {
  auto f = encode_frame(msg(MsgKind::kHello, 0, 0, {1, 2, 3}));
  auto bad_version = f;
  bad_version[4] = 255;
  EXPECT_EQ(code_of([&] { decode_frame(bad_version); }), ErrorCode::kBadVersion);

  auto bad_kind = f;
  bad_kind[5] = 42;
  EXPECT_EQ(code_of([&] { decode_frame(bad_kind); }), ErrorCode::kBadKind);

  const std::span<const uint8_t> cut(f.data(), f.size() - 1);
  EXPECT_EQ(code_of([&] { decode_frame(cut); }), ErrorCode::kFrameTruncated);
  EXPECT_EQ(code_of([&] { decode_frame(std::span<const uint8_t>(f.data(), 6)); }),
            ErrorCode::kFrameTruncated);

  EXPECT_EQ(code_of([&] { decode_frame(f, 2); }), ErrorCode::kOversize);
  EXPECT_EQ(code_of([&] { encode_frame(msg(MsgKind::kHello, 0, 0, {1, 2, 3}), 2); }),
            ErrorCode::kOversize);
}

TEST(Frame, FuzzRoundTrip) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kind(1, 7), len(0, 300), byte(0, 255);
  for (int i = 0; i < 10000; ++i) {
    Message m = msg(static_cast<MsgKind>(kind(rng)), static_cast<uint32_t>(rng()), rng());
    m.payload.resize(static_cast<size_t>(len(rng)));
    for (auto& b : m.payload) b = static_cast<uint8_t>(byte(rng));
    const auto f = encode_frame(m);
    ASSERT_EQ(f.size(), 4 + kFrameHeaderSize + m.payload.size());
    ASSERT_EQ(decode_frame(f), m);
  }
}

TEST(Accounting, CountsAndBytes) {
  auto [srv, wrk] = make_inproc_pair();
  const Message req = msg(MsgKind::kRefreshRequest, 0, 1, std::vector<uint8_t>(100, 1));
  const Message rep = msg(MsgKind::kRefreshReply, 0, 1, std::vector<uint8_t>(50, 2));
  wrk->send(req);
  srv->recv();
  srv->send(rep);
  wrk->recv();
  EXPECT_EQ(srv->stats().msgs_rx, 1u);
  EXPECT_EQ(srv->stats().msgs_tx, 1u);
  EXPECT_EQ(wrk->stats().bytes_tx, encode_frame(req).size());
  EXPECT_EQ(srv->stats().bytes_rx, encode_frame(req).size());
  EXPECT_EQ(srv->stats().bytes_tx, encode_frame(rep).size());
  srv->reset_stats();
  EXPECT_EQ(srv->stats().msgs_tx, 0u);
  EXPECT_EQ(srv->stats().bytes_rx, 0u);
}

TEST(Tcp, LoopbackFifoAndAccounting) {
  TcpListener listener("127.0.0.1", 0);
  ASSERT_NE(listener.port(), 0);
  std::unique_ptr<Endpoint> server_side;
  std::thread acceptor([&] { server_side = listener.accept(); });
  auto client = tcp_connect("127.0.0.1", listener.port());
  acceptor.join();

  std::vector<uint8_t> big(1 << 20);
  for (size_t i = 0; i < big.size(); ++i) big[i] = static_cast<uint8_t>(i * 31);
  std::thread sender([&] {
    client->send(msg(MsgKind::kHello, 2, 0));
    client->send(msg(MsgKind::kRefreshRequest, 2, 1, big));
    client->send(msg(MsgKind::kDone, 2, 2, {9}));
  });
  const Message a = server_side->recv();
  const Message b = server_side->recv();
  const Message c = server_side->recv();
  sender.join();
  EXPECT_EQ(a.kind, MsgKind::kHello);
  EXPECT_EQ(b.payload, big);
  EXPECT_EQ(c.round, 2u);
  EXPECT_EQ(server_side->stats().msgs_rx, 3u);
  EXPECT_EQ(server_side->stats().bytes_rx, client->stats().bytes_tx);
  EXPECT_EQ(client->stats().bytes_tx, 3 * (4 + kFrameHeaderSize) + big.size() + 1);
}

TEST(Tcp, ClosedPeer) {
  TcpListener listener("127.0.0.1", 0);
  std::unique_ptr<Endpoint> server_side;
  std::thread acceptor([&] { server_side = listener.accept(); });
  auto client = tcp_connect("127.0.0.1", listener.port());
  acceptor.join();
  client->close();
  EXPECT_EQ(code_of([&] { server_side->recv(); }), ErrorCode::kTransportClosed);
}

TEST(Tcp, ConnectTimeout) {
  uint16_t port;
  {
    TcpListener l("127.0.0.1", 0);
    port = l.port();
  }
  EXPECT_EQ(code_of([&] { tcp_connect("127.0.0.1", port, 0.1); }), ErrorCode::kTransportClosed);
}

}  // namespace
}  // namespace hedist
