#include <doctest.h>

#include <chrono>
#include <map>
#include <random>
#include <thread>

#include "stfmm/errors.hpp"
#include "stfmm/transport.hpp"

using namespace stfmm;

namespace {

Message make_message(int sender, int cluster, MessageKind kind, std::size_t n) {
  Message m;
  m.sender = sender;
  m.cluster = cluster;
  m.kind = kind;
  for (std::size_t i = 0; i < n; ++i) m.payload.push_back(0.5 * cluster + 1e-3 * i - 7.0);
  return m;
}

std::vector<Message> poll_until(Transport& t, std::size_t count) {
  std::vector<Message> got;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (got.size() < count && std::chrono::steady_clock::now() < deadline) {
    for (auto& m : t.poll()) got.push_back(std::move(m));
    std::this_thread::sleep_for(std::chrono::microseconds(50));
  }
  return got;
}

}  // namespace

TEST_CASE("wire framing") {
  const Message m = make_message(3, 41, MessageKind::locals_to_child, 5);
  const auto frame = encode_message(m);
  REQUIRE(frame.size() == wire_header_size + 5 * 8);
  CHECK(frame[0] == 0x53);
  CHECK(frame[3] == 0x4d);
  CHECK(frame[4] == 3);
  CHECK(frame[8] == 41);
  CHECK(frame[12] == 2);
  CHECK(frame_payload_size(frame) == 40);
  const Message back = decode_message(frame);
  CHECK(back.sender == 3);
  CHECK(back.cluster == 41);
  CHECK(back.kind == MessageKind::locals_to_child);
  CHECK(back.payload == m.payload);

  const auto empty = encode_message(make_message(0, 0, MessageKind::moments_to_parent, 0));
  CHECK(decode_message(empty).payload.empty());

  auto bad = frame;
  bad[0] ^= 0xff;
  CHECK_THROWS_AS(frame_payload_size(bad), ProtocolError);
  CHECK_THROWS_AS(decode_message(bad), ProtocolError);
  auto bad_kind = frame;
  bad_kind[12] = 9;
  CHECK_THROWS_AS(decode_message(bad_kind), ProtocolError);
  auto truncated = frame;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_message(truncated), ProtocolError);
}

TEST_CASE("in-process delivery and tags") {
  InProcessNetwork net(3);
  CHECK(net.size() == 3);
  auto& a = net.endpoint(0);
  auto& b = net.endpoint(1);
  CHECK(a.rank() == 0);
  CHECK(b.size() == 3);
  CHECK(b.poll().empty());

  a.send(1, make_message(0, 7, MessageKind::moments_to_parent, 4));
  const auto got = poll_until(b, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].cluster == 7);
  CHECK(got[0].payload.size() == 4);
  CHECK(net.endpoint(2).poll().empty());

  CHECK_THROWS_AS(a.send(1, make_message(0, 7, MessageKind::moments_to_parent, 4)), ProtocolError);
  CHECK_NOTHROW(a.send(1, make_message(0, 7, MessageKind::moments_to_interaction, 4)));
  CHECK_NOTHROW(a.send(2, make_message(0, 7, MessageKind::moments_to_parent, 4)));
  a.begin_round();
  CHECK_NOTHROW(a.send(1, make_message(0, 7, MessageKind::moments_to_parent, 4)));
  CHECK_THROWS_AS(a.send(5, make_message(0, 8, MessageKind::moments_to_parent, 1)), TransportError);
}

TEST_CASE("disconnect surfaces a transport error") {
  InProcessNetwork net(2);
  net.disconnect(1);
  CHECK_THROWS_AS(net.endpoint(0).send(1, make_message(0, 1, MessageKind::moments_to_parent, 1)),
                  TransportError);
  CHECK_THROWS_AS(net.endpoint(1).poll(), TransportError);
  CHECK_NOTHROW(net.endpoint(0).poll());
}

TEST_CASE("many delayed messages arrive exactly once") {
  const int ranks = 4, per_sender = 250;
  InProcessNetwork net(ranks, {12345, 200});
  std::vector<std::thread> senders;
  for (int r = 0; r < ranks; ++r)
    senders.emplace_back([&net, r] {
      std::mt19937 rng(r);
      for (int i = 0; i < per_sender; ++i) {
        int dest = static_cast<int>(rng() % (ranks - 1));
        if (dest >= r) ++dest;
        net.endpoint(r).send(dest, make_message(r, i, MessageKind::moments_to_interaction, 3));
      }
    });
  for (auto& t : senders) t.join();

  std::map<std::pair<int, int>, int> seen;
  std::size_t total = 0;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (total < static_cast<std::size_t>(ranks * per_sender) &&
         std::chrono::steady_clock::now() < deadline) {
    for (int r = 0; r < ranks; ++r)
      for (const auto& m : net.endpoint(r).poll()) {
        CHECK(m.sender != r);
        CHECK(m.payload == make_message(m.sender, m.cluster, m.kind, 3).payload);
        ++seen[{m.sender, m.cluster}];
        ++total;
      }
    std::this_thread::sleep_for(std::chrono::microseconds(100));
  }
  CHECK(total == static_cast<std::size_t>(ranks * per_sender));
  CHECK(seen.size() == static_cast<std::size_t>(ranks * per_sender));
  for (const auto& [key, count] : seen) CHECK(count == 1);
}

TEST_CASE("tcp loopback") {
  TcpNetwork net(3);
  CHECK(net.size() == 3);
  for (int from = 0; from < 3; ++from)
    for (int to = 0; to < 3; ++to)
      if (from != to)
        for (int i = 0; i < 20; ++i)
          net.endpoint(from).send(to, make_message(from, 100 * to + i, MessageKind::locals_to_child,
                                                   static_cast<std::size_t>(i * 37)));
  for (int r = 0; r < 3; ++r) {
    const auto got = poll_until(net.endpoint(r), 40);
    REQUIRE(got.size() == 40);
    std::map<int, int> next;  // per-sender order is preserved
    for (const auto& m : got) {
      CHECK(m.cluster == 100 * r + next[m.sender]);
      CHECK(m.payload == make_message(m.sender, m.cluster, m.kind, m.payload.size()).payload);
      CHECK(m.payload.size() == static_cast<std::size_t>(next[m.sender] * 37));
      ++next[m.sender];
    }
  }
}
