#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "stfmm/schedule.hpp"

namespace stfmm {

struct Message {
  int sender = 0;
  int cluster = 0;
  MessageKind kind = MessageKind::moments_to_parent;
  std::vector<double> payload;
};

/// Little-endian frame: u32 magic, u32 sender, u32 cluster_id, u8 kind,
/// u32 payload_len (bytes), then payload_len / 8 doubles.
inline constexpr std::uint32_t wire_magic = 0x4d465453;
inline constexpr std::size_t wire_header_size = 17;

std::vector<std::uint8_t> encode_message(const Message& msg);
/// Payload length in bytes announced by a header; throws ProtocolError on a
/// bad magic or kind.
std::size_t frame_payload_size(std::span<const std::uint8_t> header);
/// Decodes one complete frame; throws ProtocolError when malformed.
Message decode_message(std::span<const std::uint8_t> frame);

/// Non-blocking point-to-point endpoint of one rank. Sending the same
/// (destination, cluster, kind) twice within a round is a ProtocolError.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual int rank() const = 0;
  virtual int size() const = 0;

  void send(int dest, const Message& msg);
  /// Complete messages received so far; never blocks.
  virtual std::vector<Message> poll() = 0;
  /// Starts a new round of tags (one matvec).
  void begin_round();

 protected:
  virtual void do_send(int dest, const Message& msg) = 0;

 private:
  std::mutex tag_mutex_;
  std::set<std::tuple<int, int, int>> sent_;
};

/// Random extra latency per message for the in-process network.
struct DeliveryDelay {
  std::uint64_t seed = 0;
  int max_us = 0;
};

/// Channels between ranks living in one process.
class InProcessNetwork {
 public:
  explicit InProcessNetwork(int n_ranks, DeliveryDelay delay = {});
  ~InProcessNetwork();

  int size() const { return static_cast<int>(endpoints_.size()); }
  Transport& endpoint(int rank);
  /// Later sends to or polls of this rank fail with TransportError.
  void disconnect(int rank);

 private:
  class Endpoint;
  struct Mailbox;
  std::vector<std::unique_ptr<Mailbox>> mailboxes_;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
  DeliveryDelay delay_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Loopback TCP sockets between ranks living in one process, one connection
/// per ordered rank pair. Sends are queued and written by a sender thread.
class TcpNetwork {
 public:
  explicit TcpNetwork(int n_ranks);
  ~TcpNetwork();

  int size() const { return static_cast<int>(endpoints_.size()); }
  Transport& endpoint(int rank);

 private:
  class Endpoint;
  std::vector<std::unique_ptr<Endpoint>> endpoints_;
};

}  // namespace stfmm
