#include "stfmm/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <string>
#include <thread>

#include "stfmm/errors.hpp"

namespace stfmm {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const Message& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(wire_header_size + 8 * msg.payload.size());
  put_u32(out, wire_magic);
  put_u32(out, static_cast<std::uint32_t>(msg.sender));
  put_u32(out, static_cast<std::uint32_t>(msg.cluster));
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  put_u32(out, static_cast<std::uint32_t>(8 * msg.payload.size()));
  for (double d : msg.payload) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

std::size_t frame_payload_size(std::span<const std::uint8_t> header) {
  if (header.size() < wire_header_size) throw ProtocolError("short frame header");
  if (get_u32(header.data()) != wire_magic) throw ProtocolError("bad frame magic");
  if (header[12] > static_cast<std::uint8_t>(MessageKind::locals_to_child))
    throw ProtocolError("unknown message kind " + std::to_string(header[12]));
  const std::size_t len = get_u32(header.data() + 13);
  if (len % 8 != 0) throw ProtocolError("payload length is not a multiple of 8");
  return len;
}

Message decode_message(std::span<const std::uint8_t> frame) {
  const std::size_t len = frame_payload_size(frame);
  if (frame.size() != wire_header_size + len) throw ProtocolError("frame length mismatch");
  Message msg;
  msg.sender = static_cast<int>(get_u32(frame.data() + 4));
  msg.cluster = static_cast<int>(get_u32(frame.data() + 8));
  msg.kind = static_cast<MessageKind>(frame[12]);
  msg.payload.resize(len / 8);
  const std::uint8_t* p = frame.data() + wire_header_size;
  for (std::size_t k = 0; k < msg.payload.size(); ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[8 * k + i]) << (8 * i);
    std::memcpy(&msg.payload[k], &bits, 8);
  }
  return msg;
}

void Transport::send(int dest, const Message& msg) {
  if (dest < 0 || dest >= size()) throw TransportError("send to unknown rank " + std::to_string(dest));
  {
    std::lock_guard lock(tag_mutex_);
    if (!sent_.insert({dest, msg.cluster, static_cast<int>(msg.kind)}).second) {
      throw ProtocolError("duplicate tag (cluster " + std::to_string(msg.cluster) + ", " +
                          message_kind_name(msg.kind) + ") to rank " + std::to_string(dest));
    }
  }
  do_send(dest, msg);
}

void Transport::begin_round() {
  std::lock_guard lock(tag_mutex_);
  sent_.clear();
}

// In-process network

struct InProcessNetwork::Mailbox {
  struct Pending {
    std::chrono::steady_clock::time_point ready;
    Message msg;
  };
  std::mutex mutex;
  std::deque<Pending> queue;
  bool closed = false;
};

class InProcessNetwork::Endpoint : public Transport {
 public:
  Endpoint(InProcessNetwork* net, int rank) : net_(net), rank_(rank) {}
  int rank() const override { return rank_; }
  int size() const override { return net_->size(); }

  std::vector<Message> poll() override {
    auto& box = *net_->mailboxes_[rank_];
    std::lock_guard lock(box.mutex);
    if (box.closed) throw TransportError("rank " + std::to_string(rank_) + " is disconnected");
    const auto now = std::chrono::steady_clock::now();
    std::vector<Message> out;
    for (auto it = box.queue.begin(); it != box.queue.end();) {
      if (it->ready <= now) {
        out.push_back(std::move(it->msg));
        it = box.queue.erase(it);
      } else {
        ++it;
      }
    }
    return out;
  }

 protected:
  void do_send(int dest, const Message& msg) override {
    auto ready = std::chrono::steady_clock::now();
    if (net_->delay_.max_us > 0) {
      std::lock_guard lock(net_->rng_mutex_);
      std::uniform_int_distribution<int> d(0, net_->delay_.max_us);
      ready += std::chrono::microseconds(d(net_->rng_));
    }
    auto& box = *net_->mailboxes_[dest];
    std::lock_guard lock(box.mutex);
    if (box.closed) throw TransportError("rank " + std::to_string(dest) + " is disconnected");
    box.queue.push_back({ready, msg});
  }

 private:
  InProcessNetwork* net_;
  int rank_;
};

InProcessNetwork::InProcessNetwork(int n_ranks, DeliveryDelay delay)
    : delay_(delay), rng_(delay.seed) {
  if (n_ranks < 1) throw ConfigError("rank count must be >= 1");
  for (int r = 0; r < n_ranks; ++r) {
    mailboxes_.push_back(std::make_unique<Mailbox>());
    endpoints_.push_back(std::make_unique<Endpoint>(this, r));
  }
}

InProcessNetwork::~InProcessNetwork() = default;

Transport& InProcessNetwork::endpoint(int rank) { return *endpoints_[rank]; }

void InProcessNetwork::disconnect(int rank) {
  auto& box = *mailboxes_[rank];
  std::lock_guard lock(box.mutex);
  box.closed = true;
  box.queue.clear();
}

// TCP network

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        std::this_thread::yield();
        continue;
      }
      throw TransportError(std::string("socket write failed: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

void read_all(int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::recv(fd, data, n, 0);
    if (k == 0) throw TransportError("connection closed during handshake");
    if (k < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
  }
}

}  // namespace

class TcpNetwork::Endpoint : public Transport {
 public:
  Endpoint(int rank, int size) : rank_(rank), size_(size), out_(size, -1) {}

  ~Endpoint() override {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    if (sender_.joinable()) sender_.join();
    for (int fd : out_)
      if (fd >= 0) ::close(fd);
    for (auto& in : in_) ::close(in.fd);
    if (listener_ >= 0) ::close(listener_);
  }

  int rank() const override { return rank_; }
  int size() const override { return size_; }

  std::vector<Message> poll() override {
    {
      std::lock_guard lock(mutex_);
      if (!error_.empty()) throw TransportError(error_);
    }
    std::vector<Message> out;
    std::uint8_t chunk[65536];
    for (auto& in : in_) {
      for (;;) {
        const ssize_t k = ::recv(in.fd, chunk, sizeof chunk, 0);
        if (k > 0) {
          in.buffer.insert(in.buffer.end(), chunk, chunk + k);
          continue;
        }
        if (k == 0) {
          in.closed = true;
          break;
        }
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) break;
        throw TransportError(std::string("socket read failed: ") + std::strerror(errno));
      }
      std::size_t pos = 0;
      while (in.buffer.size() - pos >= wire_header_size) {
        const std::span<const std::uint8_t> head(in.buffer.data() + pos, wire_header_size);
        const std::size_t len = frame_payload_size(head);
        if (in.buffer.size() - pos < wire_header_size + len) break;
        out.push_back(decode_message({in.buffer.data() + pos, wire_header_size + len}));
        pos += wire_header_size + len;
      }
      in.buffer.erase(in.buffer.begin(), in.buffer.begin() + static_cast<std::ptrdiff_t>(pos));
      if (in.closed) throw TransportError("peer closed the connection");
    }
    return out;
  }

  void start_sender() { sender_ = std::thread([this] { sender_loop(); }); }

  int rank_;
  int size_;
  int listener_ = -1;
  int port_ = 0;
  std::vector<int> out_;
  struct Incoming {
    int fd;
    std::vector<std::uint8_t> buffer;
    bool closed = false;
  };
  std::vector<Incoming> in_;

 protected:
  void do_send(int dest, const Message& msg) override {
    auto frame = encode_message(msg);
    std::lock_guard lock(mutex_);
    if (!error_.empty()) throw TransportError(error_);
    queue_.push_back({dest, std::move(frame)});
    cv_.notify_one();
  }

 private:
  void sender_loop() {
    for (;;) {
      std::pair<int, std::vector<std::uint8_t>> item;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
        if (queue_.empty()) return;
        item = std::move(queue_.front());
        queue_.pop_front();
      }
      try {
        write_all(out_[item.first], item.second.data(), item.second.size());
      } catch (const TransportError& e) {
        std::lock_guard lock(mutex_);
        error_ = e.what();
      }
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::pair<int, std::vector<std::uint8_t>>> queue_;
  bool stop_ = false;
  std::string error_;
  std::thread sender_;
};

TcpNetwork::TcpNetwork(int n_ranks) {
  if (n_ranks < 1) throw ConfigError("rank count must be >= 1");
  for (int r = 0; r < n_ranks; ++r) {
    auto ep = std::make_unique<Endpoint>(r, n_ranks);
    ep->listener_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (ep->listener_ < 0) throw TransportError("cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(ep->listener_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(ep->listener_, n_ranks + 4) != 0) {
      throw TransportError(std::string("cannot listen on loopback: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(ep->listener_, reinterpret_cast<sockaddr*>(&addr), &len);
    ep->port_ = ntohs(addr.sin_port);
    endpoints_.push_back(std::move(ep));
  }
  for (int from = 0; from < n_ranks; ++from) {
    for (int to = 0; to < n_ranks; ++to) {
      if (from == to) continue;
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(static_cast<std::uint16_t>(endpoints_[to]->port_));
      if (fd < 0 || ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
        throw TransportError(std::string("cannot connect: ") + std::strerror(errno));
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      std::vector<std::uint8_t> hello;
      put_u32(hello, static_cast<std::uint32_t>(from));
      write_all(fd, hello.data(), hello.size());
      endpoints_[from]->out_[to] = fd;
      const int in = ::accept(endpoints_[to]->listener_, nullptr, nullptr);
      if (in < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
      std::uint8_t buf[4];
      read_all(in, buf, 4);
      if (static_cast<int>(get_u32(buf)) != from) throw ProtocolError("handshake mismatch");
      ::fcntl(in, F_SETFL, ::fcntl(in, F_GETFL) | O_NONBLOCK);
      endpoints_[to]->in_.push_back({in, {}, false});
    }
  }
  for (auto& ep : endpoints_) ep->start_sender();
}

TcpNetwork::~TcpNetwork() = default;

Transport& TcpNetwork::endpoint(int rank) { return *endpoints_[rank]; }

}  // namespace stfmm
