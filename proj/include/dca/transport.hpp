#pragma once

// Frame transports: an in-process queue pair with optional seeded latency
// injection, and a TCP stream transport. Both deliver frames reliably and in
// order per connection.

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <utility>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "dca/protocol.hpp"

namespace dca {

using FrameObserver = std::function<void(const Frame&, bool outbound)>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Frame& f) = 0;
  // false on timeout; throws ConnectionLost when the peer is gone
  virtual bool recv(Frame& out, std::chrono::milliseconds timeout) = 0;
  virtual void close() = 0;

  void set_observer(FrameObserver obs) { observer_ = std::move(obs); }

 protected:
  void observe(const Frame& f, bool outbound) {
    if (observer_) observer_(f, outbound);
  }

 private:
  FrameObserver observer_;
};

struct LatencyConfig {
  double mean_ms = 0.0;  // 0 = deliver immediately
  uint64_t seed = 0;
};

namespace detail {

struct FrameQueue {
  using Clock = std::chrono::steady_clock;
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::pair<Clock::time_point, Frame>> items;
  Clock::time_point last_delivery = Clock::time_point::min();
  bool closed = false;

  void push(Frame f, std::chrono::duration<double, std::milli> delay) {
    std::lock_guard lock(mu);
    auto when = Clock::now() + std::chrono::duration_cast<Clock::duration>(delay);
    if (when < last_delivery) when = last_delivery;  // keep in-order delivery
    last_delivery = when;
    items.emplace_back(when, std::move(f));
    cv.notify_all();
  }

  bool pop(Frame& out, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu);
    auto deadline = Clock::now() + timeout;
    for (;;) {
      auto now = Clock::now();
      if (!items.empty() && items.front().first <= now) {
        out = std::move(items.front().second);
        items.pop_front();
        return true;
      }
      if (items.empty() && closed) throw ConnectionLost("in-process peer closed");
      if (now >= deadline) return false;
      auto wake = deadline;
      if (!items.empty() && items.front().first < wake) wake = items.front().first;
      cv.wait_until(lock, wake);
    }
  }

  void close() {
    std::lock_guard lock(mu);
    closed = true;
    cv.notify_all();
  }
};

struct Pipe {
  FrameQueue a_to_b, b_to_a;
  std::mutex rng_mu;
  std::mt19937_64 rng;
  std::exponential_distribution<double> dist;
  double mean_ms = 0.0;

  explicit Pipe(const LatencyConfig& cfg)
      : rng(cfg.seed), dist(cfg.mean_ms > 0 ? 1.0 / cfg.mean_ms : 1.0),
        mean_ms(cfg.mean_ms) {}

  double sample_delay_ms() {
    if (mean_ms <= 0.0) return 0.0;
    std::lock_guard lock(rng_mu);
    return dist(rng);
  }
};

}  // namespace detail

class InProcessTransport : public Transport {
 public:
  InProcessTransport(std::shared_ptr<detail::Pipe> pipe, bool is_a)
      : pipe_(std::move(pipe)), is_a_(is_a) {}

  ~InProcessTransport() override { close(); }

  void send(const Frame& f) override {
    observe(f, true);
    auto& q = is_a_ ? pipe_->a_to_b : pipe_->b_to_a;
    q.push(f, std::chrono::duration<double, std::milli>(pipe_->sample_delay_ms()));
  }

  bool recv(Frame& out, std::chrono::milliseconds timeout) override {
    auto& q = is_a_ ? pipe_->b_to_a : pipe_->a_to_b;
    if (!q.pop(out, timeout)) return false;
    observe(out, false);
    return true;
  }

  void close() override {
    pipe_->a_to_b.close();
    pipe_->b_to_a.close();
  }

 private:
  std::shared_ptr<detail::Pipe> pipe_;
  bool is_a_;
};

inline std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>>
make_in_process_pair(const LatencyConfig& cfg = {}) {
  auto pipe = std::make_shared<detail::Pipe>(cfg);
  return {std::make_unique<InProcessTransport>(pipe, true),
          std::make_unique<InProcessTransport>(pipe, false)};
}

class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }

  ~TcpTransport() override { close(); }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send(const Frame& f) override {
    auto bytes = encode_frame(f);
    std::lock_guard lock(send_mu_);
    size_t off = 0;
    while (off < bytes.size()) {
      ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw ConnectionLost("tcp send failed");
      off += static_cast<size_t>(n);
    }
    observe(f, true);
  }

  bool recv(Frame& out, std::chrono::milliseconds timeout) override {
    std::lock_guard lock(recv_mu_);
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (buffer_.size() >= Frame::kHeaderSize) {
        uint32_t payload_len = detail::get_u32(buffer_.data() + 20);
        if (payload_len > Frame::kMaxPayload)
          throw OversizePayload("payload length exceeds 16 MiB");
        if (buffer_.size() >= Frame::kHeaderSize + payload_len) {
          auto decoded = decode_frame(buffer_.data(), buffer_.size());
          buffer_.erase(buffer_.begin(),
                        buffer_.begin() + static_cast<long>(decoded.consumed));
          out = std::move(decoded.frame);
          observe(out, false);
          return true;
        }
      }
      auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) return false;
      struct pollfd pfd{fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (pr == 0) return false;
      if (pr < 0) throw ConnectionLost("tcp poll failed");
      uint8_t chunk[65536];
      ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (n == 0) throw ConnectionLost("tcp peer closed connection");
      if (n < 0) throw ConnectionLost("tcp recv failed");
      buffer_.insert(buffer_.end(), chunk, chunk + n);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
  std::mutex send_mu_, recv_mu_;
  std::vector<uint8_t> buffer_;
};

class TcpListener {
 public:
  explicit TcpListener(const std::string& host, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ConnectionLost("socket() failed");
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
      throw ConnectionLost("bad listen address " + host);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
      throw ConnectionLost("bind failed on " + host + ":" + std::to_string(port));
    if (::listen(fd_, 16) != 0) throw ConnectionLost("listen failed");
  }

  ~TcpListener() { close(); }

  uint16_t port() const {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    return ntohs(addr.sin_port);
  }

  std::unique_ptr<TcpTransport> accept(std::chrono::milliseconds timeout) {
    struct pollfd pfd{fd_, POLLIN, 0};
    int pr = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (pr == 0) return nullptr;
    if (pr < 0) throw ConnectionLost("accept poll failed");
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw ConnectionLost("accept failed");
    return std::make_unique<TcpTransport>(cfd);
  }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

inline std::unique_ptr<TcpTransport> tcp_connect(const std::string& host, uint16_t port,
                                                 std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectionLost("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      ::close(fd);
      throw ConnectionLost("bad host " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0)
      return std::make_unique<TcpTransport>(fd);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline)
      throw ConnectionLost("connect to " + host + ":" + std::to_string(port) +
                           " timed out");
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace dca
