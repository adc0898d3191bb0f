#pragma once

#include "hsi/harness/session.hpp"

#include <atomic>
#include <filesystem>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace hsi::harness {

/// TCP front end for Session. Each connection is one isolated session and
/// may speak either raw newline-delimited JSON or, after an HTTP upgrade,
/// WebSocket text frames carrying the same messages. Plain HTTP GETs are
/// answered from `static_dir` when one is configured.
class Server {
 public:
  Server(Scenario base, SessionOptions options = {}, std::optional<std::filesystem::path> static_dir = {});
  ~Server();

  /// Binds and listens; port 0 picks an ephemeral port.
  void listen(const std::string& host, int port);
  int port() const { return port_; }

  /// Accept loop; returns after stop().
  void run();
  void stop();

  /// Longest accepted message line in bytes; longer input closes the session.
  static constexpr std::size_t kMaxLine = 1 << 20;

 private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void serve_connection(int fd);
  /// Joins threads whose connection has closed. Caller holds conn_mutex_.
  void reap_finished();

  Scenario base_;
  SessionOptions options_;
  std::optional<std::filesystem::path> static_dir_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex conn_mutex_;
  std::list<Connection> connections_;
};

/// "host:port" or ":port" or "port".
std::pair<std::string, int> parse_address(const std::string& address);

}  // namespace hsi::harness
