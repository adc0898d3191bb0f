#include "hsi/harness/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <openssl/evp.h>
#include <openssl/sha.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace hsi::harness {
namespace {

bool write_all(int fd, const void* data, std::size_t size) {
  const char* p = static_cast<const char*>(data);
  while (size > 0) {
    const ssize_t n = ::send(fd, p, size, MSG_NOSIGNAL);
    if (n <= 0) return false;
    p += n;
    size -= static_cast<std::size_t>(n);
  }
  return true;
}

/// Buffered reader over a socket.
class Reader {
 public:
  explicit Reader(int fd) : fd_(fd) {}

  /// Reads up to '\n'. Returns false on EOF or when the line exceeds `limit`.
  bool line(std::string& out, std::size_t limit, bool& too_long) {
    too_long = false;
    out.clear();
    for (;;) {
      const auto nl = std::find(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end(), '\n');
      if (nl != buf_.end()) {
        out.append(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), nl);
        pos_ = static_cast<std::size_t>(nl - buf_.begin()) + 1;
        if (!out.empty() && out.back() == '\r') out.pop_back();
        return true;
      }
      out.append(buf_.begin() + static_cast<std::ptrdiff_t>(pos_), buf_.end());
      pos_ = buf_.size();
      if (out.size() > limit) {
        too_long = true;
        return false;
      }
      if (!fill()) return false;
    }
  }

  bool bytes(void* dst, std::size_t n) {
    char* d = static_cast<char*>(dst);
    while (n > 0) {
      if (pos_ == buf_.size() && !fill()) return false;
      const std::size_t take = std::min(n, buf_.size() - pos_);
      std::memcpy(d, buf_.data() + pos_, take);
      pos_ += take;
      d += take;
      n -= take;
    }
    return true;
  }

  /// Looks at the first bytes without consuming them.
  bool peek(std::size_t n, std::string& out) {
    while (buf_.size() - pos_ < n)
      if (!fill()) break;
    out.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
               buf_.begin() + static_cast<std::ptrdiff_t>(std::min(buf_.size(), pos_ + n)));
    return !out.empty();
  }

 private:
  bool fill() {
    if (pos_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
      pos_ = 0;
    }
    std::array<char, 4096> chunk{};
    const ssize_t n = ::recv(fd_, chunk.data(), chunk.size(), 0);
    if (n <= 0) return false;
    buf_.insert(buf_.end(), chunk.begin(), chunk.begin() + n);
    return true;
  }

  int fd_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::string websocket_accept(const std::string& key) {
  const std::string magic = key + "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  std::array<unsigned char, SHA_DIGEST_LENGTH> digest{};
  SHA1(reinterpret_cast<const unsigned char*>(magic.data()), magic.size(), digest.data());
  std::array<unsigned char, 4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1> out{};
  const int n = EVP_EncodeBlock(out.data(), digest.data(), SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(out.data()), static_cast<std::size_t>(n));
}

bool send_ws_frame(int fd, std::uint8_t opcode, const std::string& payload) {
  std::string frame;
  frame.push_back(static_cast<char>(0x80 | opcode));
  const std::size_t n = payload.size();
  if (n < 126) {
    frame.push_back(static_cast<char>(n));
  } else if (n <= 0xFFFF) {
    frame.push_back(126);
    frame.push_back(static_cast<char>((n >> 8) & 0xFF));
    frame.push_back(static_cast<char>(n & 0xFF));
  } else {
    frame.push_back(127);
    for (int i = 7; i >= 0; --i) frame.push_back(static_cast<char>((static_cast<std::uint64_t>(n) >> (8 * i)) & 0xFF));
  }
  frame += payload;
  return write_all(fd, frame.data(), frame.size());
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

void http_reply(int fd, int status, const std::string& reason, const std::string& type, const std::string& body) {
  std::ostringstream os;
  os << "HTTP/1.1 " << status << ' ' << reason << "\r\nContent-Type: " << type
     << "\r\nContent-Length: " << body.size() << "\r\nConnection: close\r\n\r\n"
     << body;
  const std::string s = os.str();
  write_all(fd, s.data(), s.size());
}

}  // namespace

std::pair<std::string, int> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  std::string host = "127.0.0.1";
  std::string port = address;
  if (colon != std::string::npos) {
    if (colon > 0) host = address.substr(0, colon);
    port = address.substr(colon + 1);
  }
  try {
    const int p = std::stoi(port);
    if (p < 0 || p > 65535) throw InvalidInput("port out of range");
    return {host, p};
  } catch (const std::logic_error&) {
    throw InvalidInput("invalid address '" + address + "'");
  }
}

Server::Server(Scenario base, SessionOptions options, std::optional<std::filesystem::path> static_dir)
    : base_(std::move(base)), options_(options), static_dir_(std::move(static_dir)) {}

Server::~Server() { stop(); }

void Server::listen(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr)
    throw InvalidInput("cannot resolve " + host);
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  if (listen_fd_ < 0 || ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 16) != 0) {
    ::freeaddrinfo(res);
    throw InvalidInput("cannot bind " + host + ":" + std::to_string(port) + ": " + std::strerror(errno));
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

void Server::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      continue;
    }
    std::lock_guard lock(conn_mutex_);
    reap_finished();
    Connection& c = connections_.emplace_back();
    c.fd = fd;
    c.thread = std::thread([this, &c] {
      serve_connection(c.fd);
      std::lock_guard lock(conn_mutex_);
      ::close(c.fd);
      c.done = true;
    });
  }
}

void Server::reap_finished() {
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (it->done) {
      it->thread.join();
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  std::list<Connection> conns;
  {
    std::lock_guard lock(conn_mutex_);
    for (auto& c : connections_)
      if (!c.done) ::shutdown(c.fd, SHUT_RDWR);
    conns.splice(conns.end(), connections_);
  }
  for (auto& c : conns)
    if (c.thread.joinable()) c.thread.join();
}

void Server::serve_connection(int fd) {
  Reader in(fd);
  std::string head;
  in.peek(4, head);

  if (head == "GET ") {
    std::string request, line;
    bool too_long = false;
    in.line(request, 8192, too_long);
    std::map<std::string, std::string> headers;
    while (in.line(line, 8192, too_long) && !line.empty()) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
    }
    std::istringstream rl(request);
    std::string method, target;
    rl >> method >> target;

    if (lower(headers["upgrade"]) == "websocket" && headers.count("sec-websocket-key")) {
      const std::string resp = "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                               "Sec-WebSocket-Accept: " +
                               websocket_accept(headers["sec-websocket-key"]) + "\r\n\r\n";
      write_all(fd, resp.data(), resp.size());

      Session session(base_, [fd](const nlohmann::json& m) { send_ws_frame(fd, 0x1, m.dump()); }, options_);
      std::string message;
      for (;;) {
        std::array<unsigned char, 2> hdr{};
        if (!in.bytes(hdr.data(), 2)) break;
        const bool fin = hdr[0] & 0x80;
        const std::uint8_t opcode = hdr[0] & 0x0F;
        const bool masked = hdr[1] & 0x80;
        std::uint64_t len = hdr[1] & 0x7F;
        if (len == 126) {
          std::array<unsigned char, 2> ext{};
          if (!in.bytes(ext.data(), 2)) break;
          len = (static_cast<std::uint64_t>(ext[0]) << 8) | ext[1];
        } else if (len == 127) {
          std::array<unsigned char, 8> ext{};
          if (!in.bytes(ext.data(), 8)) break;
          len = 0;
          for (unsigned char b : ext) len = (len << 8) | b;
        }
        if (message.size() + len > kMaxLine) {
          send_ws_frame(fd, 0x1, nlohmann::json{{"type", "Error"}, {"msg", "message too large"}}.dump());
          break;
        }
        std::array<unsigned char, 4> mask{};
        if (masked && !in.bytes(mask.data(), 4)) break;
        std::string payload(len, '\0');
        if (len > 0 && !in.bytes(payload.data(), len)) break;
        if (masked)
          for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<char>(payload[i] ^ mask[i % 4]);
        if (opcode == 0x8) {
          send_ws_frame(fd, 0x8, "");
          break;
        }
        if (opcode == 0x9) {
          send_ws_frame(fd, 0xA, payload);
          continue;
        }
        if (opcode == 0x1 || opcode == 0x0) {
          message += payload;
          if (!fin) continue;
          std::istringstream lines(message);
          std::string l;
          while (std::getline(lines, l))
            if (!trim(l).empty()) session.handle_line(l);
          message.clear();
        }
      }
    } else if (static_dir_) {
      std::string path = target.substr(0, target.find('?'));
      if (path == "/") path = "/index.html";
      const auto file = (*static_dir_ / path.substr(1)).lexically_normal();
      const auto root = static_dir_->lexically_normal();
      std::ifstream f(file, std::ios::binary);
      const bool inside = file.string().rfind(root.string(), 0) == 0;
      if (inside && f) {
        std::ostringstream body;
        body << f.rdbuf();
        http_reply(fd, 200, "OK", content_type(file), body.str());
      } else {
        http_reply(fd, 404, "Not Found", "text/plain", "not found\n");
      }
    } else {
      http_reply(fd, 404, "Not Found", "text/plain", "no static assets configured\n");
    }
  } else {
    Session session(base_,
                    [fd](const nlohmann::json& m) {
                      const std::string s = m.dump() + "\n";
                      write_all(fd, s.data(), s.size());
                    },
                    options_);
    std::string line;
    bool too_long = false;
    while (in.line(line, kMaxLine, too_long)) {
      if (!trim(line).empty()) session.handle_line(line);
    }
    if (too_long) {
      const std::string s = nlohmann::json{{"type", "Error"}, {"msg", "message exceeds 1 MiB; closing"}}.dump() + "\n";
      write_all(fd, s.data(), s.size());
    } else {
      // Client finished sending; let a running execution stream to the end.
      while (session.executing() && !stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ::shutdown(fd, SHUT_RDWR);
}

}  // namespace hsi::harness
