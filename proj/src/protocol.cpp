#include "ean/protocol.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "ean/errors.hpp"

extern char** environ;

namespace ean {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kMaxLine = 1 << 20;

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

std::optional<std::uint64_t> read_id(const json& j) {
  if (!j.is_object()) return std::nullopt;
  auto it = j.find("id");
  if (it == j.end() || !it->is_number_unsigned()) return std::nullopt;
  return it->get<std::uint64_t>();
}

}  // namespace

// ---------------------------------------------------------------------------
// Message codec

namespace wire {

std::string format_request(std::uint64_t id, const std::string& scheme) {
  return json{{"id", id}, {"op", "eval"}, {"scheme", scheme}}.dump();
}

std::string format_response(std::uint64_t id, double g_val) { return json{{"id", id}, {"g_val", g_val}}.dump(); }

std::string format_error(std::uint64_t id, const std::string& message) {
  return json{{"id", id}, {"error", message}}.dump(-1, ' ', false, json::error_handler_t::replace);
}

Request parse_request(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("request is not a JSON object", line);
  const auto id = read_id(j);
  if (!id) throw ProtocolError("request lacks an unsigned integer id", line);
  auto op = j.find("op");
  if (op == j.end() || !op->is_string() || op->get<std::string>() != "eval")
    throw ProtocolError("request op must be \"eval\"", line);
  auto scheme = j.find("scheme");
  if (scheme == j.end() || !scheme->is_string()) throw ProtocolError("request lacks a scheme string", line);
  return {*id, scheme->get<std::string>()};
}

Response parse_response(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("response is not a JSON object", line);
  const auto id = read_id(j);
  if (!id) throw ProtocolError("response lacks an unsigned integer id", line);
  Response r;
  r.id = *id;
  const bool has_val = j.contains("g_val");
  const bool has_err = j.contains("error");
  if (has_val == has_err) throw ProtocolError("response must carry exactly one of g_val and error", line);
  if (has_err) {
    if (!j["error"].is_string()) throw ProtocolError("error field is not a string", line);
    r.error = j["error"].get<std::string>();
    return r;
  }
  const auto& v = j["g_val"];
  if (!v.is_number()) throw ProtocolError("g_val is not a number", line);
  const double g = v.get<double>();
  if (!std::isfinite(g) || g < 0.0 || g > 1.0) throw ProtocolError("g_val outside [0, 1]", line);
  r.g_val = g;
  return r;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// Channels

FdChannel::FdChannel(int read_fd, int write_fd, bool socket)
    : read_fd_(read_fd), write_fd_(write_fd), socket_(socket) {
  ignore_sigpipe();
}

FdChannel::~FdChannel() { close_fds(); }

void FdChannel::close_write() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  write_fd_ = -1;
}

void FdChannel::adopt(int read_fd, int write_fd) {
  close_fds();
  read_fd_ = read_fd;
  write_fd_ = write_fd;
}

void FdChannel::close_fds() {
  close_write();
  if (read_fd_ >= 0) ::close(read_fd_);
  read_fd_ = -1;
}

void FdChannel::send_line(const std::string& line) {
  if (write_fd_ < 0) throw TransportError(describe() + ": channel closed");
  std::string data = line;
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                        : ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text(describe() + ": write failed"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdChannel::receive_line(Millis timeout) {
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (buffer_.size() > kMaxLine) throw ProtocolError("line exceeds 1 MiB", buffer_.substr(0, 200));
    if (read_fd_ < 0) throw TransportError(describe() + ": channel closed");

    const auto left = std::chrono::ceil<Millis>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text(describe() + ": poll failed"));
    }
    if (rc == 0) continue;
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(errno_text(describe() + ": read failed"));
    }
    if (n == 0) throw TransportError(describe() + ": peer closed the connection");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

namespace {

struct Spawned {
  int read_fd;
  int write_fd;
  int pid;
};

Spawned spawn_shell(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw TransportError(errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw TransportError(errno_text("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::string cmd = command;
  char sh[] = "/bin/sh";
  char flag[] = "-c";
  char* argv[] = {sh, flag, cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    errno = rc;
    throw TransportError(errno_text("cannot start '" + command + "'"));
  }
  return {from_child[0], to_child[1], pid};
}

}  // namespace

ChildProcessChannel::ChildProcessChannel(const std::string& command)
    : FdChannel(-1, -1, false), command_(command), pid_(-1) {
  const auto s = spawn_shell(command);
  adopt(s.read_fd, s.write_fd);
  pid_ = s.pid;
}

ChildProcessChannel::~ChildProcessChannel() {
  close_write();
  if (pid_ > 0) {
    int status = 0;
    const auto deadline = Clock::now() + Millis(500);
    while (::waitpid(pid_, &status, WNOHANG) == 0) {
      if (Clock::now() > deadline) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        break;
      }
      std::this_thread::sleep_for(Millis(5));
    }
  }
  close_fds();
}

TcpChannel::TcpChannel(int fd, std::string host, std::uint16_t port)
    : FdChannel(fd, fd, true), host_(std::move(host)), port_(port) {}

std::string TcpChannel::describe() const { return "tcp://" + host_ + ":" + std::to_string(port_); }

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, std::uint16_t port, Millis timeout) {
  ignore_sigpipe();
  const std::string where = "tcp://" + host + ":" + std::to_string(port);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw TransportError(where + ": " + ::gai_strerror(rc));

  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) {
      last = std::strerror(errno);
      continue;
    }
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 1) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        rc = err == 0 ? 0 : -1;
        errno = err;
      } else {
        rc = -1;
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      ::freeaddrinfo(res);
      const int flags = ::fcntl(fd, F_GETFL);
      ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return std::unique_ptr<TcpChannel>(new TcpChannel(fd, host, port));
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw TransportError(where + ": " + last);
}

// ---------------------------------------------------------------------------
// Endpoints

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint e;
  if (text.rfind("exec:", 0) == 0) {
    e.kind = Kind::exec;
    e.command = text.substr(5);
    if (e.command.empty()) throw ConfigError("endpoint", "exec endpoint needs a command");
    return e;
  }
  if (text.rfind("tcp://", 0) == 0) {
    const std::string rest = text.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
      throw ConfigError("endpoint", "expected tcp://host:port, got '" + text + "'");
    e.kind = Kind::tcp;
    e.host = rest.substr(0, colon);
    if (e.host.size() > 2 && e.host.front() == '[' && e.host.back() == ']') e.host = e.host.substr(1, e.host.size() - 2);
    const std::string port = rest.substr(colon + 1);
    unsigned long value = 0;
    for (char c : port) {
      if (c < '0' || c > '9') throw ConfigError("endpoint", "bad port in '" + text + "'");
      value = value * 10 + static_cast<unsigned long>(c - '0');
      if (value > 65535) throw ConfigError("endpoint", "port out of range in '" + text + "'");
    }
    if (value == 0) throw ConfigError("endpoint", "port 0 in '" + text + "'");
    e.port = static_cast<std::uint16_t>(value);
    return e;
  }
  throw ConfigError("endpoint", "unknown endpoint '" + text + "' (expected tcp://host:port or exec:<command>)");
}

std::string Endpoint::to_string() const {
  if (kind == Kind::exec) return "exec:" + command;
  return "tcp://" + host + ":" + std::to_string(port);
}

std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint, const ExternalOptions& options) {
  if (endpoint.kind == Endpoint::Kind::exec) return std::make_unique<ChildProcessChannel>(endpoint.command);
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      return TcpChannel::connect(endpoint.host, endpoint.port, options.timeout);
    } catch (const TransportError&) {
      if (attempt >= options.retries) throw;
      std::this_thread::sleep_for(Millis(100) * (attempt + 1));
    }
  }
}

// ---------------------------------------------------------------------------
// Client

ExternalEvaluator::ExternalEvaluator(const Endpoint& endpoint, ExternalOptions options)
    : ExternalEvaluator(open_channel(endpoint, options), options) {}

ExternalEvaluator::ExternalEvaluator(std::unique_ptr<LineChannel> channel, ExternalOptions options)
    : channel_(std::move(channel)), options_(options) {
  if (!channel_) throw TransportError("ExternalEvaluator: no channel");
  if (options_.timeout.count() <= 0) throw ConfigError("timeout", "must be positive");
}

std::string ExternalEvaluator::describe() const { return "external " + channel_->describe(); }

double ExternalEvaluator::evaluate(const ConnectionScheme& scheme) {
  if (options_.expected_m != 0 && scheme.size() != options_.expected_m)
    throw ShapeError("ExternalEvaluator: scheme has " + std::to_string(scheme.size()) + " bits, expected " +
                     std::to_string(options_.expected_m));
  const std::string text = encode(scheme);
  for (std::size_t attempt = 0; attempt <= options_.retries; ++attempt) {
    const std::uint64_t id = next_id_++;
    channel_->send_line(wire::format_request(id, text));
    const auto deadline = Clock::now() + options_.timeout;
    for (;;) {
      const auto left = std::chrono::ceil<Millis>(deadline - Clock::now());
      std::optional<std::string> line;
      if (left.count() > 0) line = channel_->receive_line(left);
      if (!line) break;
      const auto resp = wire::parse_response(*line);
      if (resp.id != id) {
        if (abandoned_.erase(resp.id) == 1) {
          ++stale_;
          continue;
        }
        throw ProtocolError("response id " + std::to_string(resp.id) + " does not match request id " +
                                std::to_string(id),
                            *line);
      }
      if (resp.error) throw RemoteError("evaluator reported an error", *line);
      return *resp.g_val;
    }
    abandoned_.insert(id);
  }
  throw TransportError(describe() + ": no reply after " + std::to_string(options_.retries + 1) + " attempts of " +
                       std::to_string(options_.timeout.count()) + " ms");
}

EvaluatorPool::EvaluatorPool(std::vector<std::unique_ptr<Evaluator>> members) : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("connections", "pool needs at least one evaluator");
}

std::vector<double> EvaluatorPool::evaluate_all(const std::vector<ConnectionScheme>& schemes) {
  std::vector<double> out(schemes.size());
  std::vector<std::exception_ptr> errors(members_.size());
  std::vector<std::thread> threads;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    threads.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < schemes.size(); i += members_.size()) out[i] = members_[k]->evaluate(schemes[i]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Server

std::string answer_line(const std::string& line, const ValueHandler& handler, std::size_t m) {
  std::uint64_t id = 0;
  {
    json j = json::parse(line, nullptr, false);
    if (auto got = read_id(j)) id = *got;
  }
  try {
    const auto req = wire::parse_request(line);
    const auto scheme = decode(req.scheme);
    if (m != 0 && scheme.size() != m)
      return wire::format_error(id, "scheme has " + std::to_string(scheme.size()) + " bits, expected " +
                                        std::to_string(m));
    const double g = handler(scheme);
    if (!std::isfinite(g) || g < 0.0 || g > 1.0) return wire::format_error(id, "evaluator produced g_val outside [0, 1]");
    return wire::format_response(id, g);
  } catch (const ProtocolError&) {
    return wire::format_error(id, "malformed request");
  } catch (const std::exception& e) {
    return wire::format_error(id, e.what());
  }
}

std::size_t serve_stream(std::istream& in, std::ostream& out, const ValueHandler& handler, std::size_t m) {
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << answer_line(line, handler, m) << '\n' << std::flush;
    ++n;
  }
  return n;
}

TcpServer::TcpServer(const std::string& host, std::uint16_t port, ValueHandler handler, std::size_t m)
    : handler_(std::move(handler)), m_(m) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw TransportError("bind " + host + ": " + ::gai_strerror(rc));
  std::string last = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) {
      listen_fd_ = fd;
      break;
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) throw TransportError("bind " + host + ":" + service + ": " + last);
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() { runner_ = std::thread([this] { run(); }); }

void TcpServer::run() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard lock(threads_mutex_);
    connection_fds_.push_back(fd);
    connections_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void TcpServer::serve_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while ((nl = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::string reply;
      {
        std::lock_guard lock(handler_mutex_);
        reply = answer_line(line, handler_, m_);
      }
      reply.push_back('\n');
      ++answered_;
      std::size_t off = 0;
      while (off < reply.size()) {
        const ssize_t w = ::send(fd, reply.data() + off, reply.size() - off, MSG_NOSIGNAL);
        if (w < 0 && errno == EINTR) continue;
        if (w <= 0) return;
        off += static_cast<std::size_t>(w);
      }
    }
    if (buffer.size() > kMaxLine) break;
  }
}

void TcpServer::stop() {
  stopping_ = true;
  if (runner_.joinable()) runner_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(threads_mutex_);
    for (int fd : connection_fds_) ::shutdown(fd, SHUT_RDWR);
    threads.swap(connections_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
  std::lock_guard lock(threads_mutex_);
  for (int fd : connection_fds_) ::close(fd);
  connection_fds_.clear();
}

}  // namespace ean
