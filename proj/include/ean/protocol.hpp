#pragma once

// Newline-delimited JSON evaluator protocol, its transports (child process
// pipes and TCP), a client-side Evaluator and small server helpers.
//
//   request:  {"id": <uint64>, "op": "eval", "scheme": "<scheme text>"}
//   response: {"id": <uint64>, "g_val": <number in [0,1]>}
//   error:    {"id": <uint64>, "error": "<message>"}

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "ean/environment.hpp"
#include "ean/scheme.hpp"

namespace ean {

namespace wire {

struct Request {
  std::uint64_t id = 0;
  std::string scheme;
};

struct Response {
  std::uint64_t id = 0;
  std::optional<double> g_val;
  std::optional<std::string> error;
};

std::string format_request(std::uint64_t id, const std::string& scheme);
std::string format_response(std::uint64_t id, double g_val);
std::string format_error(std::uint64_t id, const std::string& message);

/// Throws ProtocolError (carrying the raw line) on anything that is not a
/// well-formed eval request.
Request parse_request(const std::string& line);
/// Throws ProtocolError unless the line is an object with an unsigned id and
/// exactly one of a finite g_val in [0,1] or a string error.
Response parse_response(const std::string& line);

}  // namespace wire

using Millis = std::chrono::milliseconds;

/// A bidirectional stream of text lines.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// Writes `line` plus a newline. TransportError if the peer is gone.
  virtual void send_line(const std::string& line) = 0;
  /// Next line without its newline, or nullopt once `timeout` elapses.
  /// TransportError on end of stream.
  virtual std::optional<std::string> receive_line(Millis timeout) = 0;
  virtual std::string describe() const = 0;
};

/// Line channel over a pair of file descriptors, which it owns.
class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd, bool socket);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send_line(const std::string& line) override;
  std::optional<std::string> receive_line(Millis timeout) override;

 protected:
  void adopt(int read_fd, int write_fd);
  void close_fds();
  void close_write();

 private:
  int read_fd_;
  int write_fd_;
  bool socket_;
  std::string buffer_;
};

/// Runs `/bin/sh -c command` with its stdin/stdout connected to the channel.
/// Standard error is inherited.
class ChildProcessChannel final : public FdChannel {
 public:
  explicit ChildProcessChannel(const std::string& command);
  ~ChildProcessChannel() override;
  std::string describe() const override { return "exec:" + command_; }
  int pid() const { return pid_; }

 private:
  std::string command_;
  int pid_;
};

class TcpChannel final : public FdChannel {
 public:
  /// TransportError when the connection cannot be established within `timeout`.
  static std::unique_ptr<TcpChannel> connect(const std::string& host, std::uint16_t port, Millis timeout);
  std::string describe() const override;

 private:
  TcpChannel(int fd, std::string host, std::uint16_t port);
  std::string host_;
  std::uint16_t port_;
};

struct Endpoint {
  enum class Kind { exec, tcp };
  Kind kind = Kind::tcp;
  std::string command;  // exec
  std::string host;     // tcp
  std::uint16_t port = 0;

  /// "tcp://host:port" or "exec:<shell command>". ConfigError("endpoint") otherwise.
  static Endpoint parse(const std::string& text);
  std::string to_string() const;
};

struct ExternalOptions {
  Millis timeout{30000};     // per attempt
  std::size_t retries = 2;   // extra attempts after the first
  std::size_t expected_m = 0;  // when nonzero, schemes of other lengths are rejected locally
};

/// Opens a channel to the endpoint; TCP connects are retried `retries` times.
std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint, const ExternalOptions& options);

/// Evaluator that asks a remote process for g_val.
///
/// Each attempt uses a fresh id. After a timeout the request is re-sent under
/// a new id; a late reply to an abandoned id is discarded when it arrives.
/// Any other id mismatch, malformed line or out-of-range value is a
/// ProtocolError; an error object is a RemoteError. When every attempt times
/// out a TransportError is thrown, after (retries + 1) * timeout in total.
class ExternalEvaluator final : public Evaluator {
 public:
  ExternalEvaluator(const Endpoint& endpoint, ExternalOptions options);
  ExternalEvaluator(std::unique_ptr<LineChannel> channel, ExternalOptions options);

  double evaluate(const ConnectionScheme& scheme) override;
  std::string describe() const override;

  std::uint64_t last_id() const { return next_id_ - 1; }
  std::size_t stale_replies() const { return stale_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  ExternalOptions options_;
  std::uint64_t next_id_ = 1;
  std::set<std::uint64_t> abandoned_;
  std::size_t stale_ = 0;
};

/// Several independent connections used together: schemes are dealt out
/// round-robin, evaluated concurrently, and merged back by index.
class EvaluatorPool {
 public:
  explicit EvaluatorPool(std::vector<std::unique_ptr<Evaluator>> members);
  std::vector<double> evaluate_all(const std::vector<ConnectionScheme>& schemes);
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<std::unique_ptr<Evaluator>> members_;
};

// ---------------------------------------------------------------------------
// Server side

using ValueHandler = std::function<double(const ConnectionScheme&)>;

/// Answers one request line. Never throws for bad input: malformed requests,
/// wrong scheme lengths (when `m` is nonzero) and handler exceptions become
/// error objects.
std::string answer_line(const std::string& line, const ValueHandler& handler, std::size_t m);

/// Reads requests from `in` until end of stream, flushing each answer.
/// Returns the number of lines answered.
std::size_t serve_stream(std::istream& in, std::ostream& out, const ValueHandler& handler, std::size_t m);

/// Threaded TCP server; handler calls are serialized.
class TcpServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port.
  TcpServer(const std::string& host, std::uint16_t port, ValueHandler handler, std::size_t m);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Accepts connections until stop(); each connection gets its own thread.
  void run();
  /// Starts run() on a background thread.
  void start();
  void stop();
  std::size_t answered() const { return answered_.load(); }

 private:
  void serve_connection(int fd);

  ValueHandler handler_;
  std::size_t m_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> answered_{0};
  std::mutex handler_mutex_;
  std::mutex threads_mutex_;
  std::vector<std::thread> connections_;
  std::vector<int> connection_fds_;
  std::thread runner_;
};

}  // namespace ean
