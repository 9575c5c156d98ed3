// Scriptable evaluator for protocol tests. Reads requests on stdin, or on a
// TCP port with --port, and misbehaves on purpose according to --mode.
//
//   const      g_val = --value for every scheme
//   sparsity   g_val = fraction of connected blocks
//   silent     never answers
//   garbage    answers with a line that is not JSON
//   error      answers with an error object
//   wrong-id   answers with id + 1000
//   late       answers the first --late-count requests after --delay-ms
//   exit       exits after --after answers

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ean/errors.hpp"
#include "ean/protocol.hpp"

namespace {

struct Options {
  std::string mode = "const";
  double value = 0.5;
  int delay_ms = 0;
  std::size_t late_count = 1;
  std::size_t after = 0;
};

std::string reply(const Options& o, const std::string& line, std::size_t served) {
  ean::wire::Request req;
  try {
    req = ean::wire::parse_request(line);
  } catch (const ean::ProtocolError& e) {
    return ean::wire::format_error(0, e.what());
  }
  if (o.mode == "garbage") return "this is not json";
  if (o.mode == "error") return ean::wire::format_error(req.id, "stub refuses");
  if (o.mode == "wrong-id") return ean::wire::format_response(req.id + 1000, o.value);
  if (o.mode == "late" && served < o.late_count)
    std::this_thread::sleep_for(std::chrono::milliseconds(o.delay_ms));
  if (o.mode == "sparsity") {
    const auto s = ean::decode(req.scheme);
    return ean::wire::format_response(req.id, s.size() ? double(s.popcount()) / double(s.size()) : 0.0);
  }
  return ean::wire::format_response(req.id, o.value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test evaluator"};
  Options o;
  int port = -1;
  app.add_option("--mode", o.mode)
      ->check(CLI::IsMember({"const", "sparsity", "silent", "garbage", "error", "wrong-id", "late", "exit"}));
  app.add_option("--value", o.value);
  app.add_option("--delay-ms", o.delay_ms);
  app.add_option("--late-count", o.late_count);
  app.add_option("--after", o.after);
  app.add_option("--port", port, "Serve TCP on this port instead of stdio (0 = ephemeral)");
  CLI11_PARSE(app, argc, argv);

  if (port >= 0) {
    // TCP mode supports the well-behaved modes only.
    ean::TcpServer server("127.0.0.1", static_cast<std::uint16_t>(port),
                         [&](const ean::ConnectionScheme& s) {
                           if (o.mode == "sparsity") return s.size() ? double(s.popcount()) / double(s.size()) : 0.0;
                           if (o.mode == "late") std::this_thread::sleep_for(std::chrono::milliseconds(o.delay_ms));
                           return o.value;
                         },
                         0);
    std::cout << "listening tcp://127.0.0.1:" << server.port() << std::endl;
    server.run();
    return 0;
  }

  std::string line;
  std::size_t served = 0;
  while (std::getline(std::cin, line)) {
    if (o.mode == "exit" && served >= o.after) return 0;
    if (o.mode == "silent") continue;
    std::cout << reply(o, line, served) << std::endl;
    ++served;
  }
  return 0;
}
