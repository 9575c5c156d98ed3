#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ean {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or length mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or an otherwise undefined numeric result.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed scheme text. `position()` is the offending character index.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at index " + std::to_string(position) + ")"), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Invalid configuration value. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Evaluator unreachable, timed out past its retry limit, or hung up.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Evaluator replied with something that is not a valid response.
class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& what, std::string raw_line)
      : Error(what + ": " + raw_line), raw_line_(std::move(raw_line)) {}
  const std::string& raw_line() const noexcept { return raw_line_; }

 private:
  std::string raw_line_;
};

/// Evaluator answered with an explicit `{"error": ...}` object.
class RemoteError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace ean
