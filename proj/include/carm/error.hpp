#ifndef CARM_ERROR_HPP_
#define CARM_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace carm {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric precondition violated (negative bandwidth, zero bytes, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or incomplete configuration (empty model, bad topology, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unknown ISA name or ISA not available on this host.
class UnsupportedIsaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed profiler report or CSV input.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// CSV written by an incompatible schema revision.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Generated kernel text disagrees with its own plan.
class VerificationError : public Error {
 public:
  using Error::Error;
};

/// Assembler, loader, or external profiler failure.
class ToolchainError : public Error {
 public:
  using Error::Error;
};

/// A benchmark could not be run to completion (calibration, pinning, ...).
class BenchmarkError : public Error {
 public:
  using Error::Error;
};

/// Command-line misuse; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace carm

#endif  // CARM_ERROR_HPP_
