#pragma once

#include <stdexcept>
#include <string>

namespace umsim {

// Exit-code mapping in the CLI: ConfigError, ParseError, UsageError -> 2;
// AllocationFailure, OutOfMemory -> 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition (double free, zero-byte
/// migration, unsupported prefetch target, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An eager allocation (DeviceOnly / HostPinned) does not fit its tier.
class AllocationFailure : public Error {
 public:
  using Error::Error;
};

/// A tier cannot take one more page and nothing can be evicted.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class OutOfMemory : public Error {
 public:
  using Error::Error;
};

}  // namespace umsim
