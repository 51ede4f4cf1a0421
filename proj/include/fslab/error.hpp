#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fslab {

enum class ErrorKind {
  InvalidArgument,
  OverflowAlphabet,
  ResourceLimit,
  InsufficientSample,
  InvalidTower,
  ConfigError,
  CacheError,
  IoError,
  Internal,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Exception carrying one of the error kinds named by the public operations.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace fslab
