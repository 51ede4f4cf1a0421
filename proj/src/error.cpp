#include "fslab/error.hpp"

namespace fslab {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::OverflowAlphabet: return "overflow-alphabet";
    case ErrorKind::ResourceLimit: return "resource-limit";
    case ErrorKind::InsufficientSample: return "insufficient-sample";
    case ErrorKind::InvalidTower: return "invalid-tower";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::CacheError: return "cache-error";
    case ErrorKind::IoError: return "io-error";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace fslab
