#pragma once

#include <mutex>

namespace fslab::detail {

/// FFTW planning and plan destruction are not thread safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace fslab::detail
