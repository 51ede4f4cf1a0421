#include <algorithm>
#include <atomic>
#include <thread>

#include "fslab/numeric.hpp"

namespace fslab::parallel {
namespace {
std::atomic<unsigned> g_threads{1};
}

void set_threads(unsigned count) { g_threads = std::max(1u, count); }

unsigned threads() { return g_threads; }

void for_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(g_threads, chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) body(c);
    });
  }
}

void for_each_index(std::size_t count, const std::function<void(std::size_t)>& body) {
  for_chunks(count, body);
}

}  // namespace fslab::parallel
