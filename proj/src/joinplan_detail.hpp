#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fslab::detail {

void check_approximation(double kappa, std::uint64_t V, std::uint64_t N, double epsilon,
                         const std::string& atom);
void check_n_large(double min_lambda, std::uint64_t N, double epsilon);

/// Free range values with O(alpha) lowest-free queries.
class RangePool {
 public:
  void reset(std::uint64_t n);
  bool taken(std::uint64_t v) const { return taken_[v] != 0; }
  void take(std::uint64_t v);
  /// Lowest untaken value >= from (n + 1 when none).
  std::uint64_t lowest_free(std::uint64_t from);

 private:
  std::vector<std::uint8_t> taken_;
  std::vector<std::uint64_t> next_;
};

/// Fills zero slots of images (positions begin..end) in increasing order,
/// continuing phi(n-1)+1 when free, otherwise the lowest free value.
void continue_runs(std::vector<std::uint64_t>& images, std::uint64_t begin, std::uint64_t end,
                   RangePool& pool);

}  // namespace fslab::detail
