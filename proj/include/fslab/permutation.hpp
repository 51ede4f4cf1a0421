#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fslab {

/// Permutation phi of {1..N} together with its count of orbit breaks
/// #{n < N : phi(n+1) != phi(n) + 1}.
class PermutationPlan {
 public:
  PermutationPlan() = default;
  /// images[i] = phi(i+1). Throws invalid-argument unless a bijection of {1..N}.
  explicit PermutationPlan(std::vector<std::uint64_t> images);

  static PermutationPlan identity(std::uint64_t N);
  /// n -> N + 1 - n
  static PermutationPlan reversal(std::uint64_t N);
  /// n -> ((n - 1 + m) mod N) + 1
  static PermutationPlan cyclic_shift(std::uint64_t N, std::uint64_t m);
  /// Swaps consecutive blocks [2jD+1, (2j+1)D] <-> [(2j+1)D+1, (2j+2)D];
  /// a trailing partial pair is left fixed.
  static PermutationPlan block_swap(std::uint64_t N, std::uint64_t D);

  std::uint64_t size() const noexcept { return images_.size(); }
  std::uint64_t operator()(std::uint64_t n) const { return images_[n - 1]; }
  std::span<const std::uint64_t> images() const noexcept { return images_; }

  std::uint64_t defect_count() const noexcept { return defects_; }
  /// defect_count / N
  double defect_fraction() const noexcept;
  std::uint64_t recount_defects() const noexcept;

  PermutationPlan inverse() const;

 private:
  std::vector<std::uint64_t> images_;
  std::uint64_t defects_ = 0;
};

namespace io {
inline constexpr char kPermutationMagic[8] = {'F', 'S', 'P', 'E', 'R', 'M', '0', '1'};

/// `FSPERM01`, N as little-endian u64, then phi(1..N) as little-endian u64.
void write_permutation(const PermutationPlan& phi, const std::filesystem::path& path);
PermutationPlan read_permutation(const std::filesystem::path& path);
}  // namespace io

}  // namespace fslab
