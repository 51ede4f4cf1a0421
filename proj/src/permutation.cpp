#include "fslab/permutation.hpp"

#include <cstring>
#include <fstream>

#include "fslab/error.hpp"
#include "fslab/sequence.hpp"

namespace fslab {

PermutationPlan::PermutationPlan(std::vector<std::uint64_t> images) : images_(std::move(images)) {
  const std::uint64_t N = images_.size();
  std::vector<bool> seen(N + 1, false);
  for (std::uint64_t i = 0; i < N; ++i) {
    const std::uint64_t v = images_[i];
    if (v < 1 || v > N) {
      fail(ErrorKind::InvalidArgument, "phi(" + std::to_string(i + 1) + ") = " +
                                           std::to_string(v) + " outside 1.." + std::to_string(N));
    }
    if (seen[v]) {
      fail(ErrorKind::InvalidArgument, "phi is not injective: value " + std::to_string(v) +
                                           " repeated at n = " + std::to_string(i + 1));
    }
    seen[v] = true;
  }
  defects_ = recount_defects();
}

PermutationPlan PermutationPlan::identity(std::uint64_t N) {
  std::vector<std::uint64_t> v(N);
  for (std::uint64_t i = 0; i < N; ++i) v[i] = i + 1;
  return PermutationPlan(std::move(v));
}

PermutationPlan PermutationPlan::reversal(std::uint64_t N) {
  std::vector<std::uint64_t> v(N);
  for (std::uint64_t i = 0; i < N; ++i) v[i] = N - i;
  return PermutationPlan(std::move(v));
}

PermutationPlan PermutationPlan::cyclic_shift(std::uint64_t N, std::uint64_t m) {
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
  std::vector<std::uint64_t> v(N);
  for (std::uint64_t i = 0; i < N; ++i) v[i] = (i + m) % N + 1;
  return PermutationPlan(std::move(v));
}

PermutationPlan PermutationPlan::block_swap(std::uint64_t N, std::uint64_t D) {
  require(D >= 1, ErrorKind::InvalidArgument, "block length must be >= 1");
  std::vector<std::uint64_t> v(N);
  for (std::uint64_t i = 0; i < N; ++i) v[i] = i + 1;
  for (std::uint64_t start = 0; start + 2 * D <= N; start += 2 * D) {
    for (std::uint64_t i = 0; i < D; ++i) {
      v[start + i] = start + D + i + 1;
      v[start + D + i] = start + i + 1;
    }
  }
  return PermutationPlan(std::move(v));
}

double PermutationPlan::defect_fraction() const noexcept {
  return images_.empty() ? 0.0 : static_cast<double>(defects_) / static_cast<double>(images_.size());
}

std::uint64_t PermutationPlan::recount_defects() const noexcept {
  std::uint64_t d = 0;
  for (std::size_t i = 0; i + 1 < images_.size(); ++i) d += images_[i + 1] != images_[i] + 1;
  return d;
}

PermutationPlan PermutationPlan::inverse() const {
  std::vector<std::uint64_t> inv(images_.size());
  for (std::size_t i = 0; i < images_.size(); ++i) inv[images_[i] - 1] = i + 1;
  return PermutationPlan(std::move(inv));
}

namespace io {

void write_permutation(const PermutationPlan& phi, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(kPermutationMagic, 8);
  write_u64_le(out, phi.size());
  for (auto v : phi.images()) write_u64_le(out, v);
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

PermutationPlan read_permutation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kPermutationMagic, 8) != 0) {
    fail(ErrorKind::IoError, path.string() + " is not a permutation file");
  }
  const std::uint64_t N = read_u64_le(in);
  std::vector<std::uint64_t> images(N);
  for (auto& v : images) v = read_u64_le(in);
  return PermutationPlan(std::move(images));
}

}  // namespace io
}  // namespace fslab
