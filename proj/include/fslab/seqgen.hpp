#pragma once

#include <cstdint>
#include <vector>

#include "fslab/sequence.hpp"

namespace fslab::seqgen {

/// Above this length the Liouville parity is computed segment by segment.
inline constexpr std::uint64_t kSegmentedSieveThreshold = 100'000'000;

/// Parity of Omega(n) for n = 1..N, one bit per integer (bit set when odd).
std::vector<bool> liouville_parity(std::uint64_t N,
                                   std::uint64_t segmented_above = kSegmentedSieveThreshold);

/// lambda(n) = (-1)^{Omega(n)}, Omega counting prime factors with multiplicity.
ArithmeticSequence gen_liouville(std::uint64_t N);

/// Concatenation over k = 1..L of the blocks (e^{2 pi i j k alpha})_{j < k^2},
/// i.e. the first k^2 points of the orbit of (k alpha, 0) under (x,y) -> (x, x+y)
/// read through e^{2 pi i y}. Total length L(L+1)(2L+1)/6.
ArithmeticSequence gen_skew_sequence(double alpha, std::uint64_t L);

/// (1/N) sum_n e(r x_n + s y_n) over the orbit points (x_n, y_n) behind
/// gen_skew_sequence, N = skew_sequence_length(L).
cplx skew_character_average(double alpha, std::uint64_t L, int r, int s);

/// Length of gen_skew_sequence(alpha, L).
constexpr std::uint64_t skew_sequence_length(std::uint64_t L) {
  return L * (L + 1) * (2 * L + 1) / 6;
}

/// n^{it} = e^{i t ln n}.
ArithmeticSequence gen_archimedean(double t, std::uint64_t N);

/// n^{-r}, r > 0; a sequence of zero Besicovitch pseudo-norm.
ArithmeticSequence gen_power_decay(double r, std::uint64_t N);

// Reference sequences used by examples and tests.
ArithmeticSequence gen_constant(cplx value, std::uint64_t N);
/// (-1)^n
ArithmeticSequence gen_alternating(std::uint64_t N);
/// e^{2 pi i n p / q}
ArithmeticSequence gen_root_of_unity(std::uint64_t p, std::uint64_t q, std::uint64_t N);
/// iid uniform signs from a seeded mt19937_64.
ArithmeticSequence gen_iid_signs(std::uint64_t seed, std::uint64_t N);

/// (1/N) sum |u(n)|.
double besicovitch_mean(const ArithmeticSequence& u);

/// (1/(N-1)) sum_{n<N} |u(n+1) - u(n)|.
double mean_variation(const ArithmeticSequence& u);

struct BlockStructure {
  std::vector<std::uint64_t> boundaries;  ///< b_1 = 1 < b_2 < ...; block k is [b_k, b_{k+1})
  std::vector<cplx> block_values;         ///< z_k
  std::vector<double> tolerances;         ///< eps_k, nonincreasing
  std::vector<unsigned> scales;           ///< scale index j of each b_k
  /// Block index from which the gaps b_{k+1} - b_k are nondecreasing.
  std::size_t monotone_gap_from = 0;

  std::size_t block_count() const noexcept { return block_values.size(); }
  /// One past the last index of block k (0-based k).
  std::uint64_t block_end(std::size_t k, std::uint64_t N) const {
    return k + 1 < boundaries.size() ? boundaries[k + 1] : N + 1;
  }
};

struct BlockifyReport {
  double besicovitch_distance = 0.0;  ///< (1/N) sum |v - v~|
  double mean_variation = 0.0;
  double jump_density = 0.0;          ///< fraction of n with |v(n) - v(n-1)| >= delta_1
  double max_block_deviation = 0.0;   ///< max_k sup_{n in block k} |v~(n) - z_k|
  std::vector<std::uint64_t> scale_starts;  ///< M_1 = 1 < M_2 < ...
  std::uint64_t flattened = 0;              ///< |C|
  bool flagged = false;                     ///< input does not look mean slowly varying
};

struct BlockifyResult {
  ArithmeticSequence smoothed;
  BlockStructure blocks;
  BlockifyReport report;
};

/// delta_j = 4^{-j}, j = 1..count.
std::vector<double> default_delta_schedule(std::size_t count = 24);

/// Block decomposition of a mean slowly varying sequence: mark large jumps,
/// flatten runs between markers that sit too close together, then cut blocks of
/// length in [j, 2j-1] at scale j covering every remaining jump. On each block
/// |v~(n) - z_k| < eps_k = 2 j delta_j. Distances above flag_threshold set
/// report.flagged.
BlockifyResult msv_blockify(const ArithmeticSequence& v,
                            const std::vector<double>& delta_schedule = default_delta_schedule(),
                            double flag_threshold = 0.1);

}  // namespace fslab::seqgen
