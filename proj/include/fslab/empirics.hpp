#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fslab/permutation.hpp"
#include "fslab/sequence.hpp"

namespace fslab {

using Symbol = std::uint16_t;

/// Finite-alphabet image of a sequence. symbol_values[a] is the complex
/// representative of symbol a.
struct SymbolicSequence {
  std::vector<Symbol> symbols;
  unsigned alphabet_size = 0;
  std::vector<cplx> symbol_values;
  std::string scheme;
  /// True when distinct input values share a symbol.
  bool lossy = false;

  std::size_t size() const noexcept { return symbols.size(); }
  /// Symbol at 1-based index n.
  Symbol operator()(std::size_t n) const { return symbols[n - 1]; }
};

/// Wraps raw labels, validating symbol < alphabet_size. Symbol a is represented
/// by e^{2 pi i a / M}.
SymbolicSequence make_symbolic(std::vector<Symbol> symbols, unsigned alphabet_size,
                               std::string scheme = "labels");

enum class QuantizeMode { Signs, PhaseBins, ValueSet };

struct QuantizeOptions {
  QuantizeMode mode = QuantizeMode::PhaseBins;
  unsigned bins = 16;
};

inline constexpr unsigned kMaxValueSet = 256;

/// signs: Re u >= 0 -> 1, else 0. phase_bins(M): e^{2 pi i theta} -> floor(M theta),
/// zero -> M. value_set: distinct values in (re, im) order.
SymbolicSequence quantize(const ArithmeticSequence& u, const QuantizeOptions& options);

/// Encodes a block as a base-M integer, first symbol most significant.
std::uint64_t block_code(std::span<const Symbol> block, unsigned alphabet_size);
std::vector<Symbol> block_decode(std::uint64_t code, unsigned length, unsigned alphabet_size);
/// Digits when M <= 10, dot-separated decimal symbols otherwise.
std::string block_string(std::uint64_t code, unsigned length, unsigned alphabet_size);

/// codes[i] = block code of s[i+1 .. i+len] for i + len <= N; M^len must fit in 64 bits.
std::vector<std::uint64_t> window_codes(const SymbolicSequence& s, unsigned len);

inline constexpr unsigned kMaxBlockLength = 12;
inline constexpr double kMaxCylinderCells = 1e7;

/// Window counts for block lengths 1..k_max, stored sparsely per length.
struct CylinderTable {
  unsigned k_max = 0;
  std::uint64_t N = 0;
  unsigned alphabet_size = 0;
  std::vector<std::map<std::uint64_t, std::uint64_t>> counts;  ///< [len-1][code]
  std::vector<std::uint64_t> denominators;                     ///< [len-1]

  double freq(unsigned length, std::uint64_t code) const;
  double freq(std::span<const Symbol> block) const;
};

/// Joint window counts of (s[n..], s[phi(n)..]) for equal lengths 1..k_max.
struct CouplingTable {
  unsigned k_max = 0;
  std::uint64_t N = 0;
  unsigned alphabet_size = 0;
  std::vector<std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t>> counts;
  /// Pairs dropped because one of the windows runs past N, per length.
  std::vector<std::uint64_t> edge_loss;
  CylinderTable first;
  CylinderTable second;

  /// count / N
  double freq(unsigned length, std::uint64_t b, std::uint64_t c) const;
};

/// freq(B) = #{n <= N-|B|+1 : s[n..n+|B|-1] = B} / (N-|B|+1).
/// Throws resource-limit when k_max > 12 or M^k_max > 1e7.
CylinderTable cylinder_frequencies(const SymbolicSequence& s, unsigned k_max);

/// freq(B,C) = #{n : s[n..] = B, s[phi(n)..] = C} / N. Marginals are the row
/// and column sums of the coupling counts over the same denominator.
CouplingTable coupling_from_pairs(const SymbolicSequence& s, const PermutationPlan& phi,
                                  unsigned k_max);

/// Checks the length guard shared by both counting routines.
void check_cylinder_guard(unsigned alphabet_size, unsigned k_max);

/// Largest |marginal(B) - cylinder(B)| over all blocks and lengths.
double marginal_discrepancy(const CylinderTable& marginal, const CylinderTable& reference);

}  // namespace fslab
