#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fslab/numeric.hpp"

namespace fslab {

/// Finite prefix u(1..N) of a bounded complex sequence. Index 1 lives at
/// values[0]; every entry has modulus at most 1 + 1e-12.
class ArithmeticSequence {
 public:
  static constexpr double kModulusSlack = 1e-12;

  ArithmeticSequence() = default;
  /// Validates length >= 1 and the modulus bound; throws invalid-argument.
  ArithmeticSequence(std::vector<cplx> values, std::string label,
                     std::map<std::string, std::string> params = {});

  std::size_t size() const noexcept { return values_.size(); }
  static constexpr std::size_t start_index() noexcept { return 1; }

  /// u(n), 1-based.
  cplx operator()(std::size_t n) const { return values_[n - 1]; }

  std::span<const cplx> values() const noexcept { return values_; }
  const std::string& label() const noexcept { return label_; }
  const std::map<std::string, std::string>& params() const noexcept { return params_; }

  /// First n entries, same label and params.
  ArithmeticSequence prefix(std::size_t n) const;
  /// Pointwise e^{i theta} u(n).
  ArithmeticSequence rotated(double theta) const;

  /// FNV-1a over the little-endian bytes of the values.
  std::uint64_t content_hash() const noexcept;

 private:
  std::vector<cplx> values_;
  std::string label_;
  std::map<std::string, std::string> params_;
};

namespace io {

inline constexpr char kSequenceMagic[8] = {'F', 'S', 'L', 'A', 'B', '0', '0', '1'};

/// CSV with header `n,re,im`, one row per index, round-trip precision.
void write_sequence_csv(const ArithmeticSequence& u, const std::filesystem::path& path);
ArithmeticSequence read_sequence_csv(const std::filesystem::path& path);

/// `FSLAB001` followed by little-endian (re, im) float64 pairs.
void write_complex_binary(std::span<const cplx> values, const std::filesystem::path& path);
std::vector<cplx> read_complex_binary(const std::filesystem::path& path);

void write_sequence_binary(const ArithmeticSequence& u, const std::filesystem::path& path);
ArithmeticSequence read_sequence_binary(const std::filesystem::path& path);

/// Dispatches on extension: `.bin` binary, anything else CSV.
ArithmeticSequence read_sequence(const std::filesystem::path& path);

void write_u64_le(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64_le(std::istream& in);
void write_f64_le(std::ostream& out, double v);
double read_f64_le(std::istream& in);

std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                    std::uint64_t seed = 1469598103934665603ULL) noexcept;

}  // namespace io
}  // namespace fslab
