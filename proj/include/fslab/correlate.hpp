#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fslab/permutation.hpp"
#include "fslab/sequence.hpp"

namespace fslab {

enum class Averaging { Cesaro, Logarithmic };
enum class AutocorrMethod { Automatic, Fft, Direct };

std::string to_string(Averaging a);
std::string to_string(AutocorrMethod m);
Averaging parse_averaging(const std::string& s);
AutocorrMethod parse_method(const std::string& s);

/// gamma[h] = (1/N') sum_{n <= N'} u(n+h) conj(u(n)), h = 0..H_max, N' = N - H_max.
/// Logarithmic averaging weighs n by 1/n and normalizes by sum_{n <= N'} 1/n.
struct AutocorrTable {
  std::uint64_t H_max = 0;
  std::uint64_t N = 0;
  std::uint64_t N_prime = 0;
  Averaging averaging = Averaging::Cesaro;
  AutocorrMethod method = AutocorrMethod::Direct;
  std::vector<cplx> gamma;
};

/// Requires H < N/2. Automatic uses FFT cross-correlation for Cesaro and
/// direct weighted sums for logarithmic averaging.
AutocorrTable autocorrelation(std::span<const cplx> u, std::uint64_t H,
                              Averaging averaging = Averaging::Cesaro,
                              AutocorrMethod method = AutocorrMethod::Automatic);
AutocorrTable autocorrelation(const ArithmeticSequence& u, std::uint64_t H,
                              Averaging averaging = Averaging::Cesaro,
                              AutocorrMethod method = AutocorrMethod::Automatic);

void write_autocorr_csv(const AutocorrTable& t, const std::filesystem::path& path);

struct AutocorrKey {
  std::uint64_t sequence_hash = 0;
  std::uint64_t N = 0;
  std::uint64_t H = 0;
  Averaging averaging = Averaging::Cesaro;
  AutocorrMethod method = AutocorrMethod::Fft;

  std::string file_name() const;
};

/// On-disk store of autocorrelation tables. Reads take a shared flock on
/// <dir>/.lock, writes an exclusive one.
class AutocorrCache {
 public:
  explicit AutocorrCache(std::filesystem::path dir);

  /// nullopt when absent; throws cache-error when present but unreadable.
  std::optional<AutocorrTable> load(const AutocorrKey& key) const;
  void store(const AutocorrKey& key, const AutocorrTable& table) const;
  std::filesystem::path path_for(const AutocorrKey& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct CacheOutcome {
  bool hit = false;
  std::vector<std::string> warnings;
};

/// Cache lookup, recompute on miss or corruption (corruption adds a warning).
AutocorrTable cached_autocorrelation(std::span<const cplx> u, std::uint64_t sequence_hash,
                                     std::uint64_t H, Averaging averaging, AutocorrMethod method,
                                     const AutocorrCache* cache, CacheOutcome* outcome = nullptr);

struct StatReport {
  std::string name;
  double value = 0.0;
  std::map<std::string, double> params;
  std::vector<std::pair<double, double>> trend;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> notes;
};

/// Supplies the autocorrelation table of the statistic's prefix at a given H.
using AutocorrProvider = std::function<AutocorrTable(std::uint64_t H)>;

struct StatOptions {
  Averaging averaging = Averaging::Cesaro;
  AutocorrMethod method = AutocorrMethod::Automatic;
  /// When unset, tables are computed directly from the prefix.
  AutocorrProvider provider;
};

/// (1/N') sum_{n <= N'} |(1/H) sum_{h <= H} u(n+h)|^2, N' = N - H.
StatReport short_interval_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                               const StatOptions& options = {});

/// max(0, Re (1/H) sum_{h=1..H} gamma(h)).
StatReport u1_norm_estimate(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                            const StatOptions& options = {});

/// (1/H) sum_{h=1..H} |gamma(h)|, plus a trend over H in {10, 100, 1000}.
StatReport averaged_chowla_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                                const StatOptions& options = {});

/// (1/Q) sum_{q <= Q} (1/N') sum_{n <= N'} |(1/H) sum_{h <= H} u(hq+n)|^2, N' = N - HQ.
StatReport progression_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t Q,
                            std::uint64_t N, const StatOptions& options = {});

/// (1/N') sum_{n <= N'} |(1/L) sum_{l <= L} u(n+l) u(phi(n)+l)|^2, N' = N - L,
/// terms with phi(n)+l > N skipped.
StatReport relative_vn_stat(const ArithmeticSequence& u, const PermutationPlan& phi,
                            std::uint64_t L, std::uint64_t N, const StatOptions& options = {});

/// Trend points used by averaged_chowla_stat.
inline constexpr std::uint64_t kChowlaTrend[] = {10, 100, 1000};

}  // namespace fslab
