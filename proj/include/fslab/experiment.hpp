#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fslab/correlate.hpp"
#include "fslab/dynsys.hpp"
#include "fslab/permutation.hpp"
#include "fslab/sequence.hpp"

namespace fslab {

struct SequenceSpec {
  std::string generator;                 ///< empty when input is set
  std::map<std::string, double> params;  ///< generator parameters, N included
  std::optional<std::filesystem::path> input;
  std::optional<std::uint64_t> N;        ///< prefix length applied to inputs
  bool blockify = false;
};

struct StatisticSpec {
  std::string name;
  std::uint64_t H = 10;
  std::uint64_t N = 0;  ///< 0: whole sequence
  std::uint64_t Q = 1;
  std::uint64_t L = 1;
  unsigned k = 1;
  std::string permutation = "identity";
  std::string quantize = "signs";
  std::vector<std::uint64_t> q;
  std::uint64_t grid = 0;
  std::uint64_t M = 100;
};

struct SystemSpec {
  std::string kind;  ///< circle, torus, skew, heisenberg
  double alpha = 0.0;
  double beta = 0.0;
  std::array<double, 3> g{0.0, 0.0, 0.0};
  std::string observable;
  std::vector<double> x0;
  std::string test = "orthogonality";  ///< or momo
  std::vector<std::uint64_t> Ns;
  std::uint64_t K = 100;
  std::uint64_t seed = 1;

  OrbitSystem system() const;
};

struct JoiningSpec {
  std::string lambda = "product";
  std::vector<std::uint64_t> Ns;
  std::string quantize = "signs";
  bool aperiodize = false;
  unsigned eval_k = 2;
  std::uint64_t projection_M = 0;
  unsigned projection_k = 1;
  bool save_permutations = false;
};

struct ExperimentConfig {
  SequenceSpec sequence;
  std::vector<StatisticSpec> statistics;
  std::vector<SystemSpec> systems;
  std::optional<JoiningSpec> joining;
  std::filesystem::path out_dir = "out";
  bool cache = true;
  bool plots = true;
  Averaging averaging = Averaging::Cesaro;
  AutocorrMethod method = AutocorrMethod::Automatic;
  unsigned threads = 0;
  /// Key-sorted JSON form; its FNV-1a hash is the config hash.
  nlohmann::json canonical;

  std::string hash() const;
};

/// Validates names and ranges; throws config-error naming the field path,
/// e.g. "statistic[0].name".
ExperimentConfig parse_config(const nlohmann::json& j);
/// TOML, or JSON when the extension is .json.
nlohmann::json load_config_file(const std::filesystem::path& path);
ExperimentConfig load_config(const std::filesystem::path& path);

const std::vector<std::string>& generator_names();
const std::vector<std::string>& statistic_names();

/// Builds the sequence named by the spec (generator or input file).
ArithmeticSequence make_sequence(const SequenceSpec& spec);
/// "identity", "reversal", "cyclic:m", "block_swap:D", "file:PATH"
PermutationPlan make_permutation(const std::string& text, std::uint64_t N);

struct RunOptions {
  /// Overrides FSLAB_CACHE_DIR and <out>/cache.
  std::optional<std::filesystem::path> cache_dir;
  std::function<void(const std::string&)> log;
};

struct ResultRecord {
  std::string config_hash;
  std::string started;
  std::string finished;
  std::vector<StatReport> reports;
  std::vector<std::string> artifacts;  ///< relative to the output directory
  std::vector<std::string> warnings;
  bool cache_enabled = false;
  std::string cache_dir;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;

  nlohmann::json to_json() const;
};

/// generators -> statistics -> systems -> joining; writes results.jsonl,
/// record.json, tables/*.csv and plots/*.csv under config.out_dir.
ResultRecord run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace fslab
