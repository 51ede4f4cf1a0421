#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fslab/correlate.hpp"
#include "fslab/empirics.hpp"
#include "fslab/permutation.hpp"

namespace fslab {

// ---------------------------------------------------------------------------
// Integer coupling allocation

/// Coupling lambda (row-major m x m) of the atom masses kappa with itself.
struct CouplingSpec {
  std::vector<double> kappa;
  std::vector<double> lambda;
  double epsilon = 0.1;

  std::size_t atoms() const noexcept { return kappa.size(); }
  double at(std::size_t i, std::size_t j) const { return lambda[i * kappa.size() + j]; }
  /// Positive masses summing to 1, nonnegative lambda with both marginals kappa
  /// (tolerance 1e-9). Throws invalid-argument.
  void validate() const;
};

struct AllocationMatrix {
  std::uint64_t N = 0;
  std::vector<std::uint64_t> counts;  ///< V_i
  std::vector<std::uint64_t> cells;   ///< V_ij, row-major

  std::size_t atoms() const noexcept { return counts.size(); }
  std::uint64_t at(std::size_t i, std::size_t j) const { return cells[i * counts.size() + j]; }
};

/// floor(x), except that values within relative 1e-9 below an integer round up
/// to it, so exact ratios that land a rounding error short are not lost.
std::uint64_t floor_snap(double x);

/// V_ij = min(floor(V_i lambda/kappa_i), floor(V_j lambda/kappa_j)). A pure
/// function of its five arguments.
std::uint64_t allocate_cell(double kappa_i, std::uint64_t V_i, double kappa_j, std::uint64_t V_j,
                            double lambda);

/// Smallest N accepted for a cell of mass lambda: 1/(epsilon lambda).
double n_large_threshold(double min_positive_lambda, double epsilon);

/// Checks |V_i/N - kappa_i| <= eps kappa_i and N >= max 1/(eps lambda_ij);
/// throws insufficient-sample naming the failing inequality.
AllocationMatrix coupling_allocate(const CouplingSpec& spec, const std::vector<std::uint64_t>& counts,
                                   std::uint64_t N);

struct AllocationCheck {
  bool c1 = true;
  bool c2 = true;
  bool c3 = true;
  /// max over cells of |V_ij - N lambda_ij| - 2 eps N lambda_ij (<= 0 when C1 holds)
  double c1_margin = 0.0;
};
AllocationCheck check_allocation(const CouplingSpec& spec, const AllocationMatrix& alloc);

/// A(P x P') from the lowest unused indices of A(P), A'(P x P') likewise in
/// A(P'), paired in increasing order; the rest is matched by continuing runs
/// phi(n) = phi(n-1) + 1 where possible. atom_of[n-1] is the atom of index n.
PermutationPlan build_permutation(const AllocationMatrix& alloc, std::span<const std::uint32_t> atom_of);

/// max_{i,j} |(1/N) #{n : atom(n) = i, atom(phi(n)) = j} - lambda_ij|
double max_cell_error(std::span<const std::uint32_t> atom_of, const PermutationPlan& phi,
                      const CouplingSpec& spec);

// ---------------------------------------------------------------------------
// Rokhlin towers

struct TowerAssignment {
  static constexpr std::int32_t kOutside = -1;

  std::uint32_t h = 1;
  std::vector<std::int32_t> level;  ///< level[n-1] in 0..h-1 or kOutside
  double outside_fraction = 0.0;
  double declared_epsilon = 0.0;
  /// Trimmed window: first index outside levels 1..h-1, last index outside
  /// levels 0..h-2 (1-based, inclusive).
  std::uint64_t window_begin = 1;
  std::uint64_t window_end = 0;
  /// Subshift mode: fraction of base visits whose first return is >= h.
  double long_return_fraction = 1.0;
  bool flagged = false;
  std::vector<std::string> notes;

  std::uint64_t size() const noexcept { return level.size(); }
  std::uint64_t window_size() const noexcept {
    return window_end >= window_begin ? window_end - window_begin + 1 : 0;
  }
  /// Number of n < N with level(n) = j <= h-2 but level(n+1) != j+1.
  std::uint64_t count_ladder_breaks() const;
};

struct RotationTowerSpec {
  double alpha = 0.0;
  double x0 = 0.0;
  std::uint32_t h = 1;
  double delta = 0.1;
};

/// Base [0, delta) for x -> x + alpha on the orbit points x_n = x0 + n alpha;
/// level(n) = min{j < h : x_{n-j} in base}. Throws invalid-tower when the
/// levels [0,delta) + j alpha overlap.
TowerAssignment build_rotation_tower(const RotationTowerSpec& spec, std::uint64_t N, double epsilon);

struct SubshiftTowerSpec {
  std::vector<Symbol> base_block;
  std::uint32_t h = 1;
};

/// Visits of the base block cut the index line into columns; each column is
/// chopped into floor(r/h) stacks of height h, the remainder and the indices
/// before the first visit are outside. Flagged when fewer than (1 - eps) of
/// visits return after >= h steps or the outside fraction exceeds eps.
TowerAssignment build_subshift_tower(const SymbolicSequence& s, const SubshiftTowerSpec& spec,
                                     std::uint64_t N, double epsilon);

// ---------------------------------------------------------------------------
// Target self-joinings

/// Self-joinings generated from the empirical measure of a labelled index set:
/// product kappa x kappa, diagonal, graph of the cyclic shift by m, or a
/// convex combination of these.
struct JoiningTarget {
  enum class Kind { Product, Diagonal, ShiftedDiagonal };
  struct Component {
    Kind kind = Kind::Product;
    std::int64_t shift = 0;
    double weight = 1.0;
  };
  std::vector<Component> components;

  static JoiningTarget product();
  static JoiningTarget diagonal();
  static JoiningTarget shifted_diagonal(std::int64_t m);
  static JoiningTarget mixture(std::vector<Component> parts);
  /// "product", "diagonal", "shifted_diagonal:m", "mixture:w*kind+w*kind"
  static JoiningTarget parse(const std::string& text);
  std::string to_string() const;
  bool has_product() const;
};

/// Dense lambda over labels 0..K-1 of the given index set.
CouplingSpec joining_spec(const JoiningTarget& target, std::span<const std::uint32_t> labels,
                          std::uint32_t K, double epsilon);

struct DynamicPermutationOptions {
  /// Number of leading column levels whose labels enter the column class.
  /// Unset: the largest depth at which the allocation preconditions hold.
  std::optional<std::uint32_t> name_depth;
};

struct DynamicPermutationReport {
  std::uint64_t window_begin = 1;
  std::uint64_t window_end = 0;
  std::uint64_t window_size = 0;
  std::uint32_t h = 1;
  double epsilon = 0.0;
  std::uint32_t name_depth = 0;
  std::uint64_t column_classes = 0;
  std::uint64_t atoms = 0;
  std::uint64_t assigned = 0;  ///< |A|
  std::uint64_t window_defects = 0;
  double defect_fraction = 0.0;  ///< window_defects / window_size
  double defect_bound = 0.0;     ///< 4 eps + 2/h + 2/window_size
  std::uint64_t ti_violations = 0;
  std::uint64_t invariance_violations = 0;
  double q_cell_error = 0.0;
  double q_cell_bound = 0.0;  ///< 8 eps
  bool refines_q = false;     ///< name_depth == h
  double outside_fraction = 0.0;
};

struct DynamicPermutationResult {
  PermutationPlan phi;
  DynamicPermutationReport report;
  /// matched[n-1] = 1 when n was placed by a tower segment (the set A).
  std::vector<std::uint8_t> matched;
};

/// Tower-compatible permutation: for each S x S tower the base cells are
/// filled and propagated upward with phi(n+1) = phi(n) + 1, segments placed so
/// that no two collide. q_labels[n-1] is the Q-atom of index n.
DynamicPermutationResult build_dynamic_permutation(std::span<const std::uint32_t> q_labels,
                                                   const TowerAssignment& tower,
                                                   const JoiningTarget& target, double epsilon,
                                                   const DynamicPermutationOptions& options = {});

// ---------------------------------------------------------------------------
// Self-joining pipeline

struct PipelineOptions {
  /// Stage l uses eps = 2^-l, h = 2^(l+1), Q = length-l blocks.
  unsigned eval_block_length = 2;
  bool aperiodize = false;
  double aperiodize_alpha = 0.6180339887498949;
  unsigned aperiodize_bins = 4;
  unsigned max_base_length = 40;
  Averaging averaging = Averaging::Cesaro;
};

struct StageReport {
  unsigned stage = 0;
  std::uint64_t N = 0;
  double epsilon = 0.0;
  std::uint32_t h = 0;
  std::string base_block;
  double tower_outside = 0.0;
  DynamicPermutationReport dynamic;
  double defect_fraction = 0.0;  ///< over all of 1..N
  double eval_error = 0.0;       ///< sup over length-k cylinder pairs
};

struct PipelineStage {
  PermutationPlan phi;
  StageReport report;
};

/// One permutation per N in Ns (increasing). Throws insufficient-sample with
/// the failing stage index.
std::vector<PipelineStage> self_joining_pipeline(const SymbolicSequence& s,
                                                 const std::vector<std::uint64_t>& Ns,
                                                 const JoiningTarget& target,
                                                 const PipelineOptions& options = {});

/// Cell masses of the target joining on length-k cylinder pairs over 1..N,
/// on the same count/N scale as coupling_from_pairs.
using CellMasses = std::map<std::pair<std::uint64_t, std::uint64_t>, double>;
CellMasses target_cells(const SymbolicSequence& s, std::uint64_t N, const JoiningTarget& target,
                        unsigned k);
/// sup over cells of |empirical - target| at block length k.
double coupling_error(const CouplingTable& empirical, const CellMasses& target, unsigned k);

/// max over blocks B, C of length <= k_max of
/// |(1/M) sum_{m <= M} freq_m(B,C) - kappa(B) kappa(C)|, where freq_m pairs
/// index n with phi(n) - m. Pairs whose second window leaves 1..N are
/// dropped and the average is taken over the pairs that remain.
StatReport product_projection_check(const SymbolicSequence& s, const PermutationPlan& phi,
                                    std::uint64_t M, unsigned k_max);
/// Same from precomputed shifted coupling tables and the cylinder table.
StatReport product_projection_check(const std::vector<CouplingTable>& shifted,
                                    const CylinderTable& kappa);

}  // namespace fslab
