#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"
#include "joinplan_detail.hpp"

namespace fslab {

void CouplingSpec::validate() const {
  const std::size_t m = kappa.size();
  require(m >= 1, ErrorKind::InvalidArgument, "coupling needs at least one atom");
  require(lambda.size() == m * m, ErrorKind::InvalidArgument,
          "lambda has " + std::to_string(lambda.size()) + " entries, expected " +
              std::to_string(m * m));
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::InvalidArgument, "epsilon must be in (0, 1)");
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    require(kappa[i] > 0.0, ErrorKind::InvalidArgument,
            "kappa[" + std::to_string(i) + "] must be positive");
    total += kappa[i];
  }
  require(std::fabs(total - 1.0) <= 1e-9, ErrorKind::InvalidArgument, "kappa must sum to 1");
  std::vector<double> rows(m, 0.0), cols(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double l = at(i, j);
      require(l >= 0.0 && std::isfinite(l), ErrorKind::InvalidArgument,
              "lambda[" + std::to_string(i) + "][" + std::to_string(j) + "] must be >= 0");
      rows[i] += l;
      cols[j] += l;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (std::fabs(rows[i] - kappa[i]) > 1e-9 || std::fabs(cols[i] - kappa[i]) > 1e-9) {
      fail(ErrorKind::InvalidArgument,
           "lambda marginals differ from kappa at atom " + std::to_string(i));
    }
  }
}

std::uint64_t floor_snap(double x) {
  if (!(x > 0.0)) return 0;
  const double up = std::ceil(x);
  if (up - x <= 1e-9 * up) return static_cast<std::uint64_t>(up);
  return static_cast<std::uint64_t>(std::floor(x));
}

std::uint64_t allocate_cell(double kappa_i, std::uint64_t V_i, double kappa_j, std::uint64_t V_j,
                            double lambda) {
  if (!(lambda > 0.0)) return 0;
  const std::uint64_t a = floor_snap(double(V_i) * lambda / kappa_i);
  const std::uint64_t b = floor_snap(double(V_j) * lambda / kappa_j);
  return std::min(a, b);
}

double n_large_threshold(double min_positive_lambda, double epsilon) {
  return 1.0 / (epsilon * min_positive_lambda);
}

namespace detail {

void check_approximation(double kappa, std::uint64_t V, std::uint64_t N, double epsilon,
                         const std::string& atom) {
  const double ratio = double(V) / double(N);
  if (std::fabs(ratio - kappa) > epsilon * kappa * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "approximation |V/N - kappa| <= eps kappa fails at atom " << atom << ": V/N = " << ratio
        << ", kappa = " << kappa << ", eps = " << epsilon;
    fail(ErrorKind::InsufficientSample, msg.str());
  }
}

void check_n_large(double min_lambda, std::uint64_t N, double epsilon) {
  if (!(min_lambda > 0.0)) return;
  const double need = n_large_threshold(min_lambda, epsilon);
  if (double(N) < need) {
    std::ostringstream msg;
    msg << "N_large: N >= 1/(eps lambda) fails: N = " << N << " < " << std::ceil(need - 1e-9)
        << " (min lambda = " << min_lambda << ", eps = " << epsilon << ")";
    fail(ErrorKind::InsufficientSample, msg.str());
  }
}

}  // namespace detail

AllocationMatrix coupling_allocate(const CouplingSpec& spec, const std::vector<std::uint64_t>& counts,
                                   std::uint64_t N) {
  spec.validate();
  const std::size_t m = spec.atoms();
  require(counts.size() == m, ErrorKind::InvalidArgument,
          "got " + std::to_string(counts.size()) + " atom counts for " + std::to_string(m) +
              " atoms");
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
  for (std::size_t i = 0; i < m; ++i) {
    detail::check_approximation(spec.kappa[i], counts[i], N, spec.epsilon, std::to_string(i));
  }
  double min_lambda = std::numeric_limits<double>::infinity();
  for (double l : spec.lambda) {
    if (l > 0.0) min_lambda = std::min(min_lambda, l);
  }
  detail::check_n_large(min_lambda, N, spec.epsilon);

  AllocationMatrix alloc;
  alloc.N = N;
  alloc.counts = counts;
  alloc.cells.resize(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      alloc.cells[i * m + j] =
          allocate_cell(spec.kappa[i], counts[i], spec.kappa[j], counts[j], spec.at(i, j));
    }
  }
  const AllocationCheck check = check_allocation(spec, alloc);
  require(check.c2 && check.c3, ErrorKind::Internal, "allocation exceeds an atom count");
  return alloc;
}

AllocationCheck check_allocation(const CouplingSpec& spec, const AllocationMatrix& alloc) {
  const std::size_t m = alloc.atoms();
  AllocationCheck out;
  out.c1_margin = -std::numeric_limits<double>::infinity();
  std::vector<std::uint64_t> rows(m, 0), cols(m, 0);
  const long double N = alloc.N;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint64_t v = alloc.at(i, j);
      rows[i] += v;
      cols[j] += v;
      const long double target = N * static_cast<long double>(spec.at(i, j));
      const long double margin = std::fabs(static_cast<long double>(v) - target) -
                                 2.0L * static_cast<long double>(spec.epsilon) * target;
      out.c1_margin = std::max(out.c1_margin, static_cast<double>(margin));
      if (margin > 1e-9L * std::max(1.0L, target)) out.c1 = false;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (rows[i] > alloc.counts[i]) out.c2 = false;
    if (cols[i] > alloc.counts[i]) out.c3 = false;
  }
  return out;
}

namespace detail {

void RangePool::reset(std::uint64_t n) {
  taken_.assign(n + 2, 0);
  next_.resize(n + 2);
  for (std::uint64_t i = 0; i < n + 2; ++i) next_[i] = i;
}

void RangePool::take(std::uint64_t v) {
  taken_[v] = 1;
  next_[v] = v + 1;
}

std::uint64_t RangePool::lowest_free(std::uint64_t from) {
  std::uint64_t r = from;
  while (next_[r] != r) r = next_[r];
  while (next_[from] != r) {
    const std::uint64_t up = next_[from];
    next_[from] = r;
    from = up;
  }
  return r;
}

void continue_runs(std::vector<std::uint64_t>& images, std::uint64_t begin, std::uint64_t end,
                   RangePool& pool) {
  // images indexed by position - begin; 0 marks unassigned.
  for (std::uint64_t n = begin; n <= end; ++n) {
    auto& slot = images[n - begin];
    if (slot != 0) continue;
    std::uint64_t v = 0;
    if (n > begin) {
      const std::uint64_t prev = images[n - 1 - begin];
      if (prev + 1 <= end && !pool.taken(prev + 1)) v = prev + 1;
    }
    if (v == 0) v = pool.lowest_free(begin);
    require(v >= begin && v <= end, ErrorKind::Internal, "range pool exhausted");
    pool.take(v);
    slot = v;
  }
}

}  // namespace detail

PermutationPlan build_permutation(const AllocationMatrix& alloc, std::span<const std::uint32_t> atom_of) {
  const std::size_t m = alloc.atoms();
  const std::uint64_t N = atom_of.size();
  require(N == alloc.N, ErrorKind::InvalidArgument,
          "label count " + std::to_string(N) + " differs from N = " + std::to_string(alloc.N));
  std::vector<std::vector<std::uint64_t>> members(m);
  for (std::uint64_t n = 1; n <= N; ++n) {
    const std::uint32_t a = atom_of[n - 1];
    require(a < m, ErrorKind::InvalidArgument, "atom label out of range at n = " + std::to_string(n));
    members[a].push_back(n);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (members[i].size() != alloc.counts[i]) {
      fail(ErrorKind::InvalidArgument, "atom " + std::to_string(i) + " has " +
                                           std::to_string(members[i].size()) +
                                           " indices but V = " + std::to_string(alloc.counts[i]));
    }
  }
  std::vector<std::uint64_t> images(N, 0);
  detail::RangePool pool;
  pool.reset(N);
  std::vector<std::size_t> row_cursor(m, 0), col_cursor(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const std::uint64_t v = alloc.at(i, j);
      require(row_cursor[i] + v <= members[i].size() && col_cursor[j] + v <= members[j].size(),
              ErrorKind::InvalidArgument, "allocation exceeds atom counts");
      for (std::uint64_t t = 0; t < v; ++t) {
        const std::uint64_t n = members[i][row_cursor[i]++];
        const std::uint64_t r = members[j][col_cursor[j]++];
        images[n - 1] = r;
        pool.take(r);
      }
    }
  }
  detail::continue_runs(images, 1, N, pool);
  return PermutationPlan(std::move(images));
}

double max_cell_error(std::span<const std::uint32_t> atom_of, const PermutationPlan& phi,
                      const CouplingSpec& spec) {
  const std::size_t m = spec.atoms();
  const std::uint64_t N = atom_of.size();
  require(phi.size() == N, ErrorKind::InvalidArgument, "permutation size differs from label count");
  std::vector<std::uint64_t> cells(m * m, 0);
  for (std::uint64_t n = 1; n <= N; ++n) cells[atom_of[n - 1] * m + atom_of[phi(n) - 1]]++;
  double worst = 0.0;
  for (std::size_t c = 0; c < m * m; ++c) {
    worst = std::max(worst, std::fabs(double(cells[c]) / double(N) - spec.lambda[c]));
  }
  return worst;
}

}  // namespace fslab
