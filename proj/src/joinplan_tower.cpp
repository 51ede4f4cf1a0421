#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fslab/dynsys.hpp"
#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"
#include "fslab/numeric.hpp"

namespace fslab {

std::uint64_t TowerAssignment::count_ladder_breaks() const {
  std::uint64_t breaks = 0;
  for (std::uint64_t i = 0; i + 1 < level.size(); ++i) {
    const std::int32_t j = level[i];
    if (j >= 0 && j + 1 < static_cast<std::int32_t>(h) && level[i + 1] != j + 1) ++breaks;
  }
  return breaks;
}

namespace {

void finish(TowerAssignment& t) {
  const std::uint64_t N = t.level.size();
  const auto top = static_cast<std::int32_t>(t.h) - 1;
  std::uint64_t outside = 0;
  for (auto j : t.level) outside += j == TowerAssignment::kOutside;
  t.outside_fraction = N ? double(outside) / double(N) : 0.0;

  t.window_begin = N + 1;
  for (std::uint64_t n = 1; n <= N; ++n) {
    const std::int32_t j = t.level[n - 1];
    if (!(j >= 1 && j <= top)) {
      t.window_begin = n;
      break;
    }
  }
  t.window_end = 0;
  for (std::uint64_t n = N; n >= 1; --n) {
    const std::int32_t j = t.level[n - 1];
    if (!(j >= 0 && j <= top - 1)) {
      t.window_end = n;
      break;
    }
  }
  if (t.window_end < t.window_begin) {
    t.window_begin = 1;
    t.window_end = 0;
  }
  if (t.outside_fraction > t.declared_epsilon) {
    t.flagged = true;
    std::ostringstream msg;
    msg << "outside fraction " << t.outside_fraction << " exceeds eps " << t.declared_epsilon;
    t.notes.push_back(msg.str());
  }
  if (t.count_ladder_breaks() != 0) {
    fail(ErrorKind::InvalidTower, "tower levels do not climb by one along the orbit");
  }
}

}  // namespace

TowerAssignment build_rotation_tower(const RotationTowerSpec& spec, std::uint64_t N, double epsilon) {
  require(spec.h >= 1, ErrorKind::InvalidArgument, "tower height must be >= 1");
  require(spec.delta > 0.0 && spec.delta <= 1.0, ErrorKind::InvalidArgument,
          "base width must be in (0, 1]");
  require(std::isfinite(spec.alpha) && std::isfinite(spec.x0), ErrorKind::InvalidArgument,
          "alpha and x0 must be finite");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::InvalidArgument, "epsilon must be in (0, 1)");
  const std::uint32_t h = spec.h;

  std::vector<double> starts(h);
  for (std::uint32_t j = 0; j < h; ++j) starts[j] = frac_mul(j, spec.alpha);
  std::sort(starts.begin(), starts.end());
  for (std::uint32_t j = 0; j < h; ++j) {
    const double gap = (j + 1 < h ? starts[j + 1] : starts[0] + 1.0) - starts[j];
    if (gap < spec.delta) {
      std::ostringstream msg;
      msg << "tower levels overlap: level starts " << starts[j] << " and "
          << (j + 1 < h ? starts[j + 1] : starts[0]) << " are closer than delta = " << spec.delta;
      fail(ErrorKind::InvalidTower, msg.str());
    }
  }

  TowerAssignment t;
  t.h = h;
  t.declared_epsilon = epsilon;
  t.level.assign(N, TowerAssignment::kOutside);
  const double x0 = frac(spec.x0);
  // x_k in base for k = n - j, k from 2 - h to N
  const std::int64_t k0 = 2 - static_cast<std::int64_t>(h);
  std::int64_t last_visit = std::numeric_limits<std::int64_t>::min();
  for (std::int64_t k = k0; k <= static_cast<std::int64_t>(N); ++k) {
    if (frac(x0 + frac_mul(k, spec.alpha)) < spec.delta) last_visit = k;
    if (k >= 1 && last_visit != std::numeric_limits<std::int64_t>::min() &&
        k - last_visit < static_cast<std::int64_t>(h)) {
      t.level[k - 1] = static_cast<std::int32_t>(k - last_visit);
    }
  }
  finish(t);
  return t;
}

TowerAssignment build_subshift_tower(const SymbolicSequence& s, const SubshiftTowerSpec& spec,
                                     std::uint64_t N, double epsilon) {
  require(spec.h >= 1, ErrorKind::InvalidArgument, "tower height must be >= 1");
  require(!spec.base_block.empty(), ErrorKind::InvalidArgument, "base block must be nonempty");
  require(N <= s.size(), ErrorKind::InvalidArgument, "N exceeds the sequence length");
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::InvalidArgument, "epsilon must be in (0, 1)");
  const std::uint64_t L = spec.base_block.size();
  const std::uint32_t h = spec.h;

  std::vector<std::uint64_t> visits;
  for (std::uint64_t n = 1; n + L - 1 <= N; ++n) {
    if (std::equal(spec.base_block.begin(), spec.base_block.end(), s.symbols.begin() + (n - 1))) {
      visits.push_back(n);
    }
  }
  TowerAssignment t;
  t.h = h;
  t.declared_epsilon = epsilon;
  t.level.assign(N, TowerAssignment::kOutside);
  std::uint64_t long_returns = 0;
  for (std::size_t v = 0; v < visits.size(); ++v) {
    const std::uint64_t start = visits[v];
    const std::uint64_t next = v + 1 < visits.size() ? visits[v + 1] : N + 1;
    const std::uint64_t r = next - start;
    if (r >= h) ++long_returns;
    const std::uint64_t stacks = r / h;
    for (std::uint64_t i = 0; i < stacks * h; ++i) {
      t.level[start - 1 + i] = static_cast<std::int32_t>(i % h);
    }
  }
  if (visits.empty()) {
    t.long_return_fraction = 0.0;
    t.flagged = true;
    t.notes.push_back("base block never occurs");
  } else {
    t.long_return_fraction = double(long_returns) / double(visits.size());
    if (t.long_return_fraction < 1.0 - epsilon) {
      t.flagged = true;
      std::ostringstream msg;
      msg << "only " << t.long_return_fraction << " of base visits return after >= h steps";
      t.notes.push_back(msg.str());
    }
  }
  finish(t);
  return t;
}

}  // namespace fslab
