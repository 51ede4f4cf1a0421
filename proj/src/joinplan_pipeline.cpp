#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fslab/dynsys.hpp"
#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"

namespace fslab {

namespace {

SymbolicSequence prefix_of(const SymbolicSequence& s, std::uint64_t N) {
  SymbolicSequence p;
  p.symbols.assign(s.symbols.begin(), s.symbols.begin() + N);
  p.alphabet_size = s.alphabet_size;
  p.symbol_values = s.symbol_values;
  p.scheme = s.scheme;
  p.lossy = s.lossy;
  return p;
}

/// Symbol times the bin of n alpha mod 1, so that no block is periodic.
SymbolicSequence aperiodized(const SymbolicSequence& s, std::uint64_t N, double alpha, unsigned bins) {
  require(bins >= 1, ErrorKind::InvalidArgument, "aperiodize bins must be >= 1");
  const std::uint64_t M = std::uint64_t(s.alphabet_size) * bins;
  require(M <= 65536, ErrorKind::OverflowAlphabet, "aperiodized alphabet exceeds 65536 symbols");
  std::vector<Symbol> out(N);
  for (std::uint64_t n = 1; n <= N; ++n) {
    auto bin = static_cast<unsigned>(std::floor(frac_mul(static_cast<std::int64_t>(n), alpha) * bins));
    bin = std::min(bin, bins - 1);
    out[n - 1] = static_cast<Symbol>(s.symbols[n - 1] * bins + bin);
  }
  return make_symbolic(std::move(out), static_cast<unsigned>(M), s.scheme + "+rotation");
}

bool fits_codes(unsigned M, unsigned len) {
  long double top = 1.0L;
  for (unsigned i = 0; i < len; ++i) top *= M;
  return top < 9.0e18L;
}

std::vector<std::uint32_t> dense_codes(const SymbolicSequence& s, unsigned len) {
  const auto codes = window_codes(s, len);
  std::vector<std::uint64_t> uniq = codes;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<std::uint32_t> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    out[i] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), codes[i]) - uniq.begin());
  }
  return out;
}

}  // namespace

CellMasses target_cells(const SymbolicSequence& s, std::uint64_t N, const JoiningTarget& target,
                        unsigned k) {
  require(N >= 1 && N <= s.size(), ErrorKind::InvalidArgument, "N outside 1..sequence length");
  const SymbolicSequence p = prefix_of(s, N);
  const CouplingTable ident = coupling_from_pairs(p, PermutationPlan::identity(N), k);
  CellMasses out;
  const double dN = double(N);
  for (const auto& c : target.components) {
    if (c.weight == 0.0) continue;
    switch (c.kind) {
      case JoiningTarget::Kind::Product: {
        const auto& first = ident.first.counts[k - 1];
        const auto& second = ident.second.counts[k - 1];
        require(double(first.size()) * double(second.size()) <= 4e6, ErrorKind::ResourceLimit,
                "product target has too many cylinder pairs");
        for (const auto& [b, cb] : first) {
          for (const auto& [d, cd] : second) out[{b, d}] += c.weight * (double(cb) / dN) * (double(cd) / dN);
        }
        break;
      }
      case JoiningTarget::Kind::Diagonal:
        for (const auto& [bc, cnt] : ident.counts[k - 1]) out[bc] += c.weight * double(cnt) / dN;
        break;
      case JoiningTarget::Kind::ShiftedDiagonal: {
        const auto n = static_cast<std::int64_t>(N);
        const auto m = static_cast<std::uint64_t>(((c.shift % n) + n) % n);
        const CouplingTable sh = coupling_from_pairs(p, PermutationPlan::cyclic_shift(N, m), k);
        for (const auto& [bc, cnt] : sh.counts[k - 1]) out[bc] += c.weight * double(cnt) / dN;
        break;
      }
    }
  }
  return out;
}

double coupling_error(const CouplingTable& empirical, const CellMasses& target, unsigned k) {
  require(k >= 1 && k <= empirical.k_max, ErrorKind::InvalidArgument, "block length outside table");
  double worst = 0.0;
  const auto& emp = empirical.counts[k - 1];
  for (const auto& [bc, cnt] : emp) {
    const auto it = target.find(bc);
    const double t = it == target.end() ? 0.0 : it->second;
    worst = std::max(worst, std::fabs(double(cnt) / double(empirical.N) - t));
  }
  for (const auto& [bc, t] : target) {
    if (!emp.count(bc)) worst = std::max(worst, std::fabs(t));
  }
  return worst;
}

std::vector<PipelineStage> self_joining_pipeline(const SymbolicSequence& s,
                                                 const std::vector<std::uint64_t>& Ns,
                                                 const JoiningTarget& target,
                                                 const PipelineOptions& options) {
  require(options.averaging == Averaging::Cesaro, ErrorKind::InvalidArgument,
          "the self-joining construction is only defined for Cesaro averages");
  require(!Ns.empty(), ErrorKind::InvalidArgument, "pipeline needs at least one N");
  require(options.eval_block_length >= 1, ErrorKind::InvalidArgument, "eval block length must be >= 1");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    require(i == 0 || Ns[i] > Ns[i - 1], ErrorKind::InvalidArgument, "Ns must be increasing");
    require(Ns[i] <= s.size(), ErrorKind::InvalidArgument,
            "N = " + std::to_string(Ns[i]) + " exceeds the sequence length");
    require(Ns[i] > i + 2, ErrorKind::InvalidArgument, "N too small for stage " + std::to_string(i + 1));
  }
  require(Ns.size() <= 20, ErrorKind::ResourceLimit, "at most 20 stages");

  const SymbolicSequence base =
      options.aperiodize ? aperiodized(s, Ns.back(), options.aperiodize_alpha, options.aperiodize_bins)
                         : prefix_of(s, Ns.back());

  std::vector<PipelineStage> stages;
  for (std::size_t idx = 0; idx < Ns.size(); ++idx) {
    const unsigned l = static_cast<unsigned>(idx + 1);
    const std::uint64_t N = Ns[idx];
    const double eps = std::ldexp(1.0, -static_cast<int>(l));
    const std::uint32_t h = 1u << (l + 1);
    const std::uint64_t Nq = N - l + 1;
    const SymbolicSequence t = prefix_of(base, N);
    const auto q = dense_codes(t, l);  // size Nq
    const SymbolicSequence tq = prefix_of(t, Nq);

    std::optional<DynamicPermutationResult> built;
    TowerAssignment tower;
    std::string base_name;
    std::string last_reason = "no block is rare enough";
    for (unsigned L = 1; L <= options.max_base_length && !built; ++L) {
      if (!fits_codes(tq.alphabet_size, L) || L > Nq) break;
      auto codes = window_codes(tq, L);
      const double windows = double(codes.size());
      std::sort(codes.begin(), codes.end());
      std::vector<std::pair<std::uint64_t, std::uint64_t>> rare;  // (count, code)
      for (std::size_t i = 0; i < codes.size();) {
        std::size_t j = i;
        while (j < codes.size() && codes[j] == codes[i]) ++j;
        if (double(j - i) / windows <= eps / h) rare.push_back({j - i, codes[i]});
        i = j;
      }
      std::sort(rare.begin(), rare.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      });
      if (rare.size() > 4) rare.resize(4);
      for (const auto& [cnt, code] : rare) {
        SubshiftTowerSpec spec{block_decode(code, L, tq.alphabet_size), h};
        TowerAssignment cand = build_subshift_tower(tq, spec, Nq, eps);
        if (cand.flagged) {
          last_reason = cand.notes.empty() ? "tower flagged" : cand.notes.back();
          continue;
        }
        try {
          built = build_dynamic_permutation(q, cand, target, eps);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::InsufficientSample && e.kind() != ErrorKind::InvalidTower) throw;
          last_reason = e.detail();
          continue;
        }
        tower = std::move(cand);
        base_name = block_string(code, L, tq.alphabet_size);
        break;
      }
    }
    if (!built) {
      fail(ErrorKind::InsufficientSample, "stage " + std::to_string(l) + " (N = " +
                                              std::to_string(N) + "): no usable tower base; " +
                                              last_reason);
    }

    std::vector<std::uint64_t> images(built->phi.images().begin(), built->phi.images().end());
    for (std::uint64_t n = Nq + 1; n <= N; ++n) images.push_back(n);
    PermutationPlan phi(std::move(images));

    StageReport rep;
    rep.stage = l;
    rep.N = N;
    rep.epsilon = eps;
    rep.h = h;
    rep.base_block = base_name;
    rep.tower_outside = tower.outside_fraction;
    rep.dynamic = built->report;
    rep.defect_fraction = phi.defect_fraction();
    const unsigned k = options.eval_block_length;
    const SymbolicSequence orig = prefix_of(s, N);
    rep.eval_error = coupling_error(coupling_from_pairs(orig, phi, k), target_cells(s, N, target, k), k);
    stages.push_back({std::move(phi), std::move(rep)});
  }
  return stages;
}

StatReport product_projection_check(const SymbolicSequence& s, const PermutationPlan& phi,
                                    std::uint64_t M, unsigned k_max) {
  require(phi.size() == s.size(), ErrorKind::InvalidArgument, "permutation size differs from sequence length");
  require(M >= 1, ErrorKind::InvalidArgument, "M must be >= 1");
  const CylinderTable kappa = cylinder_frequencies(s, k_max);
  const std::uint64_t N = s.size();
  StatReport rep;
  rep.name = "product_projection";
  rep.params = {{"M", double(M)}, {"k_max", double(k_max)}, {"N", double(N)}};
  for (unsigned len = 1; len <= k_max && len <= N; ++len) {
    const auto raw = window_codes(s, len);
    const std::uint64_t last = raw.size();
    std::vector<std::uint64_t> uniq = raw;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const std::size_t K = uniq.size();
    require(double(K) * double(last + 1) <= 2.5e8, ErrorKind::ResourceLimit,
            "too many cylinders for the shifted pair counts");
    std::vector<std::uint32_t> code(last);
    for (std::uint64_t i = 0; i < last; ++i) {
      code[i] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), raw[i]) - uniq.begin());
    }
    // prefix[c * (last + 1) + x] = #{i <= x : code(i) = c}
    std::vector<std::uint32_t> prefix(K * (last + 1), 0);
    for (std::size_t c = 0; c < K; ++c) {
      std::uint32_t* row = prefix.data() + c * (last + 1);
      for (std::uint64_t x = 1; x <= last; ++x) row[x] = row[x - 1] + (code[x - 1] == c);
    }
    std::vector<double> S(K * K, 0.0);
    long double pairs = 0.0L;
    for (std::uint64_t n = 1; n <= last; ++n) {
      const std::uint64_t p = phi(n);
      if (p < 2) continue;
      const std::uint64_t hi = std::min<std::uint64_t>(p - 1, last);
      const std::uint64_t lo = p > M ? p - M : 1;
      if (hi < lo) continue;
      pairs += static_cast<long double>(hi - lo + 1);
      double* out = S.data() + std::size_t(code[n - 1]) * K;
      for (std::size_t c = 0; c < K; ++c) {
        const std::uint32_t* row = prefix.data() + c * (last + 1);
        out[c] += row[hi] - row[lo - 1];
      }
    }
    double worst = 0.0;
    if (pairs > 0.0L) {
      for (std::size_t b = 0; b < K; ++b) {
        const double kb = kappa.freq(len, uniq[b]);
        for (std::size_t c = 0; c < K; ++c) {
          const double avg = static_cast<double>(static_cast<long double>(S[b * K + c]) / pairs);
          worst = std::max(worst, std::fabs(avg - kb * kappa.freq(len, uniq[c])));
        }
      }
    } else {
      rep.notes.push_back("no shifted pairs at length " + std::to_string(len));
    }
    rep.trend.emplace_back(len, worst);
    rep.diagnostics["len" + std::to_string(len)] = worst;
    rep.value = std::max(rep.value, worst);
  }
  return rep;
}

StatReport product_projection_check(const std::vector<CouplingTable>& shifted, const CylinderTable& kappa) {
  require(!shifted.empty(), ErrorKind::InvalidArgument, "need at least one shifted coupling table");
  const unsigned k_max = std::min(kappa.k_max, shifted.front().k_max);
  StatReport rep;
  rep.name = "product_projection";
  rep.params = {{"M", double(shifted.size())}, {"k_max", double(k_max)}, {"N", double(kappa.N)}};
  const double M = double(shifted.size());
  for (unsigned len = 1; len <= k_max; ++len) {
    std::map<std::pair<std::uint64_t, std::uint64_t>, double> avg;
    for (const auto& t : shifted) {
      require(t.k_max >= len, ErrorKind::InvalidArgument, "shifted tables disagree in k_max");
      for (const auto& [bc, cnt] : t.counts[len - 1]) avg[bc] += double(cnt) / double(t.N) / M;
    }
    double worst = 0.0;
    const auto& codes = kappa.counts[len - 1];
    for (const auto& [b, cb] : codes) {
      for (const auto& [c, cc] : codes) {
        const auto it = avg.find({b, c});
        const double a = it == avg.end() ? 0.0 : it->second;
        worst = std::max(worst, std::fabs(a - kappa.freq(len, b) * kappa.freq(len, c)));
      }
    }
    for (const auto& [bc, a] : avg) {
      if (!codes.count(bc.first) || !codes.count(bc.second)) worst = std::max(worst, a);
    }
    rep.trend.emplace_back(len, worst);
    rep.diagnostics["len" + std::to_string(len)] = worst;
    rep.value = std::max(rep.value, worst);
  }
  return rep;
}

}  // namespace fslab
