#include "fslab/empirics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fslab/error.hpp"

namespace fslab {

SymbolicSequence make_symbolic(std::vector<Symbol> symbols, unsigned alphabet_size,
                               std::string scheme) {
  require(!symbols.empty(), ErrorKind::InvalidArgument, "symbolic sequence must be nonempty");
  require(alphabet_size >= 1 && alphabet_size <= 65536, ErrorKind::InvalidArgument,
          "alphabet size must be in 1..65536");
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] >= alphabet_size) {
      fail(ErrorKind::InvalidArgument, "symbol at n = " + std::to_string(i + 1) +
                                           " exceeds alphabet size " +
                                           std::to_string(alphabet_size));
    }
  }
  SymbolicSequence s;
  s.symbols = std::move(symbols);
  s.alphabet_size = alphabet_size;
  s.symbol_values.resize(alphabet_size);
  for (unsigned a = 0; a < alphabet_size; ++a) s.symbol_values[a] = unit(double(a) / alphabet_size);
  s.scheme = std::move(scheme);
  return s;
}

namespace {

SymbolicSequence quantize_signs(const ArithmeticSequence& u) {
  SymbolicSequence s;
  s.symbols.resize(u.size());
  s.alphabet_size = 2;
  s.symbol_values = {-1.0, 1.0};
  s.scheme = "signs";
  const auto v = u.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    s.symbols[i] = v[i].real() >= 0.0 ? 1 : 0;
    if (v[i] != cplx(1.0) && v[i] != cplx(-1.0)) s.lossy = true;
  }
  return s;
}

SymbolicSequence quantize_phase(const ArithmeticSequence& u, unsigned M) {
  require(M >= 1 && M <= 65535, ErrorKind::InvalidArgument, "phase bins must be in 1..65535");
  SymbolicSequence s;
  s.symbols.resize(u.size());
  s.scheme = "phase_bins:" + std::to_string(M);
  s.lossy = true;
  bool zeros = false;
  const auto v = u.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m == 0.0) {
      s.symbols[i] = static_cast<Symbol>(M);
      zeros = true;
      continue;
    }
    if (m < 1.0 - 1e-9) {
      fail(ErrorKind::InvalidArgument, "phase_bins needs |u(n)| in {0} or [1-1e-9, 1]; |u(" +
                                           std::to_string(i + 1) + ")| = " + std::to_string(m));
    }
    const double theta = frac(std::atan2(v[i].imag(), v[i].real()) / (2.0 * std::numbers::pi));
    double t = theta * M;
    const double nearest = std::round(t);
    if (std::fabs(t - nearest) < 1e-9) t = nearest;
    auto bin = static_cast<unsigned>(std::floor(t));
    if (bin >= M) bin -= M;
    s.symbols[i] = static_cast<Symbol>(bin);
  }
  s.alphabet_size = M + (zeros ? 1 : 0);
  s.symbol_values.resize(s.alphabet_size);
  for (unsigned b = 0; b < M; ++b) s.symbol_values[b] = unit((b + 0.5) / M);
  if (zeros) s.symbol_values[M] = 0.0;
  return s;
}

SymbolicSequence quantize_values(const ArithmeticSequence& u) {
  auto less = [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  };
  const auto v = u.values();
  std::vector<cplx> distinct;
  for (const cplx& z : v) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), z, less);
    if (it != distinct.end() && *it == z) continue;
    if (distinct.size() == kMaxValueSet) {
      fail(ErrorKind::OverflowAlphabet,
           "more than " + std::to_string(kMaxValueSet) + " distinct values");
    }
    distinct.insert(it, z);
  }
  SymbolicSequence s;
  s.symbols.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    s.symbols[i] = static_cast<Symbol>(
        std::lower_bound(distinct.begin(), distinct.end(), v[i], less) - distinct.begin());
  }
  s.alphabet_size = static_cast<unsigned>(distinct.size());
  s.symbol_values = std::move(distinct);
  s.scheme = "value_set";
  return s;
}

}  // namespace

SymbolicSequence quantize(const ArithmeticSequence& u, const QuantizeOptions& options) {
  switch (options.mode) {
    case QuantizeMode::Signs:
      return quantize_signs(u);
    case QuantizeMode::PhaseBins:
      return quantize_phase(u, options.bins);
    case QuantizeMode::ValueSet:
      return quantize_values(u);
  }
  fail(ErrorKind::Internal, "unknown quantize mode");
}

std::uint64_t block_code(std::span<const Symbol> block, unsigned alphabet_size) {
  std::uint64_t code = 0;
  for (Symbol a : block) code = code * alphabet_size + a;
  return code;
}

std::vector<Symbol> block_decode(std::uint64_t code, unsigned length, unsigned alphabet_size) {
  std::vector<Symbol> block(length);
  for (unsigned i = length; i-- > 0;) {
    block[i] = static_cast<Symbol>(code % alphabet_size);
    code /= alphabet_size;
  }
  return block;
}

std::string block_string(std::uint64_t code, unsigned length, unsigned alphabet_size) {
  const auto block = block_decode(code, length, alphabet_size);
  std::string out;
  for (std::size_t i = 0; i < block.size(); ++i) {
    if (alphabet_size > 10 && i > 0) out += '.';
    out += std::to_string(block[i]);
  }
  return out;
}

void check_cylinder_guard(unsigned alphabet_size, unsigned k_max) {
  require(k_max >= 1, ErrorKind::InvalidArgument, "k_max must be >= 1");
  if (k_max > kMaxBlockLength) {
    fail(ErrorKind::ResourceLimit, "k_max = " + std::to_string(k_max) + " exceeds " +
                                       std::to_string(kMaxBlockLength));
  }
  if (std::pow(static_cast<double>(alphabet_size), static_cast<double>(k_max)) > kMaxCylinderCells) {
    fail(ErrorKind::ResourceLimit, "M^k_max = " + std::to_string(alphabet_size) + "^" +
                                       std::to_string(k_max) + " exceeds 1e7 cells");
  }
}

double CylinderTable::freq(unsigned length, std::uint64_t code) const {
  if (length < 1 || length > k_max) return 0.0;
  const auto& level = counts[length - 1];
  const auto it = level.find(code);
  if (it == level.end() || denominators[length - 1] == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(denominators[length - 1]);
}

double CylinderTable::freq(std::span<const Symbol> block) const {
  return freq(static_cast<unsigned>(block.size()), block_code(block, alphabet_size));
}

double CouplingTable::freq(unsigned length, std::uint64_t b, std::uint64_t c) const {
  if (length < 1 || length > k_max || N == 0) return 0.0;
  const auto& level = counts[length - 1];
  const auto it = level.find({b, c});
  return it == level.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(N);
}

std::vector<std::uint64_t> window_codes(const SymbolicSequence& s, unsigned len) {
  const std::uint64_t N = s.size();
  if (len > N) return {};
  std::vector<std::uint64_t> codes(N - len + 1);
  std::uint64_t top = 1;
  for (unsigned i = 1; i < len; ++i) top *= s.alphabet_size;
  std::uint64_t code = block_code(std::span(s.symbols).first(len), s.alphabet_size);
  codes[0] = code;
  for (std::uint64_t i = 1; i + len <= N; ++i) {
    code = (code - s.symbols[i - 1] * top) * s.alphabet_size + s.symbols[i + len - 1];
    codes[i] = code;
  }
  return codes;
}

CylinderTable cylinder_frequencies(const SymbolicSequence& s, unsigned k_max) {
  check_cylinder_guard(s.alphabet_size, k_max);
  CylinderTable table;
  table.k_max = k_max;
  table.N = s.size();
  table.alphabet_size = s.alphabet_size;
  table.counts.resize(k_max);
  table.denominators.resize(k_max);
  std::uint64_t cells = 1;
  for (unsigned len = 1; len <= k_max; ++len) {
    cells *= s.alphabet_size;
    table.denominators[len - 1] = table.N >= len ? table.N - len + 1 : 0;
    const auto codes = window_codes(s, len);
    std::vector<std::uint64_t> dense(cells, 0);
    for (auto c : codes) ++dense[c];
    auto& level = table.counts[len - 1];
    for (std::uint64_t c = 0; c < cells; ++c) {
      if (dense[c]) level.emplace_hint(level.end(), c, dense[c]);
    }
  }
  return table;
}

CouplingTable coupling_from_pairs(const SymbolicSequence& s, const PermutationPlan& phi,
                                  unsigned k_max) {
  check_cylinder_guard(s.alphabet_size, k_max);
  require(phi.size() == s.size(), ErrorKind::InvalidArgument,
          "permutation size " + std::to_string(phi.size()) + " differs from sequence length " +
              std::to_string(s.size()));
  const std::uint64_t N = s.size();
  CouplingTable table;
  table.k_max = k_max;
  table.N = N;
  table.alphabet_size = s.alphabet_size;
  table.counts.resize(k_max);
  table.edge_loss.assign(k_max, 0);
  for (CylinderTable* m : {&table.first, &table.second}) {
    m->k_max = k_max;
    m->N = N;
    m->alphabet_size = s.alphabet_size;
    m->counts.resize(k_max);
    m->denominators.assign(k_max, N);
  }
  std::uint64_t cells = 1;
  for (unsigned len = 1; len <= k_max; ++len) {
    cells *= s.alphabet_size;
    const auto codes = window_codes(s, len);
    const std::uint64_t last = codes.size();  // windows start at 1..last
    std::vector<std::uint64_t> keys;
    keys.reserve(N);
    for (std::uint64_t n = 1; n <= N; ++n) {
      const std::uint64_t m = phi(n);
      if (n > last || m > last) {
        ++table.edge_loss[len - 1];
        continue;
      }
      keys.push_back(codes[n - 1] * cells + codes[m - 1]);
    }
    std::sort(keys.begin(), keys.end());
    auto& level = table.counts[len - 1];
    auto& row = table.first.counts[len - 1];
    auto& col = table.second.counts[len - 1];
    for (std::size_t i = 0; i < keys.size();) {
      std::size_t j = i;
      while (j < keys.size() && keys[j] == keys[i]) ++j;
      const std::uint64_t b = keys[i] / cells;
      const std::uint64_t c = keys[i] % cells;
      level.emplace_hint(level.end(), std::make_pair(b, c), j - i);
      row[b] += j - i;
      col[c] += j - i;
      i = j;
    }
  }
  return table;
}

double marginal_discrepancy(const CylinderTable& marginal, const CylinderTable& reference) {
  double worst = 0.0;
  const unsigned k = std::min(marginal.k_max, reference.k_max);
  for (unsigned len = 1; len <= k; ++len) {
    for (const auto& [code, count] : marginal.counts[len - 1]) {
      worst = std::max(worst, std::fabs(marginal.freq(len, code) - reference.freq(len, code)));
    }
    for (const auto& [code, count] : reference.counts[len - 1]) {
      worst = std::max(worst, std::fabs(marginal.freq(len, code) - reference.freq(len, code)));
    }
  }
  return worst;
}

}  // namespace fslab
