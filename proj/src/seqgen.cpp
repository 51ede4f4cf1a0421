#include "fslab/seqgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fslab/error.hpp"

namespace fslab::seqgen {
namespace {

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_length(std::uint64_t N) {
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
}

std::vector<bool> liouville_parity_linear(std::uint64_t N) {
  std::vector<bool> odd(N + 1, false);
  std::vector<bool> composite(N + 1, false);
  std::vector<std::uint64_t> primes;
  for (std::uint64_t i = 2; i <= N; ++i) {
    if (!composite[i]) {
      primes.push_back(i);
      odd[i] = true;
    }
    for (std::uint64_t p : primes) {
      const std::uint64_t m = p * i;
      if (m > N) break;
      composite[m] = true;
      odd[m] = !odd[i];
      if (i % p == 0) break;
    }
  }
  return odd;
}

std::vector<std::uint64_t> small_primes(std::uint64_t limit) {
  std::vector<bool> composite(limit + 1, false);
  std::vector<std::uint64_t> primes;
  for (std::uint64_t i = 2; i <= limit; ++i) {
    if (composite[i]) continue;
    primes.push_back(i);
    for (std::uint64_t m = i * i; m <= limit; m += i) composite[m] = true;
  }
  return primes;
}

std::vector<bool> liouville_parity_segmented(std::uint64_t N) {
  std::vector<bool> odd(N + 1, false);
  std::uint64_t root = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(N)));
  while (root * root > N) --root;
  while ((root + 1) * (root + 1) <= N) ++root;
  const auto primes = small_primes(root);
  constexpr std::uint64_t kSegment = std::uint64_t{1} << 20;
  std::vector<std::uint64_t> rest;
  std::vector<unsigned char> parity;
  for (std::uint64_t lo = 1; lo <= N; lo += kSegment) {
    const std::uint64_t hi = std::min(N + 1, lo + kSegment);
    const std::uint64_t len = hi - lo;
    rest.resize(len);
    parity.assign(len, 0);
    for (std::uint64_t i = 0; i < len; ++i) rest[i] = lo + i;
    for (std::uint64_t p : primes) {
      // One pass per prime power p^k: each multiple loses one factor p.
      for (std::uint64_t pk = p; pk < hi; ) {
        for (std::uint64_t m = (lo + pk - 1) / pk * pk; m < hi; m += pk) {
          rest[m - lo] /= p;
          parity[m - lo] ^= 1;
        }
        if (pk > (hi - 1) / p) break;
        pk *= p;
      }
    }
    for (std::uint64_t i = 0; i < len; ++i) {
      odd[lo + i] = (parity[i] ^ (rest[i] > 1 ? 1 : 0)) != 0;
    }
  }
  odd[0] = false;
  return odd;
}

ArithmeticSequence from_parity(const std::vector<bool>& odd, std::uint64_t N) {
  std::vector<cplx> values(N);
  for (std::uint64_t n = 1; n <= N; ++n) values[n - 1] = odd[n] ? -1.0 : 1.0;
  return ArithmeticSequence(std::move(values), "liouville", {{"N", std::to_string(N)}});
}

}  // namespace

std::vector<bool> liouville_parity(std::uint64_t N, std::uint64_t segmented_above) {
  require_length(N);
  return N > segmented_above ? liouville_parity_segmented(N) : liouville_parity_linear(N);
}

ArithmeticSequence gen_liouville(std::uint64_t N) {
  require_length(N);
  return from_parity(liouville_parity(N), N);
}

ArithmeticSequence gen_skew_sequence(double alpha, std::uint64_t L) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie in (0,1), got " + fmt_double(alpha));
  require(L >= 1, ErrorKind::InvalidArgument, "L must be >= 1");
  std::vector<cplx> values;
  values.reserve(skew_sequence_length(L));
  for (std::uint64_t k = 1; k <= L; ++k) {
    const long double step = frac(static_cast<long double>(k) * static_cast<long double>(alpha));
    for (std::uint64_t j = 0; j < k * k; ++j) {
      values.push_back(unit(static_cast<double>(frac(static_cast<long double>(j) * step))));
    }
  }
  return ArithmeticSequence(std::move(values), "skew",
                            {{"alpha", fmt_double(alpha)}, {"L", std::to_string(L)}});
}

cplx skew_character_average(double alpha, std::uint64_t L, int r, int s) {
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument,
          "alpha must lie in (0,1), got " + fmt_double(alpha));
  require(L >= 1, ErrorKind::InvalidArgument, "L must be >= 1");
  long double re = 0, im = 0;
  for (std::uint64_t k = 1; k <= L; ++k) {
    const long double x = frac(static_cast<long double>(k) * static_cast<long double>(alpha));
    for (std::uint64_t j = 0; j < k * k; ++j) {
      const cplx z = unit(static_cast<double>(frac(r * x + s * frac(static_cast<long double>(j) * x))));
      re += z.real();
      im += z.imag();
    }
  }
  const long double N = skew_sequence_length(L);
  return {static_cast<double>(re / N), static_cast<double>(im / N)};
}

ArithmeticSequence gen_archimedean(double t, std::uint64_t N) {
  require_length(N);
  std::vector<cplx> values(N);
  for (std::uint64_t n = 1; n <= N; ++n) {
    values[n - 1] = std::polar(1.0, t * std::log(static_cast<double>(n)));
  }
  return ArithmeticSequence(std::move(values), "archimedean",
                            {{"t", fmt_double(t)}, {"N", std::to_string(N)}});
}

ArithmeticSequence gen_power_decay(double r, std::uint64_t N) {
  require(r > 0.0, ErrorKind::InvalidArgument, "r must be > 0, got " + fmt_double(r));
  require_length(N);
  std::vector<cplx> values(N);
  for (std::uint64_t n = 1; n <= N; ++n) values[n - 1] = std::pow(static_cast<double>(n), -r);
  return ArithmeticSequence(std::move(values), "power_decay",
                            {{"r", fmt_double(r)}, {"N", std::to_string(N)}});
}

ArithmeticSequence gen_constant(cplx value, std::uint64_t N) {
  require_length(N);
  return ArithmeticSequence(std::vector<cplx>(N, value), "constant",
                            {{"re", fmt_double(value.real())},
                             {"im", fmt_double(value.imag())},
                             {"N", std::to_string(N)}});
}

ArithmeticSequence gen_alternating(std::uint64_t N) {
  require_length(N);
  std::vector<cplx> values(N);
  for (std::uint64_t n = 1; n <= N; ++n) values[n - 1] = (n % 2 == 0) ? 1.0 : -1.0;
  return ArithmeticSequence(std::move(values), "alternating", {{"N", std::to_string(N)}});
}

ArithmeticSequence gen_root_of_unity(std::uint64_t p, std::uint64_t q, std::uint64_t N) {
  require(q >= 1, ErrorKind::InvalidArgument, "q must be >= 1");
  require_length(N);
  std::vector<cplx> values(N);
  for (std::uint64_t n = 1; n <= N; ++n) {
    values[n - 1] = unit(static_cast<double>((n * p) % q) / static_cast<double>(q));
  }
  return ArithmeticSequence(std::move(values), "root_of_unity",
                            {{"p", std::to_string(p)}, {"q", std::to_string(q)},
                             {"N", std::to_string(N)}});
}

ArithmeticSequence gen_iid_signs(std::uint64_t seed, std::uint64_t N) {
  require_length(N);
  std::mt19937_64 rng(seed);
  std::vector<cplx> values(N);
  for (auto& v : values) v = (rng() >> 63) ? 1.0 : -1.0;
  return ArithmeticSequence(std::move(values), "iid_signs",
                            {{"seed", std::to_string(seed)}, {"N", std::to_string(N)}});
}

double besicovitch_mean(const ArithmeticSequence& u) {
  const auto v = u.values();
  return parallel::sum(v.size(), [&](std::size_t i) { return std::abs(v[i]); }) /
         static_cast<double>(v.size());
}

double mean_variation(const ArithmeticSequence& u) {
  const auto v = u.values();
  if (v.size() < 2) return 0.0;
  return parallel::sum(v.size() - 1, [&](std::size_t i) { return std::abs(v[i + 1] - v[i]); }) /
         static_cast<double>(v.size() - 1);
}

std::vector<double> default_delta_schedule(std::size_t count) {
  std::vector<double> delta(count);
  double d = 1.0;
  for (auto& x : delta) x = (d /= 4.0);
  return delta;
}

BlockifyResult msv_blockify(const ArithmeticSequence& v, const std::vector<double>& delta,
                            double flag_threshold) {
  require(!delta.empty(), ErrorKind::InvalidArgument, "delta schedule must be nonempty");
  for (std::size_t j = 0; j < delta.size(); ++j) {
    require(delta[j] > 0.0, ErrorKind::InvalidArgument, "delta schedule must be positive");
    if (j > 0 && !(delta[j] < delta[j - 1])) {
      fail(ErrorKind::InvalidArgument, "delta schedule must be strictly decreasing");
    }
  }
  const std::uint64_t N = v.size();
  const std::size_t J = delta.size();
  // jump(n) = |v(n) - v(n-1)|, n = 2..N
  auto jump = [&](const std::vector<cplx>& w, std::uint64_t n) { return std::abs(w[n - 1] - w[n - 2]); };
  std::vector<cplx> orig(v.values().begin(), v.values().end());

  // M_1 = 1; M_j is the first index after which the running density of
  // delta_j-jumps stays below 2^{-j}. Unreached scales are dropped.
  std::vector<std::uint64_t> starts{1};
  for (std::size_t j = 2; j <= J; ++j) {
    const double bound = std::ldexp(1.0, -static_cast<int>(j));
    std::uint64_t count = 0;
    std::uint64_t last_bad = 0;
    for (std::uint64_t n = 1; n <= N; ++n) {
      if (n >= 2 && jump(orig, n) >= delta[j - 1]) ++count;
      if (!(static_cast<double>(count) < bound * static_cast<double>(n))) last_bad = n;
    }
    if (last_bad >= N) break;
    starts.push_back(std::max(last_bad + 1, starts.back() + 1));
  }
  std::vector<unsigned> scale(N + 1, 1);
  {
    std::size_t j = 0;
    for (std::uint64_t n = 1; n <= N; ++n) {
      while (j + 1 < starts.size() && starts[j + 1] <= n) ++j;
      scale[n] = static_cast<unsigned>(j + 1);
    }
  }
  auto delta_at = [&](std::uint64_t n) { return delta[scale[n] - 1]; };

  std::vector<std::uint64_t> marks;
  for (std::uint64_t n = 2; n <= N; ++n) {
    if (jump(orig, n) >= delta_at(n)) marks.push_back(n);
  }
  std::vector<bool> in_c(N + 1, false);
  std::uint64_t flattened = 0;
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
    const std::uint64_t b = marks[i];
    const std::uint64_t b2 = marks[i + 1];
    if (b2 <= b + scale[b]) {
      for (std::uint64_t n = b; n < b2; ++n) {
        if (!in_c[n]) ++flattened;
        in_c[n] = true;
      }
    }
  }
  std::vector<cplx> smooth = orig;
  {
    std::uint64_t anchor = 1;
    for (std::uint64_t n = 1; n <= N; ++n) {
      if (in_c[n]) {
        smooth[n - 1] = orig[anchor - 1];
      } else {
        anchor = n;
      }
    }
  }

  std::vector<std::uint64_t> remaining;
  for (std::uint64_t n = 2; n <= N; ++n) {
    if (jump(smooth, n) >= delta_at(n)) remaining.push_back(n);
  }

  BlockStructure blocks;
  {
    std::size_t next_mark = 0;
    std::uint64_t b = 1;
    while (b <= N) {
      const unsigned j = scale[b];
      blocks.boundaries.push_back(b);
      blocks.scales.push_back(j);
      blocks.block_values.push_back(smooth[b - 1]);
      while (next_mark < remaining.size() && remaining[next_mark] <= b) ++next_mark;
      const std::uint64_t t = next_mark < remaining.size() ? remaining[next_mark] : N + 1;
      const std::uint64_t gap = t - b;
      b = gap <= 2ULL * j - 1 ? t : b + j;
    }
  }
  const std::size_t K = blocks.boundaries.size();
  blocks.tolerances.resize(K);
  {
    double suffix = 0.0;
    for (std::size_t k = K; k-- > 0;) {
      const unsigned j = blocks.scales[k];
      suffix = std::max(suffix, 2.0 * j * delta[j - 1]);
      blocks.tolerances[k] = suffix;
    }
  }
  {
    std::size_t from = K == 0 ? 0 : K - 1;
    while (from >= 2) {
      const auto g_hi = blocks.boundaries[from] - blocks.boundaries[from - 1];
      const auto g_lo = blocks.boundaries[from - 1] - blocks.boundaries[from - 2];
      if (g_lo > g_hi) break;
      --from;
    }
    blocks.monotone_gap_from = from == 0 ? 0 : from - 1;
  }

  BlockifyReport report;
  report.scale_starts = starts;
  report.flattened = flattened;
  {
    CompensatedSum dist;
    for (std::uint64_t n = 1; n <= N; ++n) dist.add(std::abs(orig[n - 1] - smooth[n - 1]));
    report.besicovitch_distance = dist.value() / static_cast<double>(N);
  }
  report.mean_variation = mean_variation(v);
  {
    std::uint64_t jumps = 0;
    for (std::uint64_t n = 2; n <= N; ++n) jumps += jump(orig, n) >= delta[0];
    report.jump_density = N > 1 ? static_cast<double>(jumps) / static_cast<double>(N - 1) : 0.0;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const auto end = blocks.block_end(k, N);
    for (std::uint64_t n = blocks.boundaries[k]; n < end; ++n) {
      report.max_block_deviation =
          std::max(report.max_block_deviation, std::abs(smooth[n - 1] - blocks.block_values[k]));
    }
  }
  report.flagged = report.besicovitch_distance > flag_threshold ||
                   report.mean_variation > flag_threshold;

  auto params = v.params();
  params["msv_blockify"] = "1";
  return BlockifyResult{ArithmeticSequence(std::move(smooth), v.label() + "~", std::move(params)),
                        std::move(blocks), report};
}

}  // namespace fslab::seqgen
