#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "fslab/dynsys.hpp"
#include "fslab/error.hpp"
#include "fslab/joinplan.hpp"
#include "fslab/seqgen.hpp"

using namespace fslab;
using namespace fslab::seqgen;

namespace {

SymbolicSequence iid_bits(std::size_t N, std::uint64_t seed) {
  return quantize(gen_iid_signs(seed, N), {QuantizeMode::Signs, 2});
}

SymbolicSequence alternating_bits(std::size_t N) {
  return quantize(gen_alternating(N), {QuantizeMode::Signs, 2});
}

std::vector<std::uint32_t> as_labels(const SymbolicSequence& s) {
  return {s.symbols.begin(), s.symbols.end()};
}

// Random symmetric coupling with a positive diagonal.
CouplingSpec random_spec(std::mt19937_64& rng, std::size_t m, double eps) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::bernoulli_distribution zero(0.25);
  std::vector<double> W(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double w = (i != j && zero(rng)) ? 0.0 : u(rng);
      W[i * m + j] = W[j * m + i] = w;
    }
  }
  double total = 0.0;
  for (double w : W) total += w;
  CouplingSpec spec;
  spec.epsilon = eps;
  spec.lambda.resize(m * m);
  spec.kappa.assign(m, 0.0);
  for (std::size_t c = 0; c < m * m; ++c) spec.lambda[c] = W[c] / total;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) spec.kappa[i] += spec.lambda[i * m + j];
  }
  return spec;
}

// Largest-remainder counts summing to N.
std::vector<std::uint64_t> rounded_counts(const std::vector<double>& kappa, std::uint64_t N) {
  std::vector<std::uint64_t> v(kappa.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::uint64_t used = 0;
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    const double x = kappa[i] * double(N);
    v[i] = static_cast<std::uint64_t>(std::floor(x));
    used += v[i];
    rem.push_back({x - std::floor(x), i});
  }
  std::sort(rem.rbegin(), rem.rend());
  for (std::size_t t = 0; used < N; ++t, ++used) ++v[rem[t % rem.size()].second];
  return v;
}

}  // namespace

TEST_CASE("coupling allocation on two atoms") {
  CouplingSpec prod{{0.5, 0.5}, {0.25, 0.25, 0.25, 0.25}, 0.1};
  const auto a = coupling_allocate(prod, {20, 20}, 40);
  for (auto v : a.cells) CHECK(v == 10);

  CouplingSpec diag{{0.5, 0.5}, {0.5, 0.0, 0.0, 0.5}, 0.1};
  const auto d = coupling_allocate(diag, {20, 20}, 40);
  CHECK(d.at(0, 0) == 20);
  CHECK(d.at(1, 1) == 20);
  CHECK(d.at(0, 1) == 0);
  CHECK(d.at(1, 0) == 0);

  try {
    coupling_allocate(prod, {5, 5}, 10);
    FAIL("expected insufficient-sample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientSample);
    CHECK(std::string(e.what()).find("N_large") != std::string::npos);
    CHECK(std::string(e.what()).find("40") != std::string::npos);
  }
  try {
    coupling_allocate(prod, {30, 10}, 40);
    FAIL("expected insufficient-sample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientSample);
    CHECK(std::string(e.what()).find("approximation") != std::string::npos);
  }
  CouplingSpec bad{{0.5, 0.5}, {0.4, 0.25, 0.25, 0.25}, 0.1};
  CHECK_THROWS_AS(coupling_allocate(bad, {20, 20}, 40), Error);
}

TEST_CASE("floor_snap keeps exact ratios") {
  CHECK(floor_snap(3.0) == 3);
  CHECK(floor_snap(2.9999999999999996) == 3);
  CHECK(floor_snap(2.5) == 2);
  CHECK(floor_snap(0.0) == 0);
  // empirical masses give back the empirical counts
  for (std::uint64_t N : {997ull, 1000003ull}) {
    for (std::uint64_t c = 1; c < 200; c += 7) {
      const double kappa = double(c) / double(N);
      CHECK(allocate_cell(kappa, c, kappa, c, kappa) == c);
    }
  }
}

TEST_CASE("random allocations satisfy C1-C4 and give 4 eps permutations") {
  std::mt19937_64 rng(20240611);
  int built = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng() % 6;
    const double eps = std::uniform_real_distribution<double>(0.02, 0.2)(rng);
    CouplingSpec spec = random_spec(rng, m, eps);
    double min_l = 1.0;
    for (double l : spec.lambda) {
      if (l > 0.0) min_l = std::min(min_l, l);
    }
    const std::uint64_t threshold = static_cast<std::uint64_t>(std::ceil(1.0 / (eps * min_l)));
    const std::uint64_t factor[] = {1, 2, 10};
    const std::uint64_t N = threshold * factor[trial % 3];
    const auto V = rounded_counts(spec.kappa, N);
    bool approx = true;
    for (std::size_t i = 0; i < m; ++i) {
      approx = approx && std::fabs(double(V[i]) / double(N) - spec.kappa[i]) <= eps * spec.kappa[i];
    }
    if (!approx) continue;
    const auto alloc = coupling_allocate(spec, V, N);
    const auto chk = check_allocation(spec, alloc);
    CHECK(chk.c1);
    CHECK(chk.c2);
    CHECK(chk.c3);
    // C4: equal inputs give equal cells wherever they occur
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        CHECK(alloc.at(i, j) ==
              allocate_cell(spec.kappa[i], V[i], spec.kappa[j], V[j], spec.at(i, j)));
      }
    }
    // labels in a shuffled order
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < m; ++i) labels.insert(labels.end(), V[i], static_cast<std::uint32_t>(i));
    if (trial % 2) std::shuffle(labels.begin(), labels.end(), rng);
    const PermutationPlan phi = build_permutation(alloc, labels);
    std::vector<double> cells(m * m, 0.0);
    for (std::uint64_t n = 1; n <= N; ++n) cells[labels[n - 1] * m + labels[phi(n) - 1]] += 1.0;
    double worst = 0.0;
    for (std::size_t c = 0; c < m * m; ++c) worst = std::max(worst, std::fabs(cells[c] / N - spec.lambda[c]));
    CHECK(worst <= 4.0 * eps);
    CHECK(worst == doctest::Approx(max_cell_error(labels, phi, spec)).epsilon(1e-12));
    ++built;
  }
  CHECK(built > 200);
}

TEST_CASE("build_permutation rejects mismatched counts") {
  CouplingSpec prod{{0.5, 0.5}, {0.25, 0.25, 0.25, 0.25}, 0.1};
  const auto a = coupling_allocate(prod, {20, 20}, 40);
  std::vector<std::uint32_t> labels(40, 0);
  CHECK_THROWS_AS(build_permutation(a, labels), Error);
}

TEST_CASE("rotation towers") {
  const auto t = build_rotation_tower({0.618, 0.0, 3, 0.2}, 200000, 0.5);
  CHECK(t.outside_fraction == doctest::Approx(0.4).epsilon(0.01));
  CHECK(t.count_ladder_breaks() == 0);
  CHECK_FALSE(t.flagged);
  // levels are the orbit's visits to [0, delta) + j alpha
  for (std::uint64_t n = 1; n <= 2000; ++n) {
    const double x = std::fmod(n * 0.618, 1.0);
    int expect = TowerAssignment::kOutside;
    for (int j = 0; j < 3; ++j) {
      if (std::fmod(x - j * 0.618 + 3.0, 1.0) < 0.2 - 1e-12) {
        expect = j;
        break;
      }
    }
    bool boundary = false;
    for (int j = 0; j < 3; ++j) {
      const double y = std::fmod(x - j * 0.618 + 3.0, 1.0);
      boundary = boundary || std::fabs(y) < 1e-9 || std::fabs(y - 1.0) < 1e-9 || std::fabs(y - 0.2) < 1e-9;
    }
    if (boundary) continue;
    CHECK(t.level[n - 1] == expect);
  }
  CHECK(t.window_begin <= 3);
  CHECK(t.window_end + 3 >= t.size());

  const auto one = build_rotation_tower({0.3, 0.0, 1, 1.0}, 1000, 0.5);
  CHECK(one.outside_fraction == 0.0);
  try {
    build_rotation_tower({0.1, 0.0, 5, 0.15}, 1000, 0.5);
    FAIL("expected invalid-tower");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidTower);
  }
}

TEST_CASE("subshift towers") {
  const auto s = iid_bits(1000000, 7);
  const auto t = build_subshift_tower(s, {{0, 0, 0, 0, 0, 0}, 4}, s.size(), 0.2);
  CHECK(t.outside_fraction < 0.2);
  CHECK(t.count_ladder_breaks() == 0);
  CHECK(t.window_begin == 1);
  CHECK(t.window_end == s.size());
  // about half the visits of 000000 return after one step
  CHECK(t.long_return_fraction == doctest::Approx(0.5).epsilon(0.05));
  CHECK(t.flagged);

  const auto none = build_subshift_tower(alternating_bits(1000), {{1, 1}, 2}, 1000, 0.1);
  CHECK(none.flagged);
  CHECK(none.outside_fraction == 1.0);
}

TEST_CASE("dynamic permutation on an iid tower") {
  const std::size_t N = 100000;
  const auto s = iid_bits(N, 11);
  const double eps = 0.1;
  const auto tower = build_subshift_tower(s, {{0, 0, 0, 0, 0, 0, 1}, 8}, N, eps);
  REQUIRE_FALSE(tower.flagged);
  const auto labels = as_labels(s);

  SUBCASE("product") {
    const auto r = build_dynamic_permutation(labels, tower, JoiningTarget::product(), eps);
    CHECK(r.report.ti_violations == 0);
    CHECK(r.report.invariance_violations == 0);
    CHECK(r.report.defect_fraction <= r.report.defect_bound);
    CHECK(r.report.q_cell_error <= 8 * eps);
    CHECK(r.report.assigned >= (1.0 - 4 * eps) * r.report.window_size);
    // independent TI check along every in-tower pair of A-type indices
    std::uint64_t breaks = 0;
    for (std::uint64_t n = 1; n < N; ++n) {
      const int a = tower.level[n - 1], b = tower.level[r.phi(n) - 1];
      if (a >= 0 && b >= 0 && a < 7 && b < 7 && r.phi(n + 1) != r.phi(n) + 1) ++breaks;
    }
    CHECK(double(breaks) / N <= 4 * eps);
    // Q-cell error recomputed from scratch
    double c[2] = {0, 0}, pair[2][2] = {{0, 0}, {0, 0}};
    for (std::uint64_t n = 1; n <= N; ++n) {
      c[s(n)] += 1;
      pair[s(n)][s(r.phi(n))] += 1;
    }
    double worst = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) worst = std::max(worst, std::fabs(pair[a][b] / N - c[a] * c[b] / N / N));
    }
    CHECK(worst == doctest::Approx(r.report.q_cell_error).epsilon(1e-9));
  }

  SUBCASE("diagonal is the identity") {
    const auto r = build_dynamic_permutation(labels, tower, JoiningTarget::diagonal(), eps);
    CHECK(r.phi.defect_count() == 0);
    CHECK(r.report.q_cell_error == 0.0);
  }

  SUBCASE("graph of the shift by 3") {
    const auto r = build_dynamic_permutation(labels, tower, JoiningTarget::shifted_diagonal(3), eps);
    std::uint64_t shifted = 0;
    for (std::uint64_t n = 1; n <= N; ++n) shifted += r.phi(n) == n + 3;
    CHECK(double(shifted) / N >= 1.0 - r.report.defect_fraction - 4 * eps);
    CHECK(r.report.ti_violations == 0);
    CHECK(r.report.defect_fraction <= r.report.defect_bound);
  }

  SUBCASE("mixture") {
    const auto target = JoiningTarget::parse("mixture:0.5*product+0.5*diagonal");
    CHECK(target.to_string() == "mixture:0.5*product+0.5*diagonal");
    const auto r = build_dynamic_permutation(labels, tower, target, eps);
    CHECK(r.report.ti_violations == 0);
    CHECK(r.report.defect_fraction <= r.report.defect_bound);
    CHECK(r.report.q_cell_error <= 8 * eps);
  }

  SUBCASE("forced depth beyond the sample") {
    DynamicPermutationOptions opt;
    opt.name_depth = 8;
    CHECK_THROWS_AS(build_dynamic_permutation(labels, tower, JoiningTarget::product(), eps, opt), Error);
  }
}

TEST_CASE("dynamic permutation on a rotation tower") {
  const std::uint64_t N = 200000;
  const double alpha = 0.2 + 4.1421356e-4;
  const std::uint32_t h = 5;
  const double eps = 0.1;
  const auto tower = build_rotation_tower({alpha, 0.05, h, 0.198}, N, eps);
  CHECK(tower.outside_fraction < eps);
  std::vector<std::uint32_t> q(N);
  for (std::uint64_t n = 1; n <= N; ++n) q[n - 1] = std::fmod(n * alpha, 1.0) < 0.5 ? 0 : 1;
  for (auto target : {JoiningTarget::product(), JoiningTarget::shifted_diagonal(2)}) {
    const auto r = build_dynamic_permutation(q, tower, target, eps);
    CHECK(r.report.ti_violations == 0);
    CHECK(r.report.defect_fraction <= r.report.defect_bound);
    for (std::uint64_t n = 1; n < r.report.window_begin; ++n) CHECK(r.phi(n) == n);
    for (std::uint64_t n = r.report.window_end + 1; n <= N; ++n) CHECK(r.phi(n) == n);
  }
}

TEST_CASE("tall rotation tower with small eps") {
  const std::uint64_t N = 100000;
  const double eta = 1.6e-4 * 1.0352761804;
  const double alpha = 1.0 / 16 + eta;
  const double eps = 0.05;
  const auto tower = build_rotation_tower({alpha, 0.3, 16, 1.0 / 16 - 15.5 * eta}, N, eps);
  REQUIRE(tower.outside_fraction < eps);
  std::vector<std::uint32_t> q(N);
  for (std::uint64_t n = 1; n <= N; ++n) q[n - 1] = frac_mul(static_cast<std::int64_t>(n), alpha) < 0.5 ? 0 : 1;
  for (auto target : {JoiningTarget::product(), JoiningTarget::diagonal(), JoiningTarget::shifted_diagonal(5)}) {
    const auto r = build_dynamic_permutation(q, tower, target, eps);
    CHECK(r.report.ti_violations == 0);
    CHECK(r.report.defect_fraction <= r.report.defect_bound);
    CHECK(r.report.q_cell_error <= 8 * eps);
  }
}

TEST_CASE("self-joining pipeline") {
  const auto s = iid_bits(100000, 5);
  const std::vector<std::uint64_t> Ns = {2000, 20000, 100000};

  SUBCASE("diagonal") {
    const auto st = self_joining_pipeline(s, Ns, JoiningTarget::diagonal());
    REQUIRE(st.size() == 3);
    for (const auto& p : st) {
      CHECK(p.report.eval_error == 0.0);
      CHECK(p.phi.defect_count() == 0);
    }
  }
  SUBCASE("product") {
    const auto st = self_joining_pipeline(s, Ns, JoiningTarget::product());
    for (const auto& p : st) {
      CHECK(p.report.dynamic.ti_violations == 0);
      CHECK(p.report.dynamic.defect_fraction <= p.report.dynamic.defect_bound);
      CHECK(p.report.eval_error < 0.05);
      CHECK(p.report.tower_outside <= p.report.epsilon);
    }
  }
  SUBCASE("periodic input needs the rotation factor") {
    const auto a = alternating_bits(20000);
    CHECK_THROWS_AS(self_joining_pipeline(a, {2000, 20000}, JoiningTarget::product()), Error);
    PipelineOptions opt;
    opt.aperiodize = true;
    const auto st = self_joining_pipeline(a, {2000, 20000}, JoiningTarget::product(), opt);
    CHECK(st.size() == 2);
  }
  SUBCASE("logarithmic averaging is refused") {
    PipelineOptions opt;
    opt.averaging = Averaging::Logarithmic;
    CHECK_THROWS_AS(self_joining_pipeline(s, Ns, JoiningTarget::product(), opt), Error);
  }
}

TEST_CASE("product projection") {
  SUBCASE("prefix counts agree with a double loop") {
    const std::size_t N = 600;
    const auto s = iid_bits(N, 3);
    std::mt19937_64 rng(9);
    std::vector<std::uint64_t> img(N);
    for (std::size_t i = 0; i < N; ++i) img[i] = i + 1;
    std::shuffle(img.begin(), img.end(), rng);
    const PermutationPlan phi(img);
    const std::uint64_t M = 37;
    const auto rep = product_projection_check(s, phi, M, 2);
    const auto kap = cylinder_frequencies(s, 2);
    double expect = 0.0;
    for (unsigned len = 1; len <= 2; ++len) {
      const std::uint64_t last = N - len + 1;
      std::map<std::pair<std::uint64_t, std::uint64_t>, double> S;
      double pairs = 0.0;
      auto code = [&](std::uint64_t i) {
        return block_code(std::span(s.symbols).subspan(i - 1, len), 2);
      };
      for (std::uint64_t n = 1; n <= last; ++n) {
        for (std::uint64_t m = 1; m <= M; ++m) {
          if (phi(n) <= m || phi(n) - m > last) continue;
          S[{code(n), code(phi(n) - m)}] += 1;
          pairs += 1;
        }
      }
      for (auto b : kap.counts[len - 1]) {
        for (auto c : kap.counts[len - 1]) {
          const double avg = S[{b.first, c.first}] / pairs;
          expect = std::max(expect, std::fabs(avg - kap.freq(len, b.first) * kap.freq(len, c.first)));
        }
      }
    }
    CHECK(rep.value == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("constant sequence is exactly zero") {
    const auto c = quantize(gen_constant(1.0, 5000), {QuantizeMode::Signs, 2});
    const auto rep = product_projection_check(c, PermutationPlan::identity(5000), 100, 3);
    CHECK(rep.value == 0.0);
  }
  SUBCASE("alternating signs average out") {
    const auto a = alternating_bits(100000);
    const auto rep = product_projection_check(a, PermutationPlan::identity(100000), 1000, 1);
    CHECK(rep.value < 2e-3);
  }
  SUBCASE("iid diagonal") {
    const auto s = iid_bits(1000000, 21);
    const auto rep = product_projection_check(s, PermutationPlan::identity(1000000), 1000, 1);
    CHECK(rep.value < 0.02);
  }
  SUBCASE("from shifted tables") {
    const auto a = alternating_bits(2000);
    std::vector<CouplingTable> tabs;
    for (std::uint64_t m = 1; m <= 10; ++m) {
      std::vector<std::uint64_t> img(2000);
      for (std::uint64_t n = 1; n <= 2000; ++n) img[n - 1] = (n + 2000 - 1 - m) % 2000 + 1;
      tabs.push_back(coupling_from_pairs(a, PermutationPlan(img), 1));
    }
    const auto rep = product_projection_check(tabs, cylinder_frequencies(a, 1));
    CHECK(rep.value < 1e-9);
  }
}
