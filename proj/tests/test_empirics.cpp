#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "fslab/empirics.hpp"
#include "fslab/error.hpp"
#include "fslab/seqgen.hpp"

using namespace fslab;

namespace {

SymbolicSequence iid_symbols(unsigned M, std::size_t N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Symbol> s(N);
  for (auto& a : s) a = static_cast<Symbol>(rng() % M);
  return make_symbolic(std::move(s), M);
}

// Direct window count for one block.
double brute_freq(const SymbolicSequence& s, const std::vector<Symbol>& block) {
  const std::size_t N = s.size(), L = block.size();
  std::size_t hits = 0;
  for (std::size_t n = 0; n + L <= N; ++n) {
    bool ok = true;
    for (std::size_t i = 0; i < L && ok; ++i) ok = s.symbols[n + i] == block[i];
    hits += ok;
  }
  return double(hits) / double(N - L + 1);
}

}  // namespace

TEST_CASE("quantize signs") {
  const auto s = quantize(seqgen::gen_alternating(6), {QuantizeMode::Signs});
  CHECK(s.symbols == std::vector<Symbol>{0, 1, 0, 1, 0, 1});
  CHECK(s.alphabet_size == 2);
  CHECK_FALSE(s.lossy);
}

TEST_CASE("quantize phase bins") {
  const auto u = ArithmeticSequence({unit(0.618), unit(0.0), unit(0.999), 0.0}, "x");
  const auto s = quantize(u, {QuantizeMode::PhaseBins, 8});
  CHECK(s.symbols == std::vector<Symbol>{4, 0, 7, 8});
  CHECK(s.alphabet_size == 9);
  CHECK_THROWS_AS(quantize(ArithmeticSequence({0.5}, "x"), {QuantizeMode::PhaseBins, 8}), Error);

  const auto r = quantize(seqgen::gen_root_of_unity(1, 8, 16), {QuantizeMode::PhaseBins, 8});
  for (std::size_t n = 1; n <= 16; ++n) CHECK(r(n) == n % 8);
}

TEST_CASE("skew sequence phase histogram is nearly uniform") {
  const double golden = (std::sqrt(5.0) - 1) / 2;
  const auto u = seqgen::gen_skew_sequence(golden, 150).prefix(1'000'000);
  const auto s = quantize(u, {QuantizeMode::PhaseBins, 16});
  std::vector<double> hist(16, 0);
  for (auto a : s.symbols) hist[a] += 1;
  const auto [lo, hi] = std::minmax_element(hist.begin(), hist.end());
  CHECK(*hi / *lo < 1.3);
}

TEST_CASE("quantize value set") {
  const auto u = ArithmeticSequence({1.0, -1.0, cplx(0, 1), 1.0}, "x");
  const auto s = quantize(u, {QuantizeMode::ValueSet});
  CHECK(s.alphabet_size == 3);
  CHECK(s.symbol_values[s(1)] == cplx(1.0));
  CHECK(s.symbol_values[s(3)] == cplx(0, 1));
  CHECK(s(1) == s(4));
  const auto many = seqgen::gen_root_of_unity(1, 300, 600);
  CHECK_THROWS_AS(quantize(many, {QuantizeMode::ValueSet}), Error);
  try {
    quantize(many, {QuantizeMode::ValueSet});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OverflowAlphabet);
  }
}

TEST_CASE("block codes") {
  const std::vector<Symbol> b{1, 0, 2};
  CHECK(block_code(b, 3) == 9 + 0 + 2);
  CHECK(block_decode(11, 3, 3) == b);
  CHECK(block_string(11, 3, 3) == "102");
  CHECK(block_string(block_code(std::vector<Symbol>{12, 3}, 16), 2, 16) == "12.3");
}

TEST_CASE("cylinder frequencies") {
  const auto alt = quantize(seqgen::gen_alternating(1001), {QuantizeMode::Signs});
  const auto t = cylinder_frequencies(alt, 2);
  CHECK(t.freq(std::vector<Symbol>{0, 1}) == doctest::Approx(0.5));
  CHECK(t.freq(std::vector<Symbol>{1, 0}) == doctest::Approx(0.5));
  CHECK(t.freq(std::vector<Symbol>{0, 0}) == 0.0);
  CHECK(t.freq(std::vector<Symbol>{1, 1}) == 0.0);

  const auto zero = make_symbolic(std::vector<Symbol>(50, 0), 1);
  const auto z = cylinder_frequencies(zero, 5);
  for (unsigned k = 1; k <= 5; ++k) CHECK(z.freq(std::vector<Symbol>(k, 0)) == 1.0);

  const auto iid = iid_symbols(2, 1'000'000, 11);
  const auto c = cylinder_frequencies(iid, 3);
  for (std::uint64_t code = 0; code < 8; ++code) {
    CHECK(std::fabs(c.freq(3, code) - 0.125) < 0.005);
  }
  CHECK_THROWS_AS(cylinder_frequencies(iid, 13), Error);
  CHECK_THROWS_AS(cylinder_frequencies(iid_symbols(16, 100, 1), 6), Error);
}

TEST_CASE("cylinder frequencies match brute force, sum to one, and are consistent") {
  const auto s = iid_symbols(3, 2000, 5);
  const unsigned k = 4;
  const auto t = cylinder_frequencies(s, k);
  for (unsigned len = 1; len <= k; ++len) {
    double total = 0;
    for (const auto& [code, count] : t.counts[len - 1]) {
      total += t.freq(len, code);
      REQUIRE(t.freq(len, code) == doctest::Approx(brute_freq(s, block_decode(code, len, 3))));
    }
    CHECK(total == doctest::Approx(1.0));
    if (len < k) {
      for (const auto& [code, count] : t.counts[len - 1]) {
        double ext = 0;
        for (unsigned a = 0; a < 3; ++a) ext += t.freq(len + 1, code * 3 + a);
        CHECK(std::fabs(ext - t.freq(len, code)) <= double(k) / 2000);
      }
    }
  }
  // Dropping the first index moves each frequency by at most 2/N.
  auto shifted = s;
  shifted.symbols.erase(shifted.symbols.begin());
  const auto t2 = cylinder_frequencies(shifted, k);
  for (unsigned len = 1; len <= k; ++len) {
    for (const auto& [code, count] : t.counts[len - 1]) {
      CHECK(std::fabs(t.freq(len, code) - t2.freq(len, code)) <= 2.0 / 2000);
    }
  }
}

TEST_CASE("coupling from pairs") {
  const auto s = iid_symbols(2, 5000, 3);
  const auto diag = coupling_from_pairs(s, PermutationPlan::identity(5000), 3);
  const auto cyl = cylinder_frequencies(s, 3);
  for (unsigned len = 1; len <= 3; ++len) {
    for (const auto& [bc, count] : diag.counts[len - 1]) CHECK(bc.first == bc.second);
    CHECK(diag.edge_loss[len - 1] == len - 1);
  }
  CHECK(marginal_discrepancy(diag.first, cyl) <= 3.0 / 5000);
  CHECK(marginal_discrepancy(diag.second, cyl) <= 3.0 / 5000);

  const auto one = make_symbolic(std::vector<Symbol>(100, 0), 1);
  const auto c = coupling_from_pairs(one, PermutationPlan::reversal(100), 1);
  CHECK(c.freq(1, 0, 0) == 1.0);

  const auto big = iid_symbols(2, 100'000, 9);
  const auto rev = coupling_from_pairs(big, PermutationPlan::reversal(100'000), 1);
  for (std::uint64_t b = 0; b < 2; ++b) {
    for (std::uint64_t cc = 0; cc < 2; ++cc) CHECK(std::fabs(rev.freq(1, b, cc) - 0.25) < 0.01);
  }
  CHECK_THROWS_AS(coupling_from_pairs(big, PermutationPlan::identity(10), 1), Error);
}

TEST_CASE("permutation plan") {
  CHECK_THROWS_AS(PermutationPlan({1, 1, 2}), Error);
  CHECK_THROWS_AS(PermutationPlan({0, 1}), Error);
  const PermutationPlan p({2, 3, 1, 4});
  CHECK(p.defect_count() == 2);
  CHECK(p.recount_defects() == 2);
  CHECK(PermutationPlan::identity(10).defect_count() == 0);
  CHECK(PermutationPlan::cyclic_shift(10, 3).defect_count() == 1);
  CHECK(PermutationPlan::block_swap(10, 2).defect_count() == 4);
  CHECK(p.inverse()(1) == 3);

  const auto path = std::filesystem::temp_directory_path() / "fslab_perm_test.bin";
  io::write_permutation(p, path);
  const auto back = io::read_permutation(path);
  CHECK(std::vector<std::uint64_t>(back.images().begin(), back.images().end()) ==
        std::vector<std::uint64_t>{2, 3, 1, 4});
  std::filesystem::remove(path);
}
