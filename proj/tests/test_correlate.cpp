#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fslab/correlate.hpp"
#include "fslab/error.hpp"
#include "fslab/seqgen.hpp"

using namespace fslab;

namespace {

// Plain double loop, long double accumulation.
std::vector<cplx> oracle_gamma(const ArithmeticSequence& u, std::size_t H, bool log_weights) {
  const std::size_t N = u.size(), Np = N - H;
  std::vector<cplx> g(H + 1);
  long double total = 0;
  for (std::size_t n = 1; n <= Np; ++n) total += log_weights ? 1.0L / n : 1.0L;
  for (std::size_t h = 0; h <= H; ++h) {
    long double re = 0, im = 0;
    for (std::size_t n = 1; n <= Np; ++n) {
      const cplx t = u(n + h) * std::conj(u(n));
      const long double w = log_weights ? 1.0L / n : 1.0L;
      re += w * t.real();
      im += w * t.imag();
    }
    g[h] = cplx(double(re / total), double(im / total));
  }
  return g;
}

void check_close(const std::vector<cplx>& a, const std::vector<cplx>& b, double rel) {
  REQUIRE(a.size() == b.size());
  const double scale = std::max(1e-300, std::abs(b[0]));
  for (std::size_t h = 0; h < a.size(); ++h) {
    REQUIRE(std::abs(a[h] - b[h]) <= rel * std::max(std::abs(b[h]), scale));
  }
}

}  // namespace

TEST_CASE("autocorrelation trivial sequences") {
  const auto one = autocorrelation(seqgen::gen_constant(1.0, 1000), 20);
  for (auto g : one.gamma) CHECK(std::abs(g - 1.0) < 1e-12);
  const auto alt = autocorrelation(seqgen::gen_alternating(1000), 20);
  for (std::size_t h = 0; h <= 20; ++h) CHECK(std::abs(alt.gamma[h] - (h % 2 ? -1.0 : 1.0)) < 1e-12);
  CHECK(alt.N_prime == 980);
  CHECK_THROWS_AS(autocorrelation(seqgen::gen_alternating(100), 50), Error);
}

TEST_CASE("fft, direct and oracle autocorrelations agree") {
  const auto liou = seqgen::gen_liouville(20'000);
  const auto skew = seqgen::gen_skew_sequence(0.6180339887498949, 30);
  for (const auto* u : {&liou, &skew}) {
    const auto oracle = oracle_gamma(*u, 64, false);
    check_close(autocorrelation(*u, 64, Averaging::Cesaro, AutocorrMethod::Fft).gamma, oracle, 1e-9);
    check_close(autocorrelation(*u, 64, Averaging::Cesaro, AutocorrMethod::Direct).gamma, oracle, 1e-9);
    const auto log_oracle = oracle_gamma(*u, 64, true);
    check_close(autocorrelation(*u, 64, Averaging::Logarithmic, AutocorrMethod::Direct).gamma,
                log_oracle, 1e-9);
    check_close(autocorrelation(*u, 64, Averaging::Logarithmic, AutocorrMethod::Fft).gamma,
                log_oracle, 1e-9);
  }
}

TEST_CASE("fft and direct agree at N = 1e5") {
  const auto u = seqgen::gen_liouville(100'000);
  const auto f = autocorrelation(u, 1000, Averaging::Cesaro, AutocorrMethod::Fft);
  const auto d = autocorrelation(u, 1000, Averaging::Cesaro, AutocorrMethod::Direct);
  check_close(f.gamma, d.gamma, 1e-9);
}

TEST_CASE("autocorrelation invariants and thread independence") {
  const auto u = seqgen::gen_iid_signs(3, 50'000);
  parallel::set_threads(1);
  const auto a = autocorrelation(u, 500, Averaging::Cesaro, AutocorrMethod::Direct);
  parallel::set_threads(4);
  const auto b = autocorrelation(u, 500, Averaging::Cesaro, AutocorrMethod::Direct);
  parallel::set_threads(1);
  CHECK(a.gamma == b.gamma);
  CHECK(a.gamma[0].imag() == 0.0);
  for (auto g : a.gamma) CHECK(std::abs(g) <= 1.0);
}

TEST_CASE("liouville lag-one correlation at one million") {
  const auto t = autocorrelation(seqgen::gen_liouville(1'000'000), 10);
  CHECK(std::abs(t.gamma[1]) < 0.01);
}

TEST_CASE("short interval statistic") {
  CHECK(short_interval_stat(seqgen::gen_constant(1.0, 1000), 10, 1000).value ==
        doctest::Approx(1.0));
  for (std::uint64_t H : {3, 10, 11}) {
    CHECK(short_interval_stat(seqgen::gen_alternating(1000), H, 1000).value <= 1.0 / (H * H) + 1e-15);
  }
  const auto skew = seqgen::gen_skew_sequence(0.6180339887498949, 150);
  const auto r = short_interval_stat(skew, 1000, skew.size());
  CHECK(r.value < 0.02);
  CHECK(r.notes.empty());
  CHECK_THROWS_AS(short_interval_stat(skew, 10, 10), Error);

  const auto big = short_interval_stat(seqgen::gen_constant(1.0, 100), 50, 100);
  CHECK(big.notes.size() == 1);
}

TEST_CASE("u1 norm estimate") {
  CHECK(u1_norm_estimate(seqgen::gen_constant(1.0, 1000), 10, 1000).value == doctest::Approx(1.0));
  const auto arch = seqgen::gen_archimedean(1.0, 1'000'000);
  CHECK(u1_norm_estimate(arch, 1000, 1'000'000).value >= 0.5);
  const auto liou = seqgen::gen_liouville(1'000'000);
  const auto r = u1_norm_estimate(liou, 1000, 1'000'000);
  CHECK(r.value < 0.02);

  const auto t = autocorrelation(liou, 1000);
  double s = 0;
  for (int h = 1; h <= 1000; ++h) s += t.gamma[h].real();
  CHECK(std::fabs(r.diagnostics.at("raw") - s / 1000) <= 1e-12);
  const auto chowla = averaged_chowla_stat(liou, 1000, 1'000'000);
  CHECK(chowla.value >= std::fabs(r.diagnostics.at("raw")));
}

TEST_CASE("averaged chowla statistic") {
  const auto alt = averaged_chowla_stat(seqgen::gen_alternating(10'000), 100, 10'000);
  CHECK(alt.value == doctest::Approx(1.0));
  REQUIRE(alt.trend.size() == 3);
  for (auto [x, y] : alt.trend) CHECK(y == doctest::Approx(1.0));
  const auto iid = averaged_chowla_stat(seqgen::gen_iid_signs(1, 1'000'000), 1000, 1'000'000);
  CHECK(iid.value < 0.002);
  const auto small = averaged_chowla_stat(seqgen::gen_alternating(100), 10, 100);
  CHECK(small.trend.size() == 1);
}

TEST_CASE("progression statistic") {
  CHECK(progression_stat(seqgen::gen_constant(1.0, 1000), 10, 3, 1000).value == doctest::Approx(1.0));
  const auto alt = progression_stat(seqgen::gen_alternating(100'000), 1000, 2, 100'000);
  CHECK(alt.value == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(alt.diagnostics.at("q2") == doctest::Approx(1.0));
  CHECK_THROWS_AS(progression_stat(seqgen::gen_alternating(100), 10, 10, 100), Error);

  // Oracle: triple loop on a short prefix.
  const auto u = seqgen::gen_skew_sequence(0.3819660112501051, 12);
  const std::size_t N = u.size(), H = 7, Q = 4, Np = N - H * Q;
  double total = 0;
  for (std::size_t q = 1; q <= Q; ++q) {
    double inner = 0;
    for (std::size_t n = 1; n <= Np; ++n) {
      cplx s = 0;
      for (std::size_t h = 1; h <= H; ++h) s += u(h * q + n);
      inner += std::norm(s / double(H));
    }
    total += inner / Np;
  }
  CHECK(progression_stat(u, H, Q, N).value == doctest::Approx(total / Q).epsilon(1e-12));
}

TEST_CASE("relative vn statistic") {
  const auto iid = seqgen::gen_iid_signs(5, 10'000);
  CHECK(relative_vn_stat(iid, PermutationPlan::identity(10'000), 50, 10'000).value ==
        doctest::Approx(1.0));
  CHECK(relative_vn_stat(seqgen::gen_constant(0.0, 1000), PermutationPlan::reversal(1000), 10, 1000)
            .value == 0.0);
  const auto big = seqgen::gen_iid_signs(8, 1'000'000);
  const auto r = relative_vn_stat(big, PermutationPlan::block_swap(1'000'000, 10'000), 100, 1'000'000);
  CHECK(r.value < 0.02);
  const auto rev = relative_vn_stat(iid, PermutationPlan::reversal(10'000), 50, 10'000);
  CHECK(rev.diagnostics.at("skipped_terms") == doctest::Approx(50.0 * 51 / 2));
}

TEST_CASE("statistics are invariant under phase rotation") {
  const auto u = seqgen::gen_skew_sequence(0.6180339887498949, 40);
  const auto w = u.rotated(1.234);
  const std::size_t N = u.size();
  CHECK(std::fabs(short_interval_stat(u, 20, N).value - short_interval_stat(w, 20, N).value) < 1e-12);
  CHECK(std::fabs(u1_norm_estimate(u, 20, N).value - u1_norm_estimate(w, 20, N).value) < 1e-12);
  CHECK(std::fabs(averaged_chowla_stat(u, 20, N).value - averaged_chowla_stat(w, 20, N).value) < 1e-12);
  CHECK(std::fabs(progression_stat(u, 20, 3, N).value - progression_stat(w, 20, 3, N).value) < 1e-12);
  const auto phi = PermutationPlan::reversal(N);
  CHECK(std::fabs(relative_vn_stat(u, phi, 20, N).value - relative_vn_stat(w, phi, 20, N).value) < 1e-12);
}

TEST_CASE("autocorrelation cache round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "fslab_cache_test";
  std::filesystem::remove_all(dir);
  const AutocorrCache cache(dir);
  const auto u = seqgen::gen_liouville(5000);
  CacheOutcome first, second, third;
  const auto a = cached_autocorrelation(u.values(), u.content_hash(), 100, Averaging::Cesaro,
                                        AutocorrMethod::Automatic, &cache, &first);
  const auto b = cached_autocorrelation(u.values(), u.content_hash(), 100, Averaging::Cesaro,
                                        AutocorrMethod::Automatic, &cache, &second);
  CHECK_FALSE(first.hit);
  CHECK(second.hit);
  CHECK(a.gamma == b.gamma);

  const AutocorrKey key{u.content_hash(), 5000, 100, Averaging::Cesaro, AutocorrMethod::Fft};
  {
    std::ofstream out(cache.path_for(key), std::ios::binary | std::ios::trunc);
    out << "garbage";
  }
  CHECK_THROWS_AS(cache.load(key), Error);
  const auto c = cached_autocorrelation(u.values(), u.content_hash(), 100, Averaging::Cesaro,
                                        AutocorrMethod::Automatic, &cache, &third);
  CHECK_FALSE(third.hit);
  CHECK(third.warnings.size() == 1);
  CHECK(c.gamma == a.gamma);

  AutocorrKey other = key;
  other.H = 101;
  CHECK(other.file_name() != key.file_name());
  other = key;
  other.averaging = Averaging::Logarithmic;
  CHECK(other.file_name() != key.file_name());
  std::filesystem::remove_all(dir);
}
