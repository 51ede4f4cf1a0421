#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace fslab {

using cplx = std::complex<double>;

/// Neumaier-compensated accumulator. Addition order is the caller's; results
/// are reproducible as long as that order is fixed.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class CompensatedComplexSum {
 public:
  void add(cplx z) noexcept {
    re_.add(z.real());
    im_.add(z.imag());
  }
  cplx value() const noexcept { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_;
  CompensatedSum im_;
};

/// e^{2 pi i theta}
inline cplx unit(double theta) {
  const double a = 2.0 * std::numbers::pi * theta;
  return {std::cos(a), std::sin(a)};
}

/// Fractional part in [0,1).
inline double frac(double x) {
  double f = x - std::floor(x);
  return f >= 1.0 ? 0.0 : f;
}

inline long double frac(long double x) {
  long double f = x - std::floor(x);
  return f >= 1.0L ? 0.0L : f;
}

/// Distance on the circle R/Z.
inline double circle_distance(double a, double b) {
  const double d = frac(a - b);
  return std::min(d, 1.0 - d);
}

namespace parallel {

/// Worker count used by the chunked loops below. Results never depend on it.
void set_threads(unsigned count);
unsigned threads();

/// Fixed chunk length for reductions; independent of the thread count.
inline constexpr std::size_t kChunk = std::size_t{1} << 15;

/// Runs body(chunk_index) for chunk_index in [0, chunks), spread over the
/// configured worker threads.
void for_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body);

/// Runs body(i) for i in [0, count).
void for_each_index(std::size_t count, const std::function<void(std::size_t)>& body);

/// Sum of term(i) over [0, count): compensated inside each fixed chunk, chunk
/// partials combined in index order.
template <class Term>
double sum(std::size_t count, Term&& term) {
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
  for_chunks(chunks, [&](std::size_t c) {
    CompensatedSum acc;
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) acc.add(term(i));
    partial[c] = acc.value();
  });
  CompensatedSum total;
  for (double p : partial) total.add(p);
  return total.value();
}

template <class Term>
cplx sum_complex(std::size_t count, Term&& term) {
  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<cplx> partial(chunks);
  for_chunks(chunks, [&](std::size_t c) {
    CompensatedComplexSum acc;
    const std::size_t end = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) acc.add(term(i));
    partial[c] = acc.value();
  });
  CompensatedComplexSum total;
  for (const cplx& p : partial) total.add(p);
  return total.value();
}

}  // namespace parallel
}  // namespace fslab
