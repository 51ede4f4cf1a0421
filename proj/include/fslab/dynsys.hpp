#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fslab/correlate.hpp"
#include "fslab/sequence.hpp"

namespace fslab {

/// frac(k * alpha) computed exactly from the binary expansion of alpha, then
/// rounded once.
double frac_mul(std::int64_t k, double alpha);

enum class SystemKind { CircleRotation, TorusRotation, SkewProduct, Heisenberg };

struct Observable {
  enum class Kind { Character, Vertical, Heisenberg };
  Kind kind = Kind::Character;
  int r = 1;
  int s = 0;

  /// "char:r,s", "char:r", "vertical", "heisenberg".
  static Observable parse(const std::string& text);
  std::string to_string() const;
};

/// Uniquely ergodic model systems on tori and the Heisenberg nilmanifold.
///  circle:     x -> x + alpha
///  torus:      (x, y) -> (x + alpha, y + beta)
///  skew:       (x, y) -> (x + alpha, y + x); alpha = 0 gives (x, x + y)
///  heisenberg: x -> g x on G/Gamma, g = (a, b, c) in Mal'cev coordinates
struct OrbitSystem {
  SystemKind kind = SystemKind::CircleRotation;
  double alpha = 0.0;
  double beta = 0.0;
  std::array<double, 3> g{0.0, 0.0, 0.0};
  Observable observable;

  static OrbitSystem circle_rotation(double alpha, Observable f = {});
  static OrbitSystem torus_rotation(double alpha, double beta, Observable f = {});
  static OrbitSystem skew_product(double alpha = 0.0, Observable f = {Observable::Kind::Vertical});
  static OrbitSystem heisenberg(double a, double b, double c,
                                Observable f = {Observable::Kind::Heisenberg});

  std::size_t dimension() const noexcept;
  std::string name() const;

  /// Throws invalid-argument when the observable does not apply to this kind.
  void validate() const;
  /// Reduced state after one step.
  std::vector<double> step(const std::vector<double>& x) const;
  /// Reduced state of T^n x0 without iterating.
  std::vector<double> power(const std::vector<double>& x0, std::uint64_t n) const;
  /// Observable evaluated at a reduced state.
  cplx observe(const std::vector<double>& x) const;
};

namespace heis {
using Element = std::array<double, 3>;
/// (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')
Element mul(const Element& p, const Element& q);
/// Representative of x Gamma in [0,1)^3 via the right action of (m, n, k).
Element reduce(const Element& x);
/// g^n = (na, nb, nc + C(n,2) ab) before reduction.
Element power(const Element& g, std::uint64_t n);
}  // namespace heis

/// (f(T^n x0))_{n=1..N}. Rotations and the skew product use closed forms,
/// the Heisenberg system iterates the group multiplication.
ArithmeticSequence orbit_evaluate(const OrbitSystem& sys, const std::vector<double>& x0,
                                  std::uint64_t N);
/// Same stream by per-step reduction, for every system.
ArithmeticSequence orbit_evaluate_iterated(const OrbitSystem& sys, const std::vector<double>& x0,
                                           std::uint64_t N);

/// c(N) = |(1/N) sum_{n <= N} f(T^n x0) u(n)| for each N in Ns; value is
/// c(max Ns).
StatReport orthogonality_test(const ArithmeticSequence& u, const OrbitSystem& sys,
                              const std::vector<double>& x0, const std::vector<std::uint64_t>& Ns,
                              Averaging averaging = Averaging::Cesaro);

/// Cut points b_1 < ... < b_K and restart points y_1..y_{K-1}.
struct BlockSchedule {
  std::vector<std::uint64_t> cuts;
  std::vector<std::vector<double>> restarts;
  /// Index from which b_{k+1} - b_k is nondecreasing.
  std::size_t monotone_from = 0;

  /// b_k = k^2, k = 1..K, restarts drawn uniformly from a seeded generator.
  static BlockSchedule squares(std::uint64_t K, std::size_t dimension, std::uint64_t seed);
  /// Recomputes monotone_from and validates the cuts.
  void finalize();
};

/// (1/b_K) sum_{k<K} |sum_{b_k <= n < b_{k+1}} u(n) f(S^{n-b_k} y_k)|
StatReport strong_momo_test(const ArithmeticSequence& u, const OrbitSystem& sys,
                            const BlockSchedule& schedule);

}  // namespace fslab
