#include "fslab/dynsys.hpp"

#include <cmath>
#include <random>
#include <set>

#include "fslab/error.hpp"

namespace fslab {

double frac_mul(std::int64_t k, double alpha) {
  if (k == 0 || alpha == 0.0) return 0.0;
  require(std::isfinite(alpha), ErrorKind::InvalidArgument, "parameter must be finite");
  const bool negative = (k < 0) != (alpha < 0.0);
  const auto kk = static_cast<unsigned __int128>(k < 0 ? -static_cast<__int128>(k) : k);
  int e = 0;
  const double f = std::frexp(std::fabs(alpha), &e);
  const auto m = static_cast<std::uint64_t>(std::ldexp(f, 53));
  const int s = 53 - e;  // |alpha| = m 2^{-s}
  if (s <= 0) return 0.0;
  const unsigned __int128 p = kk * m;
  long double r;
  if (s >= 128) {
    r = std::ldexp(static_cast<long double>(p), -s);
  } else {
    const unsigned __int128 mask = (static_cast<unsigned __int128>(1) << s) - 1;
    r = std::ldexp(static_cast<long double>(p & mask), -s);
  }
  if (negative && r > 0.0L) r = 1.0L - r;
  const double out = static_cast<double>(r);
  return out >= 1.0 ? 0.0 : out;
}

Observable Observable::parse(const std::string& text) {
  if (text == "vertical") return {Kind::Vertical, 0, 1};
  if (text == "heisenberg") return {Kind::Heisenberg, 0, 1};
  if (text.rfind("char:", 0) == 0) {
    const std::string body = text.substr(5);
    try {
      std::size_t used = 0;
      Observable o{Kind::Character, std::stoi(body, &used), 0};
      if (used < body.size()) {
        if (body[used] != ',') throw std::invalid_argument("separator");
        const std::string rest = body.substr(used + 1);
        std::size_t used2 = 0;
        o.s = std::stoi(rest, &used2);
        if (used2 != rest.size()) throw std::invalid_argument("trailing");
      }
      return o;
    } catch (const std::logic_error&) {
      fail(ErrorKind::InvalidArgument, "malformed character observable '" + text + "'");
    }
  }
  fail(ErrorKind::InvalidArgument,
       "unknown observable '" + text + "' (char:r,s | vertical | heisenberg)");
}

std::string Observable::to_string() const {
  switch (kind) {
    case Kind::Vertical:
      return "vertical";
    case Kind::Heisenberg:
      return "heisenberg";
    case Kind::Character:
      return "char:" + std::to_string(r) + "," + std::to_string(s);
  }
  return "?";
}

OrbitSystem OrbitSystem::circle_rotation(double alpha, Observable f) {
  OrbitSystem s;
  s.kind = SystemKind::CircleRotation;
  s.alpha = alpha;
  s.observable = f;
  s.validate();
  return s;
}

OrbitSystem OrbitSystem::torus_rotation(double alpha, double beta, Observable f) {
  OrbitSystem s;
  s.kind = SystemKind::TorusRotation;
  s.alpha = alpha;
  s.beta = beta;
  s.observable = f;
  s.validate();
  return s;
}

OrbitSystem OrbitSystem::skew_product(double alpha, Observable f) {
  OrbitSystem s;
  s.kind = SystemKind::SkewProduct;
  s.alpha = alpha;
  s.observable = f;
  s.validate();
  return s;
}

OrbitSystem OrbitSystem::heisenberg(double a, double b, double c, Observable f) {
  OrbitSystem s;
  s.kind = SystemKind::Heisenberg;
  s.g = {a, b, c};
  s.observable = f;
  s.validate();
  return s;
}

std::size_t OrbitSystem::dimension() const noexcept {
  switch (kind) {
    case SystemKind::CircleRotation:
      return 1;
    case SystemKind::TorusRotation:
    case SystemKind::SkewProduct:
      return 2;
    case SystemKind::Heisenberg:
      return 3;
  }
  return 0;
}

std::string OrbitSystem::name() const {
  switch (kind) {
    case SystemKind::CircleRotation:
      return "circle";
    case SystemKind::TorusRotation:
      return "torus";
    case SystemKind::SkewProduct:
      return "skew";
    case SystemKind::Heisenberg:
      return "heisenberg";
  }
  return "?";
}

void OrbitSystem::validate() const {
  for (double p : {alpha, beta, g[0], g[1], g[2]}) {
    require(std::isfinite(p), ErrorKind::InvalidArgument, "system parameters must be finite");
  }
  const std::string obs = observable.to_string();
  switch (observable.kind) {
    case Observable::Kind::Character:
      require(dimension() > 1 || observable.s == 0, ErrorKind::InvalidArgument,
              "observable " + obs + " needs a second coordinate; " + name() + " has one");
      break;
    case Observable::Kind::Vertical:
      require(dimension() > 1, ErrorKind::InvalidArgument,
              "observable vertical does not apply to " + name());
      break;
    case Observable::Kind::Heisenberg:
      require(kind == SystemKind::Heisenberg, ErrorKind::InvalidArgument,
              "observable heisenberg does not apply to " + name());
      break;
  }
}

namespace heis {

Element mul(const Element& p, const Element& q) {
  return {p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1]};
}

Element reduce(const Element& x) {
  const double m = -std::floor(x[0]);
  const double n = -std::floor(x[1]);
  const double z = x[2] + x[0] * n;
  Element out{x[0] + m, x[1] + n, z - std::floor(z)};
  for (double& c : out) {
    if (c >= 1.0) c = 0.0;
  }
  return out;
}

Element power(const Element& g, std::uint64_t n) {
  const double nn = static_cast<double>(n);
  const double pairs = nn * (nn - 1.0) / 2.0;
  return {nn * g[0], nn * g[1], nn * g[2] + pairs * g[0] * g[1]};
}

}  // namespace heis

namespace {

void check_state(const OrbitSystem& sys, const std::vector<double>& x) {
  require(x.size() == sys.dimension(), ErrorKind::InvalidArgument,
          sys.name() + " needs a point with " + std::to_string(sys.dimension()) +
              " coordinates, got " + std::to_string(x.size()));
  for (double c : x) require(std::isfinite(c), ErrorKind::InvalidArgument, "x0 must be finite");
}

double add_frac(double a, double b) {
  const double s = frac(a + b);
  return s;
}

}  // namespace

std::vector<double> OrbitSystem::step(const std::vector<double>& x) const {
  switch (kind) {
    case SystemKind::CircleRotation:
      return {add_frac(x[0], alpha)};
    case SystemKind::TorusRotation:
      return {add_frac(x[0], alpha), add_frac(x[1], beta)};
    case SystemKind::SkewProduct:
      return {add_frac(x[0], alpha), add_frac(x[1], x[0])};
    case SystemKind::Heisenberg: {
      const auto y = heis::reduce(heis::mul(g, {x[0], x[1], x[2]}));
      return {y[0], y[1], y[2]};
    }
  }
  return x;
}

std::vector<double> OrbitSystem::power(const std::vector<double>& x0, std::uint64_t n) const {
  const auto k = static_cast<std::int64_t>(n);
  switch (kind) {
    case SystemKind::CircleRotation:
      return {add_frac(frac(x0[0]), frac_mul(k, alpha))};
    case SystemKind::TorusRotation:
      return {add_frac(frac(x0[0]), frac_mul(k, alpha)), add_frac(frac(x0[1]), frac_mul(k, beta))};
    case SystemKind::SkewProduct: {
      require(n < (std::uint64_t{1} << 32), ErrorKind::InvalidArgument, "orbit index too large");
      const auto pairs = static_cast<std::int64_t>(n * (n - (n > 0 ? 1 : 0)) / 2);
      const long double y = static_cast<long double>(frac(x0[1])) + frac_mul(k, x0[0]) +
                            frac_mul(pairs, alpha);
      return {add_frac(frac(x0[0]), frac_mul(k, alpha)), static_cast<double>(frac(y))};
    }
    case SystemKind::Heisenberg: {
      const auto y = heis::reduce(heis::mul(heis::power(g, n), {x0[0], x0[1], x0[2]}));
      return {y[0], y[1], y[2]};
    }
  }
  return x0;
}

cplx OrbitSystem::observe(const std::vector<double>& x) const {
  switch (observable.kind) {
    case Observable::Kind::Character: {
      long double phase = static_cast<long double>(observable.r) * x[0];
      if (dimension() > 1) phase += static_cast<long double>(observable.s) * x[1];
      return unit(static_cast<double>(frac(phase)));
    }
    case Observable::Kind::Vertical:
    case Observable::Kind::Heisenberg:
      return unit(x[1]);
  }
  return 0.0;
}

ArithmeticSequence orbit_evaluate(const OrbitSystem& sys, const std::vector<double>& x0,
                                  std::uint64_t N) {
  if (sys.kind == SystemKind::Heisenberg) return orbit_evaluate_iterated(sys, x0, N);
  sys.validate();
  check_state(sys, x0);
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
  std::vector<cplx> values(N);
  parallel::for_each_index((N + parallel::kChunk - 1) / parallel::kChunk, [&](std::size_t c) {
    const std::uint64_t end = std::min<std::uint64_t>(N, (c + 1) * parallel::kChunk);
    for (std::uint64_t i = c * parallel::kChunk; i < end; ++i) {
      values[i] = sys.observe(sys.power(x0, i + 1));
    }
  });
  return ArithmeticSequence(std::move(values), "orbit:" + sys.name(),
                            {{"observable", sys.observable.to_string()}});
}

ArithmeticSequence orbit_evaluate_iterated(const OrbitSystem& sys, const std::vector<double>& x0,
                                           std::uint64_t N) {
  sys.validate();
  check_state(sys, x0);
  require(N >= 1, ErrorKind::InvalidArgument, "N must be >= 1");
  std::vector<cplx> values(N);
  std::vector<double> x = x0;
  if (sys.kind == SystemKind::Heisenberg) {
    const auto r = heis::reduce({x[0], x[1], x[2]});
    x = {r[0], r[1], r[2]};
  } else {
    for (double& c : x) c = frac(c);
  }
  for (std::uint64_t n = 1; n <= N; ++n) {
    x = sys.step(x);
    values[n - 1] = sys.observe(x);
  }
  return ArithmeticSequence(std::move(values), "orbit:" + sys.name(),
                            {{"observable", sys.observable.to_string()}});
}

StatReport orthogonality_test(const ArithmeticSequence& u, const OrbitSystem& sys,
                              const std::vector<double>& x0, const std::vector<std::uint64_t>& Ns,
                              Averaging averaging) {
  require(!Ns.empty(), ErrorKind::InvalidArgument, "Ns must be nonempty");
  const std::set<std::uint64_t> points(Ns.begin(), Ns.end());
  const std::uint64_t maxN = *points.rbegin();
  require(*points.begin() >= 1 && maxN <= u.size(), ErrorKind::InvalidArgument,
          "Ns must lie in 1.." + std::to_string(u.size()));
  const auto f = orbit_evaluate(sys, x0, maxN);
  StatReport r;
  r.name = "orthogonality";
  r.params["N"] = static_cast<double>(maxN);
  r.notes.push_back("system " + sys.name() + ", observable " + sys.observable.to_string());
  if (averaging == Averaging::Logarithmic) r.notes.push_back("logarithmic averaging");
  CompensatedComplexSum acc;
  CompensatedSum weights;
  for (std::uint64_t n = 1; n <= maxN; ++n) {
    const double w = averaging == Averaging::Cesaro ? 1.0 : 1.0 / static_cast<double>(n);
    acc.add(w * f(n) * u(n));
    weights.add(w);
    if (points.count(n)) {
      r.trend.emplace_back(static_cast<double>(n), std::abs(acc.value()) / weights.value());
    }
  }
  r.value = r.trend.back().second;
  return r;
}

void BlockSchedule::finalize() {
  require(cuts.size() >= 2, ErrorKind::InvalidArgument, "a block schedule needs K >= 2 cuts");
  require(cuts[0] >= 1, ErrorKind::InvalidArgument, "cuts start at index >= 1");
  for (std::size_t k = 1; k < cuts.size(); ++k) {
    require(cuts[k] > cuts[k - 1], ErrorKind::InvalidArgument, "cuts must be increasing");
  }
  require(restarts.size() + 1 >= cuts.size(), ErrorKind::InvalidArgument,
          "need a restart point for each of the K-1 blocks");
  std::size_t from = cuts.size() - 1;
  while (from >= 2 && cuts[from - 1] - cuts[from - 2] <= cuts[from] - cuts[from - 1]) --from;
  monotone_from = from - 1;
}

BlockSchedule BlockSchedule::squares(std::uint64_t K, std::size_t dimension, std::uint64_t seed) {
  BlockSchedule s;
  std::mt19937_64 rng(seed);
  for (std::uint64_t k = 1; k <= K; ++k) s.cuts.push_back(k * k);
  for (std::uint64_t k = 1; k < K; ++k) {
    std::vector<double> y(dimension);
    for (double& c : y) c = std::ldexp(static_cast<double>(rng() >> 11), -53);
    s.restarts.push_back(std::move(y));
  }
  s.finalize();
  return s;
}

StatReport strong_momo_test(const ArithmeticSequence& u, const OrbitSystem& sys,
                            const BlockSchedule& schedule) {
  sys.validate();
  auto sched = schedule;
  sched.finalize();
  const std::size_t K = sched.cuts.size();
  const std::uint64_t bK = sched.cuts.back();
  require(bK <= u.size(), ErrorKind::InvalidArgument,
          "schedule reaches b_K = " + std::to_string(bK) + " beyond sequence length " +
              std::to_string(u.size()));
  for (std::size_t k = 0; k + 1 < K; ++k) check_state(sys, sched.restarts[k]);
  std::vector<double> block(K - 1);
  parallel::for_each_index(K - 1, [&](std::size_t k) {
    CompensatedComplexSum acc;
    std::vector<double> y = sched.restarts[k];
    if (sys.kind == SystemKind::Heisenberg) {
      const auto r = heis::reduce({y[0], y[1], y[2]});
      y = {r[0], r[1], r[2]};
    } else {
      for (double& c : y) c = frac(c);
    }
    for (std::uint64_t n = sched.cuts[k]; n < sched.cuts[k + 1]; ++n) {
      acc.add(u(n) * sys.observe(y));
      y = sys.step(y);
    }
    block[k] = std::abs(acc.value());
  });
  CompensatedSum total;
  for (double b : block) total.add(b);
  StatReport r;
  r.name = "strong_momo";
  r.value = total.value() / static_cast<double>(bK);
  r.params["K"] = static_cast<double>(K);
  r.params["b_K"] = static_cast<double>(bK);
  r.diagnostics["monotone_from"] = static_cast<double>(sched.monotone_from);
  r.notes.push_back("system " + sys.name() + ", observable " + sys.observable.to_string());
  return r;
}

}  // namespace fslab
