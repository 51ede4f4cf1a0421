#include "fslab/correlate.hpp"

#include <fcntl.h>
#include <fftw3.h>
#include <sys/file.h>
#include <unistd.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <memory>
#include <fstream>
#include <mutex>

#include "fftw_lock.hpp"
#include "fslab/error.hpp"

namespace fslab {

std::string to_string(Averaging a) { return a == Averaging::Cesaro ? "cesaro" : "logarithmic"; }

std::string to_string(AutocorrMethod m) {
  switch (m) {
    case AutocorrMethod::Automatic:
      return "automatic";
    case AutocorrMethod::Fft:
      return "fft";
    case AutocorrMethod::Direct:
      return "direct";
  }
  return "?";
}

Averaging parse_averaging(const std::string& s) {
  if (s == "cesaro") return Averaging::Cesaro;
  if (s == "logarithmic" || s == "log") return Averaging::Logarithmic;
  fail(ErrorKind::InvalidArgument, "unknown averaging '" + s + "' (cesaro | logarithmic)");
}

AutocorrMethod parse_method(const std::string& s) {
  if (s == "automatic" || s == "auto") return AutocorrMethod::Automatic;
  if (s == "fft") return AutocorrMethod::Fft;
  if (s == "direct") return AutocorrMethod::Direct;
  fail(ErrorKind::InvalidArgument, "unknown autocorrelation method '" + s + "'");
}

namespace {

std::size_t good_fft_size(std::size_t n) {
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

template <class T>
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!ptr) fail(ErrorKind::ResourceLimit, "FFT buffer allocation failed");
    std::memset(static_cast<void*>(ptr), 0, sizeof(T) * n);
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  T* ptr;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {
    if (!plan_) fail(ErrorKind::Internal, "FFTW planning failed");
  }
  ~Plan() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void run() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

double weight(Averaging averaging, std::size_t n) {
  return averaging == Averaging::Cesaro ? 1.0 : 1.0 / static_cast<double>(n);
}

double weight_total(Averaging averaging, std::uint64_t count) {
  if (averaging == Averaging::Cesaro) return static_cast<double>(count);
  CompensatedSum h;
  for (std::uint64_t n = 1; n <= count; ++n) h.add(1.0 / static_cast<double>(n));
  return h.value();
}

// c[h] = sum_{n < Np} u[n+h] conj(u[n]) w(n+1), h = 0..H
std::vector<cplx> xcorr_fft(std::span<const cplx> u, std::uint64_t Np, std::uint64_t H,
                            Averaging averaging) {
  const std::size_t N = u.size();
  const std::size_t P = good_fft_size(N);
  const bool real = std::all_of(u.begin(), u.end(), [](cplx z) { return z.imag() == 0.0; });
  std::vector<cplx> c(H + 1);
  if (real) {
    const std::size_t half = P / 2 + 1;
    FftwBuffer<double> a(P), b(P);
    FftwBuffer<fftw_complex> fa(half), fb(half);
    std::unique_ptr<Plan> pa, pb, back;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      const int n = static_cast<int>(P);
      pa = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(n, a.ptr, fa.ptr, FFTW_ESTIMATE));
      pb = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(n, b.ptr, fb.ptr, FFTW_ESTIMATE));
      back = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(n, fa.ptr, a.ptr, FFTW_ESTIMATE));
    }
    for (std::size_t i = 0; i < N; ++i) a.ptr[i] = u[i].real();
    for (std::size_t i = 0; i < Np; ++i) b.ptr[i] = u[i].real() * weight(averaging, i + 1);
    pa->run();
    pb->run();
    for (std::size_t k = 0; k < half; ++k) {
      const cplx x(fa.ptr[k][0], fa.ptr[k][1]);
      const cplx y(fb.ptr[k][0], fb.ptr[k][1]);
      const cplx z = x * std::conj(y);
      fa.ptr[k][0] = z.real();
      fa.ptr[k][1] = z.imag();
    }
    back->run();
    for (std::uint64_t h = 0; h <= H; ++h) c[h] = a.ptr[h] / static_cast<double>(P);
  } else {
    FftwBuffer<fftw_complex> a(P), b(P);
    std::unique_ptr<Plan> pa, pb, back;
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      const int n = static_cast<int>(P);
      pa = std::make_unique<Plan>(fftw_plan_dft_1d(n, a.ptr, a.ptr, FFTW_FORWARD, FFTW_ESTIMATE));
      pb = std::make_unique<Plan>(fftw_plan_dft_1d(n, b.ptr, b.ptr, FFTW_FORWARD, FFTW_ESTIMATE));
      back = std::make_unique<Plan>(fftw_plan_dft_1d(n, a.ptr, a.ptr, FFTW_BACKWARD, FFTW_ESTIMATE));
    }
    for (std::size_t i = 0; i < N; ++i) {
      a.ptr[i][0] = u[i].real();
      a.ptr[i][1] = u[i].imag();
    }
    for (std::size_t i = 0; i < Np; ++i) {
      const double w = weight(averaging, i + 1);
      b.ptr[i][0] = u[i].real() * w;
      b.ptr[i][1] = u[i].imag() * w;
    }
    pa->run();
    pb->run();
    for (std::size_t k = 0; k < P; ++k) {
      const cplx z = cplx(a.ptr[k][0], a.ptr[k][1]) * std::conj(cplx(b.ptr[k][0], b.ptr[k][1]));
      a.ptr[k][0] = z.real();
      a.ptr[k][1] = z.imag();
    }
    back->run();
    for (std::uint64_t h = 0; h <= H; ++h) {
      c[h] = cplx(a.ptr[h][0], a.ptr[h][1]) / static_cast<double>(P);
    }
  }
  return c;
}

std::vector<cplx> xcorr_direct(std::span<const cplx> u, std::uint64_t Np, std::uint64_t H,
                               Averaging averaging) {
  std::vector<cplx> c(H + 1);
  parallel::for_each_index(H + 1, [&](std::size_t h) {
    CompensatedComplexSum acc;
    if (averaging == Averaging::Cesaro) {
      for (std::size_t n = 0; n < Np; ++n) acc.add(u[n + h] * std::conj(u[n]));
    } else {
      for (std::size_t n = 0; n < Np; ++n) {
        acc.add(u[n + h] * std::conj(u[n]) / static_cast<double>(n + 1));
      }
    }
    c[h] = acc.value();
  });
  return c;
}

}  // namespace

AutocorrTable autocorrelation(std::span<const cplx> u, std::uint64_t H, Averaging averaging,
                              AutocorrMethod method) {
  const std::uint64_t N = u.size();
  require(H >= 1, ErrorKind::InvalidArgument, "H must be >= 1");
  require(2 * H < N, ErrorKind::InvalidArgument,
          "H = " + std::to_string(H) + " must be below N/2 (N = " + std::to_string(N) + ")");
  if (method == AutocorrMethod::Automatic) {
    method = averaging == Averaging::Cesaro ? AutocorrMethod::Fft : AutocorrMethod::Direct;
  }
  AutocorrTable t;
  t.H_max = H;
  t.N = N;
  t.N_prime = N - H;
  t.averaging = averaging;
  t.method = method;
  t.gamma = method == AutocorrMethod::Fft ? xcorr_fft(u, t.N_prime, H, averaging)
                                          : xcorr_direct(u, t.N_prime, H, averaging);
  const double total = weight_total(averaging, t.N_prime);
  for (auto& g : t.gamma) g /= total;
  t.gamma[0] = std::clamp(t.gamma[0].real(), 0.0, 1.0);
  return t;
}

AutocorrTable autocorrelation(const ArithmeticSequence& u, std::uint64_t H, Averaging averaging,
                              AutocorrMethod method) {
  return autocorrelation(u.values(), H, averaging, method);
}

void write_autocorr_csv(const AutocorrTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << "h,re,im\n";
  char buf[96];
  for (std::size_t h = 0; h < t.gamma.size(); ++h) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", h, t.gamma[h].real(), t.gamma[h].imag());
    out << buf;
  }
}

std::string AutocorrKey::file_name() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "acf-%016llx-N%llu-H%llu-%s-%s.bin",
                static_cast<unsigned long long>(sequence_hash), static_cast<unsigned long long>(N),
                static_cast<unsigned long long>(H), to_string(averaging).c_str(),
                to_string(method).c_str());
  return buf;
}

namespace {

class FileLock {
 public:
  FileLock(const std::filesystem::path& dir, bool exclusive) {
    const auto path = dir / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) fail(ErrorKind::CacheError, "cannot open lock file " + path.string());
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
      ::close(fd_);
      fail(ErrorKind::CacheError, "cannot lock " + path.string());
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

std::uint64_t table_checksum(const AutocorrTable& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    h = io::fnv1a(b, h);
  };
  mix(t.H_max);
  mix(t.N);
  mix(t.N_prime);
  for (const cplx& g : t.gamma) {
    mix(std::bit_cast<std::uint64_t>(g.real()));
    mix(std::bit_cast<std::uint64_t>(g.imag()));
  }
  return h;
}

}  // namespace

AutocorrCache::AutocorrCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(ErrorKind::CacheError, "cannot create cache directory " + dir_.string());
}

std::filesystem::path AutocorrCache::path_for(const AutocorrKey& key) const {
  return dir_ / key.file_name();
}

std::optional<AutocorrTable> AutocorrCache::load(const AutocorrKey& key) const {
  FileLock lock(dir_, false);
  const auto path = path_for(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::CacheError, "cannot read " + path.string());
  try {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, io::kSequenceMagic, 8) != 0) {
      fail(ErrorKind::CacheError, path.string() + ": bad magic");
    }
    AutocorrTable t;
    const auto hash = io::read_u64_le(in);
    t.H_max = io::read_u64_le(in);
    t.N = io::read_u64_le(in);
    t.N_prime = io::read_u64_le(in);
    const auto avg = io::read_u64_le(in);
    const auto method = io::read_u64_le(in);
    if (hash != key.sequence_hash || t.H_max != key.H || t.N != key.N ||
        avg != static_cast<std::uint64_t>(key.averaging) ||
        method != static_cast<std::uint64_t>(key.method) || t.N_prime != t.N - t.H_max) {
      fail(ErrorKind::CacheError, path.string() + ": header does not match key");
    }
    t.averaging = key.averaging;
    t.method = key.method;
    t.gamma.resize(t.H_max + 1);
    for (auto& g : t.gamma) {
      const double re = io::read_f64_le(in);
      const double im = io::read_f64_le(in);
      g = {re, im};
    }
    if (io::read_u64_le(in) != table_checksum(t)) {
      fail(ErrorKind::CacheError, path.string() + ": checksum mismatch");
    }
    return t;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CacheError) throw;
    fail(ErrorKind::CacheError, path.string() + ": truncated (" + e.what() + ")");
  }
}

void AutocorrCache::store(const AutocorrKey& key, const AutocorrTable& t) const {
  FileLock lock(dir_, true);
  const auto path = path_for(key);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::CacheError, "cannot write " + tmp.string());
    out.write(io::kSequenceMagic, 8);
    io::write_u64_le(out, key.sequence_hash);
    io::write_u64_le(out, t.H_max);
    io::write_u64_le(out, t.N);
    io::write_u64_le(out, t.N_prime);
    io::write_u64_le(out, static_cast<std::uint64_t>(key.averaging));
    io::write_u64_le(out, static_cast<std::uint64_t>(key.method));
    for (const cplx& g : t.gamma) {
      io::write_f64_le(out, g.real());
      io::write_f64_le(out, g.imag());
    }
    io::write_u64_le(out, table_checksum(t));
    if (!out) fail(ErrorKind::CacheError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

AutocorrTable cached_autocorrelation(std::span<const cplx> u, std::uint64_t sequence_hash,
                                     std::uint64_t H, Averaging averaging, AutocorrMethod method,
                                     const AutocorrCache* cache, CacheOutcome* outcome) {
  if (method == AutocorrMethod::Automatic) {
    method = averaging == Averaging::Cesaro ? AutocorrMethod::Fft : AutocorrMethod::Direct;
  }
  const AutocorrKey key{sequence_hash, u.size(), H, averaging, method};
  if (cache) {
    try {
      if (auto t = cache->load(key)) {
        if (outcome) outcome->hit = true;
        return *t;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::CacheError) throw;
      if (outcome) outcome->warnings.push_back(std::string(e.what()) + "; recomputing");
    }
  }
  auto t = autocorrelation(u, H, averaging, method);
  if (cache) cache->store(key, t);
  return t;
}

namespace {

std::span<const cplx> checked_prefix(const ArithmeticSequence& u, std::uint64_t N) {
  require(N >= 1 && N <= u.size(), ErrorKind::InvalidArgument,
          "N = " + std::to_string(N) + " outside 1.." + std::to_string(u.size()));
  return u.values().first(N);
}

AutocorrTable table_for(std::span<const cplx> prefix, std::uint64_t H, const StatOptions& o) {
  if (o.provider) {
    auto t = o.provider(H);
    require(t.H_max == H && t.N == prefix.size() && t.averaging == o.averaging,
            ErrorKind::Internal, "autocorrelation provider returned a mismatched table");
    return t;
  }
  return autocorrelation(prefix, H, o.averaging, o.method);
}

// sum_{n=1..count} w(n) term(n) / sum w(n)
template <class Term>
double weighted_mean(std::uint64_t count, Averaging averaging, Term&& term) {
  const double num = parallel::sum(count, [&](std::size_t i) {
    return weight(averaging, i + 1) * term(static_cast<std::uint64_t>(i + 1));
  });
  return num / weight_total(averaging, count);
}

void common_params(StatReport& r, std::uint64_t N, const StatOptions& o) {
  r.params["N"] = static_cast<double>(N);
  if (o.averaging == Averaging::Logarithmic) r.notes.push_back("logarithmic averaging");
}

}  // namespace

StatReport short_interval_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                               const StatOptions& options) {
  const auto v = checked_prefix(u, N);
  require(H >= 1 && H < N, ErrorKind::InvalidArgument,
          "short_interval_stat needs 1 <= H < N (H = " + std::to_string(H) + ")");
  StatReport r;
  r.name = "short_interval";
  common_params(r, N, options);
  r.params["H"] = static_cast<double>(H);
  if (static_cast<double>(H) > std::sqrt(static_cast<double>(N))) {
    r.notes.push_back("H exceeds sqrt(N)");
  }
  std::vector<cplx> prefix(N + 1);
  CompensatedComplexSum acc;
  for (std::uint64_t n = 1; n <= N; ++n) {
    acc.add(v[n - 1]);
    prefix[n] = acc.value();
  }
  const double invH = 1.0 / static_cast<double>(H);
  r.value = weighted_mean(N - H, options.averaging, [&](std::uint64_t n) {
    return std::norm((prefix[n + H] - prefix[n]) * invH);
  });
  return r;
}

StatReport u1_norm_estimate(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                            const StatOptions& options) {
  const auto v = checked_prefix(u, N);
  const auto t = table_for(v, H, options);
  CompensatedSum acc;
  for (std::uint64_t h = 1; h <= H; ++h) acc.add(t.gamma[h].real());
  const double raw = acc.value() / static_cast<double>(H);
  StatReport r;
  r.name = "u1_norm";
  common_params(r, N, options);
  r.params["H"] = static_cast<double>(H);
  r.value = std::max(0.0, raw);
  r.diagnostics["raw"] = raw;
  return r;
}

namespace {
double mean_abs_gamma(const AutocorrTable& t) {
  CompensatedSum acc;
  for (std::uint64_t h = 1; h <= t.H_max; ++h) acc.add(std::abs(t.gamma[h]));
  return acc.value() / static_cast<double>(t.H_max);
}
}  // namespace

StatReport averaged_chowla_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t N,
                                const StatOptions& options) {
  const auto v = checked_prefix(u, N);
  StatReport r;
  r.name = "averaged_chowla";
  common_params(r, N, options);
  r.params["H"] = static_cast<double>(H);
  r.value = mean_abs_gamma(table_for(v, H, options));
  bool decreasing = true;
  for (std::uint64_t T : kChowlaTrend) {
    if (2 * T >= N) {
      r.notes.push_back("trend point H=" + std::to_string(T) + " skipped (needs H < N/2)");
      continue;
    }
    const double y = T == H ? r.value : mean_abs_gamma(table_for(v, T, options));
    if (!r.trend.empty() && !(y < r.trend.back().second)) decreasing = false;
    r.trend.emplace_back(static_cast<double>(T), y);
  }
  r.diagnostics["trend_strictly_decreasing"] = decreasing ? 1.0 : 0.0;
  return r;
}

StatReport progression_stat(const ArithmeticSequence& u, std::uint64_t H, std::uint64_t Q,
                            std::uint64_t N, const StatOptions& options) {
  const auto v = checked_prefix(u, N);
  require(H >= 1 && Q >= 1, ErrorKind::InvalidArgument, "H and Q must be >= 1");
  require(H * Q < N, ErrorKind::InvalidArgument,
          "progression_stat needs H*Q < N (H*Q = " + std::to_string(H * Q) + ")");
  StatReport r;
  r.name = "progression";
  common_params(r, N, options);
  r.params["H"] = static_cast<double>(H);
  r.params["Q"] = static_cast<double>(Q);
  const std::uint64_t Np = N - H * Q;
  const double invH = 1.0 / static_cast<double>(H);
  std::vector<cplx> prefix(N + 1);
  CompensatedSum over_q;
  for (std::uint64_t q = 1; q <= Q; ++q) {
    // prefix[m] = sum of u(i) over i <= m, i = m mod q
    for (std::uint64_t m = 1; m <= N; ++m) prefix[m] = v[m - 1] + (m > q ? prefix[m - q] : 0.0);
    const double term = weighted_mean(Np, options.averaging, [&](std::uint64_t n) {
      return std::norm((prefix[n + H * q] - prefix[n]) * invH);
    });
    r.diagnostics["q" + std::to_string(q)] = term;
    over_q.add(term);
  }
  r.value = over_q.value() / static_cast<double>(Q);
  return r;
}

StatReport relative_vn_stat(const ArithmeticSequence& u, const PermutationPlan& phi,
                            std::uint64_t L, std::uint64_t N, const StatOptions& options) {
  const auto v = checked_prefix(u, N);
  require(phi.size() == N, ErrorKind::InvalidArgument,
          "permutation size " + std::to_string(phi.size()) + " differs from N = " +
              std::to_string(N));
  require(L >= 1 && L < N, ErrorKind::InvalidArgument, "relative_vn_stat needs 1 <= L < N");
  StatReport r;
  r.name = "relative_vn";
  common_params(r, N, options);
  r.params["L"] = static_cast<double>(L);
  const std::uint64_t Np = N - L;
  const double invL = 1.0 / static_cast<double>(L);
  r.value = weighted_mean(Np, options.averaging, [&](std::uint64_t n) {
    const std::uint64_t m = phi(n);
    const std::uint64_t stop = std::min(L, N - m);
    cplx s = 0.0;
    for (std::uint64_t l = 1; l <= stop; ++l) s += v[n + l - 1] * v[m + l - 1];
    return std::norm(s * invL);
  });
  std::uint64_t skipped = 0;
  for (std::uint64_t n = 1; n <= Np; ++n) {
    const std::uint64_t m = phi(n);
    if (m + L > N) skipped += m + L - N;
  }
  r.diagnostics["skipped_terms"] = static_cast<double>(skipped);
  return r;
}

}  // namespace fslab
