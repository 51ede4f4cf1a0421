#include "fslab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <fstream>

#include "fftw_lock.hpp"
#include "fslab/error.hpp"

namespace fslab {
namespace {

void require_h(const AutocorrTable& acf) {
  require(acf.H_max >= 10 && acf.gamma.size() == acf.H_max + 1, ErrorKind::InvalidArgument,
          "spectral summaries need H_max >= 10 (got " + std::to_string(acf.H_max) + ")");
}

}  // namespace

SpectralSummary wiener_atom_mass(const AutocorrTable& acf) {
  require_h(acf);
  const std::uint64_t H = acf.H_max;
  SpectralSummary s;
  s.H = H;
  CompensatedSum sq;
  CompensatedComplexSum mean;
  for (std::uint64_t h = 1; h <= H; ++h) {
    sq.add(std::norm(acf.gamma[h]));
    mean.add(acf.gamma[h]);
  }
  s.mean_sq = sq.value() / static_cast<double>(H);
  s.mean_abs_sq = std::norm(mean.value() / static_cast<double>(H));
  s.equality_gap = s.mean_sq - s.mean_abs_sq;
  s.nontrivial_atom_mass = std::clamp(s.equality_gap, 0.0, 1.0);
  for (std::uint64_t q = 1; q <= std::min<std::uint64_t>(10, H / 10); ++q) {
    s.rational_profile[q] = rational_atom_mass(acf, q);
  }
  return s;
}

double rational_atom_mass(const AutocorrTable& acf, std::uint64_t q) {
  require_h(acf);
  require(q >= 1 && q <= acf.H_max / 10, ErrorKind::InvalidArgument,
          "q = " + std::to_string(q) + " must lie in 1..H/10 = " + std::to_string(acf.H_max / 10));
  const std::uint64_t J = acf.H_max / q;
  CompensatedComplexSum acc;
  for (std::uint64_t j = 1; j <= J; ++j) acc.add(acf.gamma[q * j]);
  return std::abs(acc.value() / static_cast<double>(J));
}

double atom_mass_at(const AutocorrTable& acf, double theta) {
  require_h(acf);
  const long double t = frac(static_cast<long double>(theta));
  CompensatedComplexSum acc;
  for (std::uint64_t h = 1; h <= acf.H_max; ++h) {
    acc.add(acf.gamma[h] * unit(-static_cast<double>(frac(static_cast<long double>(h) * t))));
  }
  return std::abs(acc.value() / static_cast<double>(acf.H_max));
}

AtomGrid atom_mass_grid(const AutocorrTable& acf, std::uint64_t G) {
  require_h(acf);
  const std::uint64_t H = acf.H_max;
  if (G == 0) G = H;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * G));
  if (!buf) fail(ErrorKind::ResourceLimit, "grid buffer allocation failed");
  std::vector<cplx> folded(G, 0.0);
  for (std::uint64_t h = 1; h <= H; ++h) folded[h % G] += acf.gamma[h];
  for (std::uint64_t k = 0; k < G; ++k) {
    buf[k][0] = folded[k].real();
    buf[k][1] = folded[k].imag();
  }
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(G), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  AtomGrid grid;
  grid.theta.resize(G);
  grid.mass.resize(G);
  CompensatedSum sq;
  for (std::uint64_t g = 0; g < G; ++g) {
    grid.theta[g] = static_cast<double>(g) / static_cast<double>(G);
    grid.mass[g] = std::abs(cplx(buf[g][0], buf[g][1])) / static_cast<double>(H);
    sq.add(grid.mass[g] * grid.mass[g]);
  }
  fftw_free(buf);
  grid.sum_sq = sq.value();
  return grid;
}

void write_grid_csv(const AtomGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << "theta,mass\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.theta.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid.theta[i], grid.mass[i]);
    out << buf;
  }
}

}  // namespace fslab
