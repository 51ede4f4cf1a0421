#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "fslab/correlate.hpp"

namespace fslab {

/// Wiener-lemma summaries of gamma(1..H).
struct SpectralSummary {
  std::uint64_t H = 0;
  double mean_sq = 0.0;              ///< (1/H) sum |gamma(h)|^2
  double mean_abs_sq = 0.0;          ///< |(1/H) sum gamma(h)|^2
  double nontrivial_atom_mass = 0.0; ///< max(0, mean_sq - mean_abs_sq)
  double equality_gap = 0.0;         ///< mean_sq - mean_abs_sq, unclamped
  std::map<std::uint64_t, double> rational_profile;  ///< q = 1..min(10, H/10)
};

/// Requires H_max >= 10.
SpectralSummary wiener_atom_mass(const AutocorrTable& acf);

/// |(1/J) sum_{j <= J} gamma(qj)|, J = floor(H/q). Requires 1 <= q <= H/10.
double rational_atom_mass(const AutocorrTable& acf, std::uint64_t q);

/// |(1/H) sum_{h <= H} gamma(h) e^{-2 pi i h theta}|
double atom_mass_at(const AutocorrTable& acf, double theta);

struct AtomGrid {
  std::vector<double> theta;
  std::vector<double> mass;
  double sum_sq = 0.0;
};

/// atom_mass_at on theta = g/G, g = 0..G-1, by one FFT. G = 0 means G = H,
/// for which sum_sq equals mean_sq up to rounding.
AtomGrid atom_mass_grid(const AutocorrTable& acf, std::uint64_t G = 0);

void write_grid_csv(const AtomGrid& grid, const std::filesystem::path& path);

}  // namespace fslab
