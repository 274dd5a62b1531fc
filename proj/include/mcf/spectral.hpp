#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcf/grid.hpp"

namespace mcf {

enum class CurveKind { pce, spd, ssf };

const char* curve_kind_name(CurveKind kind);

// Sampled spectral response over frequency in THz. Linear interpolation
// between samples, zero outside the sampled support.
struct SpectralCurve {
  CurveKind kind = CurveKind::pce;
  std::vector<double> freq;
  std::vector<double> value;

  void validate() const;
  double sample(double f) const;
  double support_lo() const { return freq.front(); }
  double support_hi() const { return freq.back(); }
};

// Two-column CSV (frequency_THz, value). One optional header line; '#'
// comments and blank lines are skipped. Rows must be strictly ascending
// in frequency.
SpectralCurve parse_curve(std::string_view text, CurveKind kind,
                          const std::string& source_name);
SpectralCurve load_curve(const std::string& path, CurveKind kind);

struct IntegrationGrid {
  int points = 1024;
  std::optional<double> lo;
  std::optional<double> hi;
};

// entries(cp, c) couples sensed channel cp (its conversion curve) with
// input channel c (its illuminant). degenerate means no entry had any
// frequency range where all three factors are nonzero; the matrix is
// all zeros in that case.
struct CrossTalkMatrix {
  Grid<double> entries;
  bool degenerate = false;
};

// entries(cp, c) = trapezoidal integral of ssf * pce[cp] * spd[c] over a
// uniform grid. Bounds default to the union of all curve supports.
CrossTalkMatrix crosstalk_matrix(const std::vector<SpectralCurve>& pce,
                                 const std::vector<SpectralCurve>& spd,
                                 const SpectralCurve& ssf,
                                 const IntegrationGrid& grid = {});

// Gaussian passband: peak * exp(-4 ln2 ((f - center) / width)^2), so width
// is the full width at half maximum. Sampled out to +-6 widths.
SpectralCurve synth_pce(double center, double width, double peak);

}  // namespace mcf
