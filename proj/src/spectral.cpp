#include "mcf/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mcf/errors.hpp"

namespace mcf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

double value_ceiling(CurveKind kind) {
  return kind == CurveKind::spd ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

const char* curve_kind_name(CurveKind kind) {
  switch (kind) {
    case CurveKind::pce: return "pce";
    case CurveKind::spd: return "spd";
    case CurveKind::ssf: return "ssf";
  }
  return "?";
}

void SpectralCurve::validate() const {
  if (freq.size() != value.size())
    throw InvalidInput("spectral curve: frequency/value length mismatch");
  if (freq.size() < 2)
    throw InvalidInput("spectral curve: needs at least 2 samples");
  const double ceil = value_ceiling(kind);
  for (size_t i = 0; i < freq.size(); ++i) {
    if (!std::isfinite(freq[i]) || !std::isfinite(value[i]))
      throw InvalidInput("spectral curve: non-finite sample");
    if (i > 0 && freq[i] <= freq[i - 1])
      throw InvalidInput("spectral curve: frequencies not strictly ascending");
    if (value[i] < 0.0 || value[i] > ceil)
      throw InvalidInput(std::string("spectral curve: ") + curve_kind_name(kind) +
                         " value out of range");
  }
}

double SpectralCurve::sample(double f) const {
  if (f < freq.front() || f > freq.back()) return 0.0;
  auto it = std::upper_bound(freq.begin(), freq.end(), f);
  if (it == freq.begin()) return value.front();
  size_t hi = static_cast<size_t>(it - freq.begin());
  if (hi == freq.size()) return value.back();
  size_t lo = hi - 1;
  double t = (f - freq[lo]) / (freq[hi] - freq[lo]);
  return value[lo] + t * (value[hi] - value[lo]);
}

SpectralCurve parse_curve(std::string_view text, CurveKind kind,
                          const std::string& source_name) {
  SpectralCurve curve;
  curve.kind = kind;
  const double ceil = value_ceiling(kind);

  int line_no = 0;
  bool saw_data = false;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;

    size_t comma = line.find(',');
    double f = 0.0, v = 0.0;
    bool ok = comma != std::string_view::npos &&
              parse_double(line.substr(0, comma), f) &&
              parse_double(line.substr(comma + 1), v);
    if (!ok) {
      if (!saw_data) continue;  // one optional header line before the data
      throw ParseError(source_name, line_no, "expected 'frequency,value'");
    }
    saw_data = true;
    if (!std::isfinite(f) || !std::isfinite(v))
      throw ParseError(source_name, line_no, "non-finite sample");
    if (!curve.freq.empty() && f <= curve.freq.back())
      throw ParseError(source_name, line_no, "frequencies must be strictly ascending");
    if (v < 0.0 || v > ceil)
      throw ParseError(source_name, line_no,
                       std::string(curve_kind_name(kind)) + " value out of range");
    curve.freq.push_back(f);
    curve.value.push_back(v);
  }

  if (curve.freq.size() < 2)
    throw ParseError(source_name, line_no, "fewer than 2 samples");
  return curve;
}

SpectralCurve load_curve(const std::string& path, CurveKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open curve file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_curve(buf.str(), kind, path);
}

CrossTalkMatrix crosstalk_matrix(const std::vector<SpectralCurve>& pce,
                                 const std::vector<SpectralCurve>& spd,
                                 const SpectralCurve& ssf,
                                 const IntegrationGrid& grid) {
  if (pce.empty() || pce.size() != spd.size())
    throw InvalidInput("crosstalk_matrix: need equal, nonzero channel counts");
  for (const auto& c : pce) c.validate();
  for (const auto& c : spd) c.validate();
  ssf.validate();
  if (grid.points < 2) throw InvalidInput("crosstalk_matrix: grid needs >= 2 points");

  double lo = ssf.support_lo();
  double hi = ssf.support_hi();
  for (const auto& c : pce) {
    lo = std::min(lo, c.support_lo());
    hi = std::max(hi, c.support_hi());
  }
  for (const auto& c : spd) {
    lo = std::min(lo, c.support_lo());
    hi = std::max(hi, c.support_hi());
  }
  if (grid.lo) lo = *grid.lo;
  if (grid.hi) hi = *grid.hi;
  if (!(lo < hi)) throw InvalidInput("crosstalk_matrix: empty integration interval");

  const int n = grid.points;
  const int channels = static_cast<int>(pce.size());
  const double h = (hi - lo) / (n - 1);

  std::vector<double> ssf_s(n);
  Grid<double> pce_s(channels, n), spd_s(channels, n);
  for (int i = 0; i < n; ++i) {
    double x = lo + h * i;
    ssf_s[i] = ssf.sample(x);
    for (int c = 0; c < channels; ++c) {
      pce_s(c, i) = pce[static_cast<size_t>(c)].sample(x);
      spd_s(c, i) = spd[static_cast<size_t>(c)].sample(x);
    }
  }

  CrossTalkMatrix out;
  out.entries = Grid<double>(channels, channels);
  bool any_overlap = false;
  for (int cp = 0; cp < channels; ++cp) {
    for (int c = 0; c < channels; ++c) {
      double olo = std::max({ssf.support_lo(), pce[static_cast<size_t>(cp)].support_lo(),
                             spd[static_cast<size_t>(c)].support_lo()});
      double ohi = std::min({ssf.support_hi(), pce[static_cast<size_t>(cp)].support_hi(),
                             spd[static_cast<size_t>(c)].support_hi()});
      if (olo <= ohi) any_overlap = true;

      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        acc += w * ssf_s[i] * pce_s(cp, i) * spd_s(c, i);
      }
      out.entries(cp, c) = acc * h;
    }
  }
  out.degenerate = !any_overlap;
  return out;
}

SpectralCurve synth_pce(double center, double width, double peak) {
  if (!(width > 0.0)) throw InvalidInput("synth_pce: width must be positive");
  if (!(peak > 0.0) || peak > 1.0) throw InvalidInput("synth_pce: peak must be in (0, 1]");

  constexpr int kHalfSamples = 120;  // 20 samples per width, out to 6 widths
  SpectralCurve curve;
  curve.kind = CurveKind::pce;
  curve.freq.reserve(2 * kHalfSamples + 1);
  curve.value.reserve(2 * kHalfSamples + 1);
  const double four_ln2 = 4.0 * std::log(2.0);
  for (int i = -kHalfSamples; i <= kHalfSamples; ++i) {
    double x = center + width * i / 20.0;
    double u = (x - center) / width;
    double v = peak * std::exp(-four_ln2 * u * u);
    curve.freq.push_back(x);
    curve.value.push_back(std::clamp(v, 0.0, 1.0));
  }
  return curve;
}

}  // namespace mcf
