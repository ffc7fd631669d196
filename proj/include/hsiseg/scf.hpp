#pragma once

#include <hsiseg/parallel.hpp>
#include <hsiseg/types.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsiseg {

enum class ScfMethod { SA, PCC, SA_Equalized, PCC_Equalized };

inline constexpr std::array<ScfMethod, 4> kAllScfMethods{
    ScfMethod::SA, ScfMethod::PCC, ScfMethod::SA_Equalized, ScfMethod::PCC_Equalized};

inline std::string_view to_string(ScfMethod m) {
  switch (m) {
    case ScfMethod::SA: return "sa";
    case ScfMethod::PCC: return "pcc";
    case ScfMethod::SA_Equalized: return "sa_eq";
    case ScfMethod::PCC_Equalized: return "pcc_eq";
  }
  return "sa";
}

inline std::optional<ScfMethod> parse_scf_method(std::string_view name) {
  for (auto m : kAllScfMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

inline bool is_equalized(ScfMethod m) {
  return m == ScfMethod::SA_Equalized || m == ScfMethod::PCC_Equalized;
}

inline bool uses_angle(ScfMethod m) { return m == ScfMethod::SA || m == ScfMethod::SA_Equalized; }

namespace detail {

// Variance below this fraction of the raw second moment is treated as zero:
// a constant spectrum centred in double precision leaves residue ~1e-32.
inline constexpr double kRelativeVarianceFloor = 1e-20;

template <class T>
void require_same_length(std::span<const T> s, std::span<const T> t) {
  if (s.size() != t.size())
    fail(Errc::dimension_mismatch, "spectrum length mismatch: " + std::to_string(s.size()) + " vs " +
                                       std::to_string(t.size()));
  if (s.empty()) fail(Errc::invalid_argument, "empty spectrum");
}

template <class T>
double norm(std::span<const T> s) {
  double sq = 0.0;
  for (T v : s) sq += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sq);
}

/// Angle between unit vectors via 2*atan2(|u-v|, |u+v|). Unlike acos of the
/// normalised dot product this stays accurate for nearly parallel vectors,
/// which is what keeps SA maps stable under per-pixel rescaling.
template <class T>
double angle_from_unit(std::span<const T> x, double inv_norm_x, std::span<const double> unit) {
  double diff = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    const double a = static_cast<double>(x[i]) * inv_norm_x;
    const double d = a - unit[i];
    const double s = a + unit[i];
    diff += d * d;
    sum += s * s;
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

inline double angle_to_similarity(double theta) {
  return std::max(0.0, 1.0 - theta / (std::numbers::pi / 2.0));
}

struct Centered {
  std::vector<double> values;
  double sxx = 0.0;
  bool degenerate = false;
};

template <class T>
Centered center(std::span<const T> s) {
  Centered out;
  double mean = 0.0, raw_sq = 0.0;
  for (T v : s) {
    mean += static_cast<double>(v);
    raw_sq += static_cast<double>(v) * static_cast<double>(v);
  }
  mean /= static_cast<double>(s.size());
  out.values.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.values[i] = static_cast<double>(s[i]) - mean;
    out.sxx += out.values[i] * out.values[i];
  }
  out.degenerate = !(out.sxx > kRelativeVarianceFloor * raw_sq);
  return out;
}

template <class T>
double spectral_angle_impl(std::span<const T> s, std::span<const T> t) {
  require_same_length(s, t);
  const double ns = norm(s), nt = norm(t);
  if (!(ns > 0.0) || !(nt > 0.0)) fail(Errc::numeric, "spectral angle undefined for zero-norm spectrum");
  std::vector<double> unit_t(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) unit_t[i] = static_cast<double>(t[i]) / nt;
  return angle_from_unit(s, 1.0 / ns, unit_t);
}

template <class T>
double pcc_impl(std::span<const T> s, std::span<const T> t) {
  require_same_length(s, t);
  if (s.size() < 2) fail(Errc::invalid_argument, "correlation needs at least two samples");
  const auto cs = center(s), ct = center(t);
  if (cs.degenerate || ct.degenerate) fail(Errc::numeric, "correlation undefined for zero-variance spectrum");
  double sxy = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) sxy += cs.values[i] * ct.values[i];
  return std::clamp(sxy / std::sqrt(cs.sxx * ct.sxx), -1.0, 1.0);
}

}  // namespace detail

/// Angle in radians between two spectra, in [0, pi].
inline double spectral_angle(std::span<const double> s, std::span<const double> t) {
  return detail::spectral_angle_impl(s, t);
}
inline double spectral_angle(std::span<const float> s, std::span<const float> t) {
  return detail::spectral_angle_impl(s, t);
}

/// 1 - angle / (pi/2), floored at 0.
inline double sa_similarity(std::span<const double> s, std::span<const double> t) {
  return detail::angle_to_similarity(spectral_angle(s, t));
}
inline double sa_similarity(std::span<const float> s, std::span<const float> t) {
  return detail::angle_to_similarity(spectral_angle(s, t));
}

/// Pearson correlation, two-pass (centre, then accumulate).
inline double pcc(std::span<const double> s, std::span<const double> t) { return detail::pcc_impl(s, t); }
inline double pcc(std::span<const float> s, std::span<const float> t) { return detail::pcc_impl(s, t); }

inline double pcc_similarity(std::span<const double> s, std::span<const double> t) {
  return (pcc(s, t) + 1.0) / 2.0;
}
inline double pcc_similarity(std::span<const float> s, std::span<const float> t) {
  return (pcc(s, t) + 1.0) / 2.0;
}

/// Counters for candidate pixels that had no defined similarity.
struct ScfDiagnostics {
  std::size_t zero_norm_pixels = 0;      // SA: similarity set to 0
  std::size_t zero_variance_pixels = 0;  // PCC: correlation treated as 0
};

struct ScfOptions {
  unsigned threads = 1;
};

/// Spectra under the positive clicks, preprocessed for the chosen comparison:
/// unit-normalised for SA, centred and unit-normalised for PCC.
class ReferenceSpectra {
 public:
  ReferenceSpectra(const HyperCube& cube, const ClickSet& clicks, ScfMethod method)
      : bands_(cube.bands()), angle_(uses_angle(method)) {
    clicks.check_bounds(cube.height(), cube.width());
    for (const auto& click : clicks) {
      if (click.polarity != Polarity::positive) continue;
      add(cube.spectrum(click.row, click.col), click);
    }
    if (refs_.empty()) fail(Errc::invalid_argument, "spectral comparison needs at least one positive click");
  }

  std::size_t size() const noexcept { return refs_.size() / bands_; }
  std::size_t bands() const noexcept { return bands_; }
  std::span<const double> operator[](std::size_t i) const noexcept {
    return {refs_.data() + i * bands_, bands_};
  }

 private:
  void add(std::span<const float> s, const Click& click) {
    const std::string where = "(" + std::to_string(click.row) + ", " + std::to_string(click.col) + ")";
    if (angle_) {
      const double n = detail::norm(s);
      if (!(n > 0.0)) fail(Errc::numeric, "click at " + where + " has a zero-norm spectrum");
      for (float v : s) refs_.push_back(static_cast<double>(v) / n);
    } else {
      if (bands_ < 2) fail(Errc::invalid_argument, "correlation needs at least two bands");
      const auto c = detail::center(s);
      if (c.degenerate) fail(Errc::numeric, "click at " + where + " has a zero-variance spectrum");
      const double n = std::sqrt(c.sxx);
      for (double v : c.values) refs_.push_back(v / n);
    }
  }

  std::size_t bands_;
  bool angle_;
  std::vector<double> refs_;
};

/// Empirical-CDF equalisation: out(p) = #{q : in(q) <= in(p)} / N.
/// Rank preserving, ties share a value, output in (0, 1].
inline SimilarityMap equalize(const SimilarityMap& map) {
  const std::size_t n = map.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  const auto values = map.data();
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  std::vector<float> out(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const float cdf = static_cast<float>(static_cast<double>(j) / static_cast<double>(n));
    for (std::size_t k = i; k < j; ++k) out[order[k]] = cdf;
    i = j;
  }
  return SimilarityMap(map.height(), map.width(), std::move(out));
}

/// Per pixel, the highest similarity to any positive-click spectrum. Negative
/// clicks are ignored. Equalised methods equalise the aggregated map.
inline SimilarityMap scf_map(const HyperCube& cube, const ClickSet& clicks, ScfMethod method,
                             const ScfOptions& options = {}, ScfDiagnostics* diagnostics = nullptr) {
  const ReferenceSpectra refs(cube, clicks, method);
  const std::size_t H = cube.height(), W = cube.width(), C = cube.bands();
  const bool angle = uses_angle(method);
  std::vector<float> out(H * W);
  std::atomic<std::size_t> degenerate{0};

  parallel_blocks(H, options.threads, [&](std::size_t row_begin, std::size_t row_end) {
    std::size_t local_degenerate = 0;
    std::vector<double> centred(C);
    for (std::size_t p = row_begin * W; p < row_end * W; ++p) {
      const auto x = cube.spectrum(p);
      double best = 0.0;
      if (angle) {
        double sq = 0.0;
        for (float v : x) sq += static_cast<double>(v) * static_cast<double>(v);
        if (!(sq > 0.0)) {
          ++local_degenerate;
        } else {
          const double inv = 1.0 / std::sqrt(sq);
          for (std::size_t r = 0; r < refs.size(); ++r)
            best = std::max(best, detail::angle_to_similarity(detail::angle_from_unit(x, inv, refs[r])));
        }
      } else {
        double mean = 0.0, raw_sq = 0.0;
        for (float v : x) {
          mean += static_cast<double>(v);
          raw_sq += static_cast<double>(v) * static_cast<double>(v);
        }
        mean /= static_cast<double>(C);
        double sxx = 0.0;
        for (std::size_t i = 0; i < C; ++i) {
          centred[i] = static_cast<double>(x[i]) - mean;
          sxx += centred[i] * centred[i];
        }
        if (!(sxx > detail::kRelativeVarianceFloor * raw_sq)) {
          ++local_degenerate;
          best = 0.5;
        } else {
          const double inv = 1.0 / std::sqrt(sxx);
          best = -1.0;
          for (std::size_t r = 0; r < refs.size(); ++r) {
            const auto u = refs[r];
            double sxy = 0.0;
            for (std::size_t i = 0; i < C; ++i) sxy += centred[i] * u[i];
            best = std::max(best, std::clamp(sxy * inv, -1.0, 1.0));
          }
          best = (best + 1.0) / 2.0;
        }
      }
      out[p] = static_cast<float>(best);
    }
    degenerate += local_degenerate;
  });

  if (diagnostics) {
    if (angle) diagnostics->zero_norm_pixels += degenerate.load();
    else diagnostics->zero_variance_pixels += degenerate.load();
  }
  SimilarityMap map(H, W, std::move(out));
  return is_equalized(method) ? equalize(map) : map;
}

}  // namespace hsiseg
