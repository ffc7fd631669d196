#pragma once

#include <hsiseg/types.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace hsiseg {

/// Target wavelengths (nm) for the R, G and B channels and the averaging
/// half-window around each. Percentiles control the per-channel stretch.
struct BandSelection {
  std::array<double, 3> targets_nm{630.0, 532.0, 465.0};
  double half_width_nm = 20.0;
  double low_percentile = 1.0;
  double high_percentile = 99.0;
};

/// Linear-interpolated percentile (p in [0, 100]) of an already sorted range.
inline double sorted_percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Indices of bands within `half_width` of `target`.
inline std::vector<std::size_t> bands_in_window(const HyperCube& cube, double target, double half_width) {
  std::vector<std::size_t> out;
  const auto& wl = cube.wavelengths();
  for (std::size_t b = 0; b < wl.size(); ++b)
    if (std::abs(wl[b] - target) <= half_width) out.push_back(b);
  return out;
}

/// Each channel is the mean of the bands in its window, stretched so that its
/// low/high percentiles map to 0/255, then clamped and rounded. A channel
/// whose percentiles coincide maps to 0.
inline RgbImage pseudo_rgb(const HyperCube& cube, const BandSelection& selection = {}) {
  const std::size_t n = cube.pixels();
  std::vector<std::uint8_t> out(n * 3);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double target = selection.targets_nm[ch];
    const auto bands = bands_in_window(cube, target, selection.half_width_nm);
    if (bands.empty())
      fail(Errc::invalid_argument, "empty band window around " + std::to_string(target) + " nm");
    std::vector<double> channel(n);
    for (std::size_t p = 0; p < n; ++p) {
      const auto s = cube.spectrum(p);
      double sum = 0.0;
      for (auto b : bands) sum += s[b];
      channel[p] = sum / static_cast<double>(bands.size());
    }
    std::vector<double> sorted = channel;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted_percentile(sorted, selection.low_percentile);
    const double hi = sorted_percentile(sorted, selection.high_percentile);
    const double span = hi - lo;
    for (std::size_t p = 0; p < n; ++p) {
      double v = span > 0.0 ? (channel[p] - lo) / span * 255.0 : 0.0;
      v = std::clamp(v, 0.0, 255.0);
      out[p * 3 + ch] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return RgbImage(cube.height(), cube.width(), std::move(out));
}

}  // namespace hsiseg
