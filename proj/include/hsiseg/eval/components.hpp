#pragma once

#include <hsiseg/types.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace hsiseg::eval {

enum class Connectivity : int { four = 4, eight = 8 };

inline Connectivity parse_connectivity(int n) {
  if (n == 4) return Connectivity::four;
  if (n == 8) return Connectivity::eight;
  fail(Errc::invalid_argument, "connectivity must be 4 or 8");
}

struct Components {
  /// 0 on background, 1..count() on foreground, numbered in raster order of
  /// each component's first pixel.
  std::vector<std::uint32_t> labels;
  /// sizes[k] is the pixel count of component k + 1.
  std::vector<std::size_t> sizes;

  std::size_t count() const noexcept { return sizes.size(); }

  /// 1-based label of the largest component (first in raster order on ties),
  /// 0 if there are none.
  std::uint32_t largest() const noexcept {
    std::uint32_t best = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k)
      if (best == 0 || sizes[k] > sizes[best - 1]) best = static_cast<std::uint32_t>(k + 1);
    return best;
  }
};

inline Components connected_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::eight) {
  const std::size_t H = mask.height(), W = mask.width();
  Components out;
  out.labels.assign(H * W, 0);
  std::vector<std::size_t> stack;
  const bool eight = connectivity == Connectivity::eight;
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!mask[start] || out.labels[start] != 0) continue;
    const auto label = static_cast<std::uint32_t>(out.sizes.size() + 1);
    std::size_t size = 0;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      const auto r = static_cast<std::ptrdiff_t>(p / W), c = static_cast<std::ptrdiff_t>(p % W);
      for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          if (!eight && dr != 0 && dc != 0) continue;
          const auto nr = r + dr, nc = c + dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(H) || nc >= static_cast<std::ptrdiff_t>(W))
            continue;
          const auto q = static_cast<std::size_t>(nr) * W + static_cast<std::size_t>(nc);
          if (mask[q] && out.labels[q] == 0) {
            out.labels[q] = label;
            stack.push_back(q);
          }
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

namespace detail {

// Squared-distance lower envelope of parabolas (Felzenszwalb & Huttenlocher).
inline void edt_1d(const double* f, std::size_t n, std::size_t stride, double* d,
                   std::vector<std::size_t>& v, std::vector<double>& z, std::vector<double>& buf) {
  buf.resize(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = f[i * stride];
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect_at = [&](std::size_t q, std::size_t p) {
    const double qd = static_cast<double>(q), pd = static_cast<double>(p);
    return ((buf[q] + qd * qd) - (buf[p] + pd * pd)) / (2.0 * qd - 2.0 * pd);
  };
  for (std::size_t q = 1; q < n; ++q) {
    double s = intersect_at(q, v[k]);
    while (s <= z[k]) {  // terminates: z[0] is -inf
      --k;
      s = intersect_at(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double diff = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q * stride] = diff * diff + buf[v[k]];
  }
}

}  // namespace detail

/// Exact Euclidean distance from every foreground pixel to the nearest
/// non-foreground pixel centre, where the ring of pixels just outside the
/// image counts as background. Background pixels get 0.
inline std::vector<double> distance_transform(const BinaryMask& mask) {
  const std::size_t H = mask.height(), W = mask.width();
  const std::size_t PH = H + 2, PW = W + 2;
  // Finite stand-in for infinity: larger than any squared distance on the grid.
  const double far = static_cast<double>(PH * PH + PW * PW) + 1.0;
  std::vector<double> grid(PH * PW, 0.0);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      if (mask.at(r, c)) grid[(r + 1) * PW + (c + 1)] = far;

  std::vector<std::size_t> v;
  std::vector<double> z, buf;
  std::vector<double> tmp(PH * PW);
  for (std::size_t c = 0; c < PW; ++c) detail::edt_1d(grid.data() + c, PH, PW, tmp.data() + c, v, z, buf);
  for (std::size_t r = 0; r < PH; ++r) detail::edt_1d(tmp.data() + r * PW, PW, 1, grid.data() + r * PW, v, z, buf);

  std::vector<double> out(H * W, 0.0);
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      if (mask.at(r, c)) out[r * W + c] = std::sqrt(grid[(r + 1) * PW + (c + 1)]);
  return out;
}

}  // namespace hsiseg::eval
