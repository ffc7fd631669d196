#pragma once

#include <hsiseg/io/raster.hpp>
#include <hsiseg/types.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <variant>

namespace hsiseg {

/// Probability map produced elsewhere (e.g. by an RGB foundation model) and
/// saved as SMAP or 16-bit PNG.
struct ExternalRgbMap {
  std::filesystem::path path;
};

/// Colour-distance stand-in for an RGB interactive model. sigma is in 8-bit
/// RGB units.
struct ChromaStandIn {
  double sigma = 25.0;
};

using RgbBranchSource = std::variant<ExternalRgbMap, ChromaStandIn>;

/// exp(-d^2 / 2 sigma^2) to the nearest positive-click colour, multiplied by
/// (1 - exp(-d_neg^2 / 2 sigma^2)) for every negative click. Values are kept
/// strictly positive (floored at the smallest normal float).
inline SimilarityMap chroma_probability_map(const RgbImage& rgb, const ClickSet& clicks, double sigma) {
  if (!(sigma > 0.0)) fail(Errc::invalid_argument, "chroma sigma must be positive");
  clicks.check_bounds(rgb.height(), rgb.width());
  if (clicks.positive_count() == 0)
    fail(Errc::invalid_argument, "colour stand-in needs at least one positive click");

  struct Colour {
    double r, g, b;
  };
  std::vector<Colour> pos, neg;
  for (const auto& c : clicks) {
    const auto px = rgb.pixel(c.row * rgb.width() + c.col);
    (c.polarity == Polarity::positive ? pos : neg).push_back({double(px[0]), double(px[1]), double(px[2])});
  }
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  const std::size_t n = rgb.height() * rgb.width();
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto px = rgb.pixel(i);
    auto dist_sq = [&](const Colour& c) {
      const double dr = px[0] - c.r, dg = px[1] - c.g, db = px[2] - c.b;
      return dr * dr + dg * dg + db * db;
    };
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : pos) nearest = std::min(nearest, dist_sq(c));
    double v = std::exp(-nearest * inv_two_sigma_sq);
    for (const auto& c : neg) v *= 1.0 - std::exp(-dist_sq(c) * inv_two_sigma_sq);
    out[i] = std::max(static_cast<float>(v), std::numeric_limits<float>::min());
  }
  return SimilarityMap(rgb.height(), rgb.width(), std::move(out));
}

inline SimilarityMap rgb_probability_map(const RgbBranchSource& source, const RgbImage& rgb,
                                         const ClickSet& clicks) {
  if (const auto* ext = std::get_if<ExternalRgbMap>(&source)) {
    auto map = io::load_probability_map(ext->path);
    require_same_shape(map, rgb, "external rgb map");
    return map;
  }
  return chroma_probability_map(rgb, clicks, std::get<ChromaStandIn>(source).sigma);
}

}  // namespace hsiseg
