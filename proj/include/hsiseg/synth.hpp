#pragma once

#include <hsiseg/rng.hpp>
#include <hsiseg/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace hsiseg {

/// Class prototype spectrum: either an explicit per-band list or a
/// baseline plus Gaussian bumps over wavelength.
struct Prototype {
  std::vector<double> spectrum;  // used when non-empty; length must equal bands
  double baseline = 0.0;
  std::vector<double> centers_nm;
  std::vector<double> widths_nm;
  std::vector<double> amplitudes;

  double at(std::size_t band, double wavelength) const {
    if (!spectrum.empty()) return spectrum[band];
    double v = baseline;
    for (std::size_t i = 0; i < centers_nm.size(); ++i) {
      const double d = (wavelength - centers_nm[i]) / widths_nm[i];
      v += amplitudes[i] * std::exp(-0.5 * d * d);
    }
    return v;
  }
};

struct SceneClass {
  Prototype prototype;
  std::size_t region_seeds = 1;
};

struct Shading {
  double min = 1.0;
  double max = 1.0;
  double scale_px = 16.0;  // spacing of the random control grid
};

struct SceneSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 32;
  double wavelength_min_nm = 450.0;
  double wavelength_max_nm = 950.0;
  std::vector<SceneClass> classes;
  Shading shading{};
  double noise_sigma = 0.0;
  std::size_t unlabeled_border = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (height == 0 || width == 0) fail(Errc::invalid_argument, "scene must have non-zero size");
    if (bands < 2) fail(Errc::invalid_argument, "scene needs at least two bands");
    if (!(wavelength_min_nm > 0.0) || !(wavelength_max_nm > wavelength_min_nm))
      fail(Errc::invalid_argument, "scene wavelength range must be positive and increasing");
    if (classes.size() < 2) fail(Errc::invalid_argument, "scene needs at least two classes");
    if (classes.size() > 254) fail(Errc::invalid_argument, "scene supports at most 254 classes");
    if (!(shading.min > 0.0) || shading.max < shading.min) fail(Errc::invalid_argument, "shading range must satisfy 0 < min <= max");
    if (!(shading.scale_px > 0.0)) fail(Errc::invalid_argument, "shading scale must be positive");
    if (noise_sigma < 0.0) fail(Errc::invalid_argument, "noise sigma must be non-negative");
    for (const auto& c : classes) {
      const auto& p = c.prototype;
      if (c.region_seeds == 0) fail(Errc::invalid_argument, "every class needs at least one region seed");
      if (!p.spectrum.empty() && p.spectrum.size() != bands)
        fail(Errc::invalid_argument, "explicit prototype length must equal bands");
      if (p.centers_nm.size() != p.widths_nm.size() || p.centers_nm.size() != p.amplitudes.size())
        fail(Errc::invalid_argument, "prototype centers, widths and amplitudes must have equal length");
      for (double w : p.widths_nm)
        if (!(w > 0.0)) fail(Errc::invalid_argument, "prototype widths must be positive");
    }
  }
};

inline std::vector<double> scene_wavelengths(const SceneSpec& spec) {
  std::vector<double> wl(spec.bands);
  const double step = (spec.wavelength_max_nm - spec.wavelength_min_nm) / static_cast<double>(spec.bands - 1);
  for (std::size_t b = 0; b < spec.bands; ++b) wl[b] = spec.wavelength_min_nm + step * static_cast<double>(b);
  wl.back() = spec.wavelength_max_nm;
  return wl;
}

inline std::vector<double> prototype_spectrum(const SceneSpec& spec, std::size_t cls) {
  const auto wl = scene_wavelengths(spec);
  std::vector<double> out(spec.bands);
  for (std::size_t b = 0; b < spec.bands; ++b) out[b] = std::max(0.0, spec.classes[cls].prototype.at(b, wl[b]));
  return out;
}

/// Bilinear upsampling of a random grid spaced `scale_px` apart.
inline std::vector<double> smooth_field(std::size_t height, std::size_t width, const Shading& shading,
                                        RandomStream& rng) {
  const std::size_t gh = static_cast<std::size_t>(std::ceil(double(height) / shading.scale_px)) + 2;
  const std::size_t gw = static_cast<std::size_t>(std::ceil(double(width) / shading.scale_px)) + 2;
  std::vector<double> grid(gh * gw);
  for (auto& g : grid) g = rng.uniform(shading.min, shading.max);
  std::vector<double> field(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    const double y = double(r) / shading.scale_px;
    const auto y0 = static_cast<std::size_t>(y);
    const double fy = y - double(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double x = double(c) / shading.scale_px;
      const auto x0 = static_cast<std::size_t>(x);
      const double fx = x - double(x0);
      const double top = grid[y0 * gw + x0] * (1 - fx) + grid[y0 * gw + x0 + 1] * fx;
      const double bottom = grid[(y0 + 1) * gw + x0] * (1 - fx) + grid[(y0 + 1) * gw + x0 + 1] * fx;
      field[r * width + c] = std::clamp(top * (1 - fy) + bottom * fy, shading.min, shading.max);
    }
  }
  return field;
}

/// Voronoi scene: seeds are drawn class by class in round-robin order and
/// every pixel takes the class of its nearest seed. Spectrum = prototype x
/// shading x (1 + sigma * N(0,1)), floored at 0. A ring of
/// `unlabeled_border` pixels is marked unlabeled.
inline std::pair<HyperCube, LabelMap> generate_scene(const SceneSpec& spec) {
  spec.validate();
  const std::size_t H = spec.height, W = spec.width, C = spec.bands;
  RandomStream regions(spec.seed, "synth.regions");
  RandomStream shading_rng(spec.seed, "synth.shading");
  RandomStream noise(spec.seed, "synth.noise");

  struct Seed {
    double r, c;
    std::uint8_t cls;
  };
  std::vector<Seed> seeds;
  std::size_t max_seeds = 0;
  for (const auto& c : spec.classes) max_seeds = std::max(max_seeds, c.region_seeds);
  for (std::size_t round = 0; round < max_seeds; ++round)
    for (std::size_t k = 0; k < spec.classes.size(); ++k)
      if (round < spec.classes[k].region_seeds)
        seeds.push_back({regions.uniform(0.0, double(H)), regions.uniform(0.0, double(W)), static_cast<std::uint8_t>(k)});

  std::vector<std::uint8_t> labels(H * W);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      double best = std::numeric_limits<double>::infinity();
      std::uint8_t cls = 0;
      for (const auto& s : seeds) {
        const double dr = double(r) + 0.5 - s.r, dc = double(c) + 0.5 - s.c;
        const double d = dr * dr + dc * dc;
        if (d < best) {
          best = d;
          cls = s.cls;
        }
      }
      labels[r * W + c] = cls;
    }
  }

  std::vector<std::vector<double>> prototypes;
  for (std::size_t k = 0; k < spec.classes.size(); ++k) prototypes.push_back(prototype_spectrum(spec, k));
  const auto field = smooth_field(H, W, spec.shading, shading_rng);

  std::vector<float> data(H * W * C);
  for (std::size_t p = 0; p < H * W; ++p) {
    const auto& proto = prototypes[labels[p]];
    for (std::size_t b = 0; b < C; ++b) {
      double v = proto[b] * field[p];
      if (spec.noise_sigma > 0.0) v *= 1.0 + spec.noise_sigma * noise.normal();
      data[p * C + b] = static_cast<float>(std::max(0.0, v));
    }
  }

  const std::size_t ring = spec.unlabeled_border;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c)
      if (r < ring || c < ring || r + ring >= H || c + ring >= W) labels[r * W + c] = kUnlabeled;

  return {HyperCube(H, W, C, scene_wavelengths(spec), std::move(data)),
          LabelMap(H, W, spec.classes.size(), std::move(labels))};
}

/// Scales every pixel's spectrum by the matching positive field value.
/// Multiplies every spectrum by its per-pixel factor.
inline HyperCube apply_shading(const HyperCube& cube, std::span<const double> field) {
  if (field.size() != cube.pixels()) fail(Errc::dimension_mismatch, "shading field size does not match cube");
  for (double f : field)
    if (!(f > 0.0) || !std::isfinite(f)) fail(Errc::invalid_argument, "shading field must be positive");
  const std::size_t C = cube.bands();
  std::vector<float> data(cube.data().begin(), cube.data().end());
  for (std::size_t p = 0; p < cube.pixels(); ++p)
    for (std::size_t b = 0; b < C; ++b)
      data[p * C + b] = static_cast<float>(static_cast<double>(data[p * C + b]) * field[p]);
  return HyperCube(cube.height(), cube.width(), C, cube.wavelengths(), std::move(data));
}

/// Built-in scene family: `classes` overlapping Gaussian-bump prototypes that
/// differ in shape more than in brightness.
inline SceneSpec standard_scene_spec(std::uint64_t seed, std::size_t classes = 4, std::size_t size = 64,
                                     std::size_t bands = 32, double noise_sigma = 0.02) {
  SceneSpec spec;
  spec.height = spec.width = size;
  spec.bands = bands;
  spec.noise_sigma = noise_sigma;
  spec.seed = seed;
  spec.shading = {0.5, 1.2, 24.0};
  spec.unlabeled_border = 2;
  RandomStream rng(seed, "synth.prototypes");
  for (std::size_t k = 0; k < classes; ++k) {
    SceneClass c;
    c.region_seeds = 2;
    c.prototype.baseline = rng.uniform(0.05, 0.2);
    for (int bump = 0; bump < 3; ++bump) {
      c.prototype.centers_nm.push_back(rng.uniform(spec.wavelength_min_nm, spec.wavelength_max_nm));
      c.prototype.widths_nm.push_back(rng.uniform(40.0, 120.0));
      c.prototype.amplitudes.push_back(rng.uniform(0.1, 0.6));
    }
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

// JSON form of SceneSpec:
// {"height":64,"width":64,"bands":32,"wavelength_range":[450,950],
//  "classes":[{"prototype":{"centers":[..],"widths":[..],"amplitudes":[..],"baseline":0.1}
//              | {"spectrum":[..]}, "region_seeds":3}, ...],
//  "shading":{"min":0.5,"max":1.0,"scale":16},"noise_sigma":0.02,
//  "unlabeled_border":2,"seed":7}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(Errc::format, "scene spec must be a JSON object");
  SceneSpec spec;
  try {
    spec.height = j.value("height", spec.height);
    spec.width = j.value("width", spec.width);
    spec.bands = j.value("bands", spec.bands);
    if (j.contains("wavelength_range")) {
      const auto& wr = j.at("wavelength_range");
      if (!wr.is_array() || wr.size() != 2) fail(Errc::format, "wavelength_range must be [min, max]");
      spec.wavelength_min_nm = wr[0].get<double>();
      spec.wavelength_max_nm = wr[1].get<double>();
    }
    if (!j.contains("classes") || !j.at("classes").is_array()) fail(Errc::format, "scene spec needs a 'classes' array");
    for (const auto& jc : j.at("classes")) {
      SceneClass c;
      c.region_seeds = jc.value("region_seeds", std::size_t{1});
      if (jc.contains("spectrum")) {
        c.prototype.spectrum = jc.at("spectrum").get<std::vector<double>>();
      } else if (jc.contains("prototype")) {
        const auto& jp = jc.at("prototype");
        if (jp.contains("spectrum")) c.prototype.spectrum = jp.at("spectrum").get<std::vector<double>>();
        c.prototype.baseline = jp.value("baseline", 0.0);
        c.prototype.centers_nm = jp.value("centers", std::vector<double>{});
        c.prototype.widths_nm = jp.value("widths", std::vector<double>{});
        c.prototype.amplitudes = jp.value("amplitudes", std::vector<double>{});
      } else {
        fail(Errc::format, "scene class needs 'prototype' or 'spectrum'");
      }
      spec.classes.push_back(std::move(c));
    }
    if (j.contains("shading")) {
      const auto& js = j.at("shading");
      spec.shading.min = js.value("min", 1.0);
      spec.shading.max = js.value("max", 1.0);
      spec.shading.scale_px = js.value("scale", 16.0);
    }
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.unlabeled_border = j.value("unlabeled_border", std::size_t{0});
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("invalid scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

inline nlohmann::json to_json(const SceneSpec& spec) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : spec.classes) {
    nlohmann::json proto;
    if (!c.prototype.spectrum.empty()) proto["spectrum"] = c.prototype.spectrum;
    else
      proto = {{"baseline", c.prototype.baseline},
               {"centers", c.prototype.centers_nm},
               {"widths", c.prototype.widths_nm},
               {"amplitudes", c.prototype.amplitudes}};
    classes.push_back({{"prototype", proto}, {"region_seeds", c.region_seeds}});
  }
  return {{"height", spec.height},
          {"width", spec.width},
          {"bands", spec.bands},
          {"wavelength_range", {spec.wavelength_min_nm, spec.wavelength_max_nm}},
          {"classes", classes},
          {"shading", {{"min", spec.shading.min}, {"max", spec.shading.max}, {"scale", spec.shading.scale_px}}},
          {"noise_sigma", spec.noise_sigma},
          {"unlabeled_border", spec.unlabeled_border},
          {"seed", spec.seed}};
}

}  // namespace hsiseg
