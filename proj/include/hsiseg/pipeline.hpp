#pragma once

#include <hsiseg/fusion.hpp>
#include <hsiseg/pseudo_rgb.hpp>
#include <hsiseg/rgb_branch.hpp>
#include <hsiseg/scf.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsiseg {

/// Every map the engine can produce for a click set.
enum class Method { sa, sa_eq, pcc, pcc_eq, rgb, intersection, learned };

inline constexpr std::array<Method, 7> kAllMethods{Method::sa,  Method::sa_eq,        Method::pcc,    Method::pcc_eq,
                                                   Method::rgb, Method::intersection, Method::learned};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::sa: return "sa";
    case Method::sa_eq: return "sa_eq";
    case Method::pcc: return "pcc";
    case Method::pcc_eq: return "pcc_eq";
    case Method::rgb: return "rgb";
    case Method::intersection: return "intersection";
    case Method::learned: return "learned";
  }
  return "sa";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (auto m : kAllMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

inline Method require_method(std::string_view name) {
  if (auto m = parse_method(name)) return *m;
  fail(Errc::not_found, "unknown method '" + std::string(name) + "'");
}

inline std::optional<ScfMethod> scf_method_of(Method m) {
  switch (m) {
    case Method::sa: return ScfMethod::SA;
    case Method::sa_eq: return ScfMethod::SA_Equalized;
    case Method::pcc: return ScfMethod::PCC;
    case Method::pcc_eq: return ScfMethod::PCC_Equalized;
    default: return std::nullopt;
  }
}

inline bool needs_rgb(Method m) { return !scf_method_of(m).has_value(); }

struct PipelineConfig {
  double chroma_sigma = 25.0;
  /// Spectral map fed to the intersection and learned fusions.
  ScfMethod fusion_scf = ScfMethod::SA_Equalized;
  std::optional<FusionModel> model;
  BandSelection bands{};
  unsigned threads = 1;
};

/// Inputs for one image. `rgb` may be null when only spectral methods are
/// requested; `external_rgb`, when set, replaces the colour stand-in.
struct SceneView {
  const HyperCube& cube;
  const RgbImage* rgb = nullptr;
  const SimilarityMap* external_rgb = nullptr;
};

inline SimilarityMap rgb_branch_map(const SceneView& scene, const ClickSet& clicks, const PipelineConfig& config) {
  if (scene.external_rgb) {
    require_same_shape(*scene.external_rgb, scene.cube, "external rgb map");
    return *scene.external_rgb;
  }
  if (!scene.rgb) fail(Errc::invalid_argument, "rgb branch needs a pseudo-RGB image or an external map");
  return chroma_probability_map(*scene.rgb, clicks, config.chroma_sigma);
}

inline SimilarityMap compute_map(Method method, const SceneView& scene, const ClickSet& clicks,
                                 const PipelineConfig& config, ScfDiagnostics* diagnostics = nullptr) {
  const ScfOptions scf_options{config.threads};
  if (auto scf = scf_method_of(method)) return scf_map(scene.cube, clicks, *scf, scf_options, diagnostics);
  if (method == Method::rgb) return rgb_branch_map(scene, clicks, config);
  if (method == Method::learned && !config.model)
    fail(Errc::conflict, "method 'learned' needs a trained fusion model");
  const auto rgb = rgb_branch_map(scene, clicks, config);
  const auto spectral = scf_map(scene.cube, clicks, config.fusion_scf, scf_options, diagnostics);
  if (method == Method::intersection) return intersect(rgb, spectral);
  return apply_fusion(*config.model, rgb, spectral);
}

}  // namespace hsiseg
