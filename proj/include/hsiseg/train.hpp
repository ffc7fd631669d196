#pragma once

#include <hsiseg/eval/evaluate.hpp>
#include <hsiseg/fusion.hpp>

#include <span>
#include <vector>

namespace hsiseg {

/// One batch per (image, class present): branch maps after the first
/// protocol click, target = class, mask = labeled pixels.
inline std::vector<TrainingBatch> fusion_training_batches(std::span<const eval::DatasetItem> items,
                                                          const PipelineConfig& pipeline,
                                                          eval::Connectivity connectivity = eval::Connectivity::eight,
                                                          unsigned threads = 1) {
  std::vector<std::vector<TrainingBatch>> per_item(items.size());
  parallel_for_each_index(items.size(), threads, [&](std::size_t i) {
    const auto& item = items[i];
    require_same_shape(item.cube, item.labels, "cube vs labels");
    std::optional<RgbImage> rgb;
    const auto valid = labeled_mask(item.labels);
    for (auto cls : eval::classes_present(item.labels)) {
      const ClickSet clicks{eval::place_first_click(item.labels, cls, connectivity)};
      const SimilarityMap* ext = nullptr;
      if (auto it = item.rgb_maps.find(cls); it != item.rgb_maps.end() && !it->second.empty()) ext = &it->second.front();
      if (!ext && !rgb) rgb = pseudo_rgb(item.cube, pipeline.bands);
      const SceneView scene{item.cube, rgb ? &*rgb : nullptr, ext};
      const auto rgb_map = rgb_branch_map(scene, clicks, pipeline);
      const auto scf = scf_map(item.cube, clicks, pipeline.fusion_scf);
      per_item[i].push_back(make_training_batch(rgb_map, scf, class_mask(item.labels, cls), valid));
    }
  });
  std::vector<TrainingBatch> out;
  for (auto& v : per_item)
    for (auto& b : v) out.push_back(std::move(b));
  return out;
}

/// Mean D@0.5 of the fused prediction over batches.
inline double training_dice(const FusionModel& model, std::span<const TrainingBatch> batches) {
  if (batches.empty()) fail(Errc::invalid_argument, "no training batches");
  double total = 0.0;
  for (const auto& b : batches) {
    std::size_t inter = 0, np = 0, ng = 0;
    for (std::size_t i = 0; i < b.features.size(); ++i) {
      if (!b.mask[i]) continue;
      const bool p = fusion_probability(model, b.features[i]) >= eval::kDecisionThreshold;
      const bool g = b.target[i] != 0;
      np += p;
      ng += g;
      inter += p && g;
    }
    total += eval::dice_from_counts(inter, np, ng);
  }
  return total / double(batches.size());
}

}  // namespace hsiseg
