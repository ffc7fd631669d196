#pragma once

#include <hsiseg/eval/components.hpp>
#include <hsiseg/types.hpp>

namespace hsiseg::eval {

/// Centre of the largest connected component of `region`: the pixel with the
/// greatest distance-transform value inside that component, ties broken by
/// smallest row, then smallest column.
inline Click center_of_largest_component(const BinaryMask& region, Connectivity connectivity) {
  const auto comps = connected_components(region, connectivity);
  const auto target = comps.largest();
  if (target == 0) fail(Errc::not_found, "empty class");
  BinaryMask component(region.height(), region.width());
  for (std::size_t i = 0; i < region.size(); ++i) component.set(i, comps.labels[i] == target);
  const auto dist = distance_transform(component);
  std::size_t best = region.size();
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!component[i]) continue;
    if (best == region.size() || dist[i] > dist[best]) best = i;  // raster order gives the tie-break
  }
  return {best / region.width(), best % region.width(), Polarity::positive};
}

inline Click place_first_click(const LabelMap& labels, std::uint8_t cls,
                               Connectivity connectivity = Connectivity::eight) {
  return center_of_largest_component(class_mask(labels, cls), connectivity);
}

/// Error-guided follow-up click: the first-click rule applied to the missed
/// part of the class (class and not predicted). Falls back to the whole class
/// when nothing is missed.
inline Click place_next_click(const LabelMap& labels, std::uint8_t cls, const BinaryMask& prediction,
                              Connectivity connectivity = Connectivity::eight) {
  require_same_shape(labels, prediction, "place_next_click");
  const auto target = class_mask(labels, cls);
  if (target.empty()) fail(Errc::not_found, "empty class");
  BinaryMask missed(labels.height(), labels.width());
  for (std::size_t i = 0; i < target.size(); ++i) missed.set(i, target[i] && !prediction[i]);
  if (missed.empty()) return center_of_largest_component(target, connectivity);
  return center_of_largest_component(missed, connectivity);
}

}  // namespace hsiseg::eval
