#pragma once

#include <hsiseg/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace hsiseg::eval {

inline constexpr double kDecisionThreshold = 0.5;

struct DiceOptions {
  /// Score when both masks are empty; 0.0 selects strict mode.
  double empty_value = 1.0;
};

inline double dice_from_counts(std::size_t intersection, std::size_t a, std::size_t b,
                               const DiceOptions& options = {}) {
  if (a + b == 0) return options.empty_value;
  return 2.0 * static_cast<double>(intersection) / static_cast<double>(a + b);
}

inline double dice(const BinaryMask& a, const BinaryMask& b, const DiceOptions& options = {}) {
  require_same_shape(a, b, "dice");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
    inter += a[i] && b[i];
  }
  return dice_from_counts(inter, na, nb, options);
}

/// map >= t
inline BinaryMask threshold(const SimilarityMap& map, double t) {
  BinaryMask out(map.height(), map.width());
  for (std::size_t i = 0; i < map.size(); ++i) out.set(i, map[i] >= t);
  return out;
}

/// Dice of (map >= t) against gt, both restricted to eval_mask.
inline double d_at_threshold(const SimilarityMap& map, const BinaryMask& gt, const BinaryMask& eval_mask,
                             double t, const DiceOptions& options = {}) {
  require_same_shape(map, gt, "d_at_threshold");
  require_same_shape(map, eval_mask, "d_at_threshold");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!eval_mask[i]) continue;
    const bool p = map[i] >= t;
    const bool g = gt[i];
    np += p;
    ng += g;
    inter += p && g;
  }
  return dice_from_counts(inter, np, ng, options);
}

enum class SweepMode { automatic, exact, binned };

struct SweepOptions {
  SweepMode mode = SweepMode::automatic;
  std::size_t bins = 65536;
  /// automatic switches to binned above this many labeled pixels.
  std::size_t exact_limit = std::size_t{1} << 22;
};

struct MaxDice {
  double score = 0.0;
  double threshold = 0.0;  // smallest threshold achieving score
};

/// One above the largest admissible map value: predicts nothing.
inline constexpr double kAboveOne = 1.0 + 1e-6;

/// Best Dice over thresholds. The exact sweep evaluates every distinct map
/// value on labeled pixels plus 0 and 1 + eps, so the result is invariant
/// under strictly increasing transforms of the map.
inline MaxDice d_at_max(const SimilarityMap& map, const BinaryMask& gt, const BinaryMask& eval_mask,
                        const SweepOptions& sweep = {}) {
  require_same_shape(map, gt, "d_at_max");
  require_same_shape(map, eval_mask, "d_at_max");
  std::vector<std::pair<float, bool>> samples;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (!eval_mask[i]) continue;
    samples.emplace_back(map[i], gt[i]);
    positives += gt[i];
  }
  if (positives == 0) fail(Errc::invalid_argument, "ground truth is empty on the labeled region");

  // Thresholds are visited from high to low; ">=" keeps the smallest
  // threshold among equal scores.
  MaxDice best{dice_from_counts(0, 0, positives), kAboveOne};
  auto consider = [&](double t, std::size_t tp, std::size_t predicted) {
    const double d = dice_from_counts(tp, predicted, positives);
    if (d >= best.score) best = {d, t};
  };

  const bool binned = sweep.mode == SweepMode::binned ||
                      (sweep.mode == SweepMode::automatic && samples.size() > sweep.exact_limit);
  if (!binned) {
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t tp = 0, predicted = 0, i = 0;
    while (i < samples.size()) {
      const float v = samples[i].first;
      while (i < samples.size() && samples[i].first == v) {
        ++predicted;
        tp += samples[i].second;
        ++i;
      }
      consider(v, tp, predicted);
    }
    if (samples.back().first > 0.0f) consider(0.0, tp, predicted);
  } else {
    // Threshold k / bins, k = bins .. 0. Sample v is predicted at k iff
    // k <= floor(v * bins).
    const std::size_t bins = std::max<std::size_t>(sweep.bins, 1);
    std::vector<std::size_t> hist_all(bins + 1, 0), hist_pos(bins + 1, 0);
    for (const auto& [v, g] : samples) {
      auto k = static_cast<std::size_t>(std::floor(static_cast<double>(v) * static_cast<double>(bins)));
      k = std::min(k, bins);
      while (k > 0 && static_cast<double>(k) / static_cast<double>(bins) > v) --k;
      while (k < bins && static_cast<double>(k + 1) / static_cast<double>(bins) <= v) ++k;
      ++hist_all[k];
      hist_pos[k] += g;
    }
    std::size_t tp = 0, predicted = 0;
    for (std::size_t k = bins + 1; k-- > 0;) {
      predicted += hist_all[k];
      tp += hist_pos[k];
      consider(static_cast<double>(k) / static_cast<double>(bins), tp, predicted);
    }
  }
  return best;
}

}  // namespace hsiseg::eval
