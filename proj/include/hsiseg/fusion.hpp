#pragma once

#include <hsiseg/rng.hpp>
#include <hsiseg/types.hpp>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace hsiseg {

/// Pointwise product of two maps ("both branches must agree").
inline SimilarityMap intersect(const SimilarityMap& a, const SimilarityMap& b) {
  require_same_shape(a, b, "intersect");
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return SimilarityMap(a.height(), a.width(), std::move(out));
}

struct LossOptions {
  double probability_epsilon = 1e-7;  // predictions clamped to [eps, 1 - eps]
  double dice_smoothing = 1.0;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred, zero where masked or clamped
};

/// 0.5 * soft-Dice loss + 0.5 * mean binary cross-entropy, both restricted to
/// pixels with mask = 1. Masked pixels are skipped outright, so their
/// predictions cannot influence the loss.
inline LossResult dice_ce_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                               std::span<const std::uint8_t> mask, const LossOptions& options = {}) {
  if (pred.size() != target.size() || pred.size() != mask.size())
    fail(Errc::dimension_mismatch, "loss inputs differ in length");
  const double eps = options.probability_epsilon;
  const double smooth = options.dice_smoothing;

  double labeled = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double p = std::clamp(pred[i], eps, 1.0 - eps);
    const double g = target[i] ? 1.0 : 0.0;
    labeled += 1.0;
    inter += p * g;
    psum += p;
    gsum += g;
    ce -= g > 0.0 ? std::log(p) : std::log(1.0 - p);
  }
  if (labeled == 0.0) fail(Errc::invalid_argument, "no labeled pixels");

  const double denom = psum + gsum + smooth;
  const double numer = 2.0 * inter + smooth;
  LossResult result;
  result.loss = 0.5 * (1.0 - numer / denom) + 0.5 * (ce / labeled);
  result.grad.assign(pred.size(), 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    if (pred[i] < eps || pred[i] > 1.0 - eps) continue;
    const double p = pred[i];
    const double g = target[i] ? 1.0 : 0.0;
    const double d_dice = (2.0 * g * denom - numer) / (denom * denom);
    const double d_ce = g > 0.0 ? -1.0 / p : 1.0 / (1.0 - p);
    result.grad[i] = -0.5 * d_dice + 0.5 * d_ce / labeled;
  }
  return result;
}

/// Per-pixel inputs of the logistic fusion: RGB probability, spectral
/// similarity and their product.
using FusionFeatures = std::array<double, 3>;

struct TrainingBatch {
  std::vector<FusionFeatures> features;
  std::vector<std::uint8_t> target;
  std::vector<std::uint8_t> mask;
};

inline TrainingBatch make_training_batch(const SimilarityMap& rgb, const SimilarityMap& scf,
                                         const BinaryMask& target, const BinaryMask& valid) {
  require_same_shape(rgb, scf, "training batch");
  require_same_shape(rgb, target, "training batch target");
  require_same_shape(rgb, valid, "training batch mask");
  TrainingBatch batch;
  batch.features.resize(rgb.size());
  batch.target.assign(target.data().begin(), target.data().end());
  batch.mask.assign(valid.data().begin(), valid.data().end());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const double a = rgb[i], b = scf[i];
    batch.features[i] = {a, b, a * b};
  }
  return batch;
}

struct FusionModel {
  std::array<double, 4> weights{};  // w_rgb, w_scf, w_product, bias
  int epochs = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  bool degenerate = false;          // training data had a single class
  std::vector<double> loss_history;  // not persisted
};

inline nlohmann::json to_json(const FusionModel& model) {
  return {{"weights", model.weights},
          {"epochs", model.epochs},
          {"final_loss", model.final_loss},
          {"seed", model.seed},
          {"learning_rate", model.learning_rate},
          {"degenerate", model.degenerate}};
}

inline FusionModel fusion_model_from_json(const nlohmann::json& j) {
  FusionModel model;
  if (!j.is_object() || !j.contains("weights") || !j["weights"].is_array() || j["weights"].size() != 4)
    fail(Errc::format, "fusion model needs a 4-element 'weights' array");
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j["weights"][i].is_number()) fail(Errc::format, "fusion weights must be numbers");
    model.weights[i] = j["weights"][i].get<double>();
    if (!std::isfinite(model.weights[i])) fail(Errc::numeric, "fusion weights must be finite");
  }
  model.epochs = j.value("epochs", 0);
  model.final_loss = j.value("final_loss", 0.0);
  model.seed = j.value("seed", std::uint64_t{0});
  model.learning_rate = j.value("learning_rate", 0.0);
  model.degenerate = j.value("degenerate", false);
  return model;
}

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double fusion_logit(const std::array<double, 4>& w, const FusionFeatures& x) {
  return w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3];
}

}  // namespace detail

/// Fused probability, clamped to [eps, 1 - eps] so it stays inside (0, 1).
inline double fusion_probability(const FusionModel& model, const FusionFeatures& x,
                                 double eps = LossOptions{}.probability_epsilon) {
  return std::clamp(detail::sigmoid(detail::fusion_logit(model.weights, x)), eps, 1.0 - eps);
}

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  LossOptions loss{};
};

/// Mean over batches of dice_ce_loss, and its gradient w.r.t. the weights.
inline double fusion_objective(const std::array<double, 4>& weights, std::span<const TrainingBatch> batches,
                               const LossOptions& loss_options, std::array<double, 4>* grad) {
  if (grad) grad->fill(0.0);
  double total = 0.0;
  std::vector<double> pred;
  for (const auto& batch : batches) {
    pred.resize(batch.features.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
      pred[i] = detail::sigmoid(detail::fusion_logit(weights, batch.features[i]));
    const auto lr = dice_ce_loss(pred, batch.target, batch.mask, loss_options);
    total += lr.loss;
    if (!grad) continue;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (lr.grad[i] == 0.0) continue;
      const double dz = lr.grad[i] * pred[i] * (1.0 - pred[i]);
      const auto& x = batch.features[i];
      (*grad)[0] += dz * x[0];
      (*grad)[1] += dz * x[1];
      (*grad)[2] += dz * x[2];
      (*grad)[3] += dz;
    }
  }
  const double n = static_cast<double>(batches.size());
  if (grad)
    for (auto& g : *grad) g /= n;
  return total / n;
}

/// Full-batch gradient descent with a fixed step. Deterministic for a fixed
/// seed and batch order.
inline FusionModel train_logistic_fusion(std::span<const TrainingBatch> batches, const TrainConfig& config = {}) {
  if (batches.empty()) fail(Errc::invalid_argument, "no training batches");
  if (config.epochs < 0 || !(config.learning_rate > 0.0))
    fail(Errc::invalid_argument, "epochs must be >= 0 and learning rate > 0");
  for (const auto& b : batches) {
    if (b.features.size() != b.target.size() || b.features.size() != b.mask.size())
      fail(Errc::dimension_mismatch, "training batch arrays differ in length");
  }

  bool has_pos = false, has_neg = false;
  for (const auto& b : batches)
    for (std::size_t i = 0; i < b.mask.size(); ++i)
      if (b.mask[i]) (b.target[i] ? has_pos : has_neg) = true;

  FusionModel model;
  model.seed = config.seed;
  model.learning_rate = config.learning_rate;
  model.epochs = config.epochs;
  model.degenerate = !(has_pos && has_neg);
  if (model.degenerate) spdlog::warn("fusion training data contains a single class; model is degenerate");

  RandomStream init(config.seed, "fusion.init");
  for (auto& w : model.weights) w = 0.01 * init.normal();

  std::array<double, 4> grad{};
  model.loss_history.reserve(static_cast<std::size_t>(config.epochs) + 1);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = fusion_objective(model.weights, batches, config.loss, &grad);
    model.loss_history.push_back(loss);
    for (std::size_t k = 0; k < 4; ++k) model.weights[k] -= config.learning_rate * grad[k];
  }
  model.final_loss = fusion_objective(model.weights, batches, config.loss, nullptr);
  model.loss_history.push_back(model.final_loss);
  for (double w : model.weights)
    if (!std::isfinite(w)) fail(Errc::numeric, "fusion training diverged");
  return model;
}

inline SimilarityMap apply_fusion(const FusionModel& model, const SimilarityMap& rgb, const SimilarityMap& scf) {
  require_same_shape(rgb, scf, "apply_fusion");
  std::vector<float> out(rgb.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = rgb[i], b = scf[i];
    out[i] = static_cast<float>(fusion_probability(model, {a, b, a * b}));
  }
  return SimilarityMap(rgb.height(), rgb.width(), std::move(out));
}

}  // namespace hsiseg
