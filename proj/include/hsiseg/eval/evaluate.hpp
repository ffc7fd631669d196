#pragma once

#include <hsiseg/eval/clicks.hpp>
#include <hsiseg/eval/metrics.hpp>
#include <hsiseg/parallel.hpp>
#include <hsiseg/pipeline.hpp>

#include <json.hpp>

#include <cstdio>
#include <map>
#include <tuple>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hsiseg::eval {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kAveragingOrder = "per-class mean over images, then unweighted mean over classes";

struct DatasetItem {
  std::string name;
  HyperCube cube;
  LabelMap labels;
  /// Optional externally produced RGB-branch maps: class -> map after
  /// 1, 2, ... clicks. The last map is reused for larger click counts.
  std::map<std::uint8_t, std::vector<SimilarityMap>> rgb_maps{};
};

struct EvalConfig {
  std::vector<Method> methods{Method::sa, Method::sa_eq, Method::pcc, Method::pcc_eq};
  std::size_t click_budget = 5;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  Connectivity connectivity = Connectivity::eight;
  DiceOptions dice{};
  SweepOptions sweep{};
  PipelineConfig pipeline{};
};

struct ClickResult {
  std::size_t clicks = 0;
  Click click{};
  bool duplicate = false;  // placement repeated an earlier click; click set unchanged
  double d_at_05 = 0.0;
  double d_at_max = 0.0;
  double argmax_threshold = 0.0;
};

struct ImageResult {
  std::size_t image_index = 0;
  std::string image;
  std::uint8_t cls = 0;
  Method method = Method::sa;
  std::vector<ClickResult> per_click;
};

struct ClassSummary {
  Method method = Method::sa;
  std::uint8_t cls = 0;
  std::size_t clicks = 0;
  std::size_t images = 0;
  double d_at_05 = 0.0;
  double d_at_max = 0.0;
};

struct MacroSummary {
  Method method = Method::sa;
  std::size_t clicks = 0;
  std::size_t classes = 0;
  double d_at_05 = 0.0;
  double d_at_max = 0.0;
};

struct Skip {
  std::size_t image_index = 0;
  std::string image;
  std::optional<std::uint8_t> cls;
  std::optional<Method> method;
  std::string reason;
};

struct EvalReport {
  EvalConfig config;
  std::vector<ImageResult> per_image;
  std::vector<ClassSummary> per_class;
  std::vector<MacroSummary> macro;
  std::vector<Skip> skipped;

  const MacroSummary* find_macro(Method method, std::size_t clicks) const {
    for (const auto& m : macro)
      if (m.method == method && m.clicks == clicks) return &m;
    return nullptr;
  }
  const ClassSummary* find_class(Method method, std::uint8_t cls, std::size_t clicks) const {
    for (const auto& c : per_class)
      if (c.method == method && c.cls == cls && c.clicks == clicks) return &c;
    return nullptr;
  }
};

/// Click simulation for one image, class and method: first click at the centre
/// of the largest class component, then error-guided clicks on the largest
/// missed component of the 0.5-thresholded prediction.
inline ImageResult simulate_clicks(const DatasetItem& item, std::size_t image_index, std::uint8_t cls, Method method,
                                   const RgbImage* rgb, const EvalConfig& config) {
  ImageResult result{image_index, item.name, cls, method, {}};
  const auto gt = class_mask(item.labels, cls);
  const auto valid = labeled_mask(item.labels);
  PipelineConfig pipeline = config.pipeline;
  pipeline.threads = 1;

  const std::vector<SimilarityMap>* external = nullptr;
  if (auto it = item.rgb_maps.find(cls); it != item.rgb_maps.end() && !it->second.empty()) external = &it->second;

  ClickSet clicks;
  std::optional<BinaryMask> prediction;
  for (std::size_t k = 1; k <= config.click_budget; ++k) {
    ClickResult step;
    step.clicks = k;
    step.click = k == 1 ? place_first_click(item.labels, cls, config.connectivity)
                        : place_next_click(item.labels, cls, *prediction, config.connectivity);
    step.duplicate = clicks.contains(step.click.row, step.click.col);
    if (!step.duplicate) clicks.add(step.click);

    const SimilarityMap* ext = external ? &(*external)[std::min(k, external->size()) - 1] : nullptr;
    const SceneView scene{item.cube, rgb, ext};
    const auto map = compute_map(method, scene, clicks, pipeline);
    step.d_at_05 = d_at_threshold(map, gt, valid, kDecisionThreshold, config.dice);
    const auto best = d_at_max(map, gt, valid, config.sweep);
    step.d_at_max = best.score;
    step.argmax_threshold = best.threshold;
    prediction = threshold(map, kDecisionThreshold);
    result.per_click.push_back(step);
  }
  return result;
}

inline std::vector<std::uint8_t> classes_present(const LabelMap& labels) {
  std::vector<std::size_t> counts(256, 0);
  for (auto v : labels.data()) ++counts[v];
  std::vector<std::uint8_t> out;
  for (std::size_t c = 0; c < labels.classes(); ++c)
    if (counts[c] > 0) out.push_back(static_cast<std::uint8_t>(c));
  return out;
}

inline void summarise(EvalReport& report) {
  report.per_class.clear();
  report.macro.clear();
  const auto& methods = report.config.methods;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method method = methods[mi];
    for (std::size_t k = 1; k <= report.config.click_budget; ++k) {
      // class -> (sum d05, sum dmax, count), summed in image order.
      std::map<std::uint8_t, std::tuple<double, double, std::size_t>> acc;
      for (const auto& r : report.per_image) {
        if (r.method != method || r.per_click.size() < k) continue;
        auto& [s05, smax, n] = acc[r.cls];
        s05 += r.per_click[k - 1].d_at_05;
        smax += r.per_click[k - 1].d_at_max;
        ++n;
      }
      if (acc.empty()) continue;
      MacroSummary macro{method, k, acc.size(), 0.0, 0.0};
      for (const auto& [cls, v] : acc) {
        const auto& [s05, smax, n] = v;
        ClassSummary cs{method, cls, k, n, s05 / double(n), smax / double(n)};
        macro.d_at_05 += cs.d_at_05;
        macro.d_at_max += cs.d_at_max;
        report.per_class.push_back(cs);
      }
      macro.d_at_05 /= double(acc.size());
      macro.d_at_max /= double(acc.size());
      report.macro.push_back(macro);
    }
  }
}

/// Runs the click protocol over every image, class present and method.
/// Failures are recorded in `skipped` and do not abort the run. Output order
/// depends only on the inputs, never on thread scheduling.
inline EvalReport evaluate(std::span<const DatasetItem> dataset, const EvalConfig& config) {
  if (config.click_budget == 0) fail(Errc::invalid_argument, "click budget must be at least 1");
  if (config.methods.empty()) fail(Errc::invalid_argument, "no methods to evaluate");
  for (auto m : config.methods)
    if (m == Method::learned && !config.pipeline.model)
      fail(Errc::invalid_argument, "method 'learned' needs a trained fusion model");

  bool want_rgb = false;
  for (auto m : config.methods) want_rgb |= needs_rgb(m);

  struct Slot {
    std::vector<ImageResult> results;
    std::vector<Skip> skips;
  };
  std::vector<Slot> slots(dataset.size());
  parallel_for_each_index(dataset.size(), config.threads, [&](std::size_t i) {
    const auto& item = dataset[i];
    auto& slot = slots[i];
    try {
      require_same_shape(item.cube, item.labels, "cube vs labels");
      for (const auto& [cls, maps] : item.rgb_maps)
        for (const auto& m : maps) require_same_shape(m, item.cube, "external rgb map");
    } catch (const std::exception& e) {
      slot.skips.push_back({i, item.name, std::nullopt, std::nullopt, e.what()});
      return;
    }
    std::optional<RgbImage> rgb;
    std::string rgb_error;
    if (want_rgb) {
      try {
        rgb = pseudo_rgb(item.cube, config.pipeline.bands);
      } catch (const std::exception& e) {
        rgb_error = e.what();
      }
    }
    for (auto cls : classes_present(item.labels)) {
      for (auto method : config.methods) {
        try {
          slot.results.push_back(simulate_clicks(item, i, cls, method, rgb ? &*rgb : nullptr, config));
        } catch (const std::exception& e) {
          std::string reason = e.what();
          if (needs_rgb(method) && !rgb && !rgb_error.empty()) reason += " (pseudo-RGB: " + rgb_error + ")";
          slot.skips.push_back({i, item.name, cls, method, reason});
        }
      }
    }
  });

  EvalReport report;
  report.config = config;
  for (auto& slot : slots) {
    for (auto& r : slot.results) report.per_image.push_back(std::move(r));
    for (auto& s : slot.skips) report.skipped.push_back(std::move(s));
  }
  summarise(report);
  return report;
}

inline nlohmann::json to_json(const EvalReport& report) {
  using nlohmann::json;
  const auto& cfg = report.config;
  json methods = json::array();
  for (auto m : cfg.methods) methods.push_back(to_string(m));
  json config = {{"seed", cfg.seed},
                 {"click_budget", cfg.click_budget},
                 {"methods", methods},
                 {"decision_threshold", kDecisionThreshold},
                 {"connectivity", static_cast<int>(cfg.connectivity)},
                 {"dice_empty_value", cfg.dice.empty_value},
                 {"sweep", cfg.sweep.mode == SweepMode::binned ? "binned"
                           : cfg.sweep.mode == SweepMode::exact ? "exact"
                                                                : "automatic"},
                 {"sweep_bins", cfg.sweep.bins},
                 {"chroma_sigma", cfg.pipeline.chroma_sigma},
                 {"fusion_scf", to_string(cfg.pipeline.fusion_scf)},
                 {"averaging", kAveragingOrder},
                 {"click_policy", "first: centre of largest class component; next: centre of largest false-negative component"}};
  if (cfg.pipeline.model) config["fusion_model"] = hsiseg::to_json(*cfg.pipeline.model);

  json macro = json::array();
  for (const auto& m : report.macro)
    macro.push_back({{"method", to_string(m.method)}, {"clicks", m.clicks}, {"classes", m.classes},
                     {"d_at_05", m.d_at_05}, {"d_at_max", m.d_at_max}});
  json per_class = json::array();
  for (const auto& c : report.per_class)
    per_class.push_back({{"method", to_string(c.method)}, {"class", c.cls}, {"clicks", c.clicks},
                         {"images", c.images}, {"d_at_05", c.d_at_05}, {"d_at_max", c.d_at_max}});
  json per_image = json::array();
  for (const auto& r : report.per_image) {
    json steps = json::array();
    for (const auto& s : r.per_click)
      steps.push_back({{"clicks", s.clicks}, {"row", s.click.row}, {"col", s.click.col},
                       {"duplicate", s.duplicate}, {"d_at_05", s.d_at_05}, {"d_at_max", s.d_at_max},
                       {"argmax_threshold", s.argmax_threshold}});
    per_image.push_back({{"image_index", r.image_index}, {"image", r.image}, {"class", r.cls},
                         {"method", to_string(r.method)}, {"steps", steps}});
  }
  json skipped = json::array();
  for (const auto& s : report.skipped) {
    json j = {{"image_index", s.image_index}, {"image", s.image}, {"reason", s.reason}};
    j["class"] = s.cls ? json(*s.cls) : json(nullptr);
    j["method"] = s.method ? json(to_string(*s.method)) : json(nullptr);
    skipped.push_back(j);
  }
  return {{"schema_version", kReportSchemaVersion}, {"config", config}, {"macro", macro},
          {"per_class", per_class}, {"per_image", per_image}, {"skipped", skipped}};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// One row per image x class x method x click count. The first line is a
/// comment carrying the schema version and seed.
inline std::string to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "# schema_version=" << kReportSchemaVersion << " seed=" << report.config.seed << "\n";
  out << "image_index,image,class,method,clicks,click_row,click_col,duplicate,d_at_05,d_at_max,argmax_threshold\n";
  for (const auto& r : report.per_image) {
    for (const auto& s : r.per_click) {
      out << r.image_index << ',' << csv_escape(r.image) << ',' << int(r.cls) << ',' << to_string(r.method) << ','
          << s.clicks << ',' << s.click.row << ',' << s.click.col << ',' << (s.duplicate ? 1 : 0) << ','
          << format_metric(s.d_at_05) << ',' << format_metric(s.d_at_max) << ','
          << format_metric(s.argmax_threshold) << '\n';
    }
  }
  return out.str();
}

}  // namespace hsiseg::eval
