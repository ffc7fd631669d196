#pragma once

#include <hsiseg/cli/manifest.hpp>
#include <hsiseg/io/clicks_json.hpp>
#include <hsiseg/service/server.hpp>
#include <hsiseg/synth.hpp>
#include <hsiseg/train.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace hsiseg::cli {

namespace fs = std::filesystem;

/// Exit statuses: 0 success, 1 runtime/IO failure, 2 bad input or usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline int exit_code_for(Errc code) { return code == Errc::io ? kExitFailure : kExitUsage; }

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string log_level = "info";
};

inline std::optional<FusionModel> load_model(const std::string& path) {
  if (path.empty()) return std::nullopt;
  try {
    return fusion_model_from_json(nlohmann::json::parse(io::read_file_text(path)));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "invalid fusion model JSON: " + std::string(e.what()));
  }
}

inline nlohmann::json parse_json_file(const fs::path& path, const char* what) {
  try {
    return nlohmann::json::parse(io::read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("invalid ") + what + " JSON: " + e.what());
  }
}

inline std::vector<Method> parse_methods(const std::string& list) {
  std::vector<Method> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(require_method(item));
  }
  if (out.empty()) fail(Errc::invalid_argument, "no methods given");
  return out;
}

// ---- synth --------------------------------------------------------------

struct SynthOptions {
  fs::path spec;
  fs::path out_dir;
  std::string name = "scene";
};

/// Writes <name>.hdr/.img (cube) and <name>_labels.png.
inline int cmd_synth(const SynthOptions& opt, const GlobalOptions& g, std::ostream& out) {
  auto spec = scene_spec_from_json(parse_json_file(opt.spec, "scene spec"));
  if (g.seed) spec.seed = *g.seed;
  const auto [cube, labels] = generate_scene(spec);
  fs::create_directories(opt.out_dir);
  const auto cube_path = opt.out_dir / (opt.name + ".hdr");
  const auto label_path = opt.out_dir / (opt.name + "_labels.png");
  io::save_cube(cube, cube_path, io::Interleave::bsq, "hsiseg synthetic scene seed=" + std::to_string(spec.seed));
  io::save_labels(labels, label_path);
  out << "seed " << spec.seed << "\n" << cube_path.string() << "\n" << label_path.string() << "\n";
  return kExitOk;
}

// ---- segment ------------------------------------------------------------

struct SegmentOptions {
  fs::path cube;
  fs::path clicks;
  std::string method = "sa";
  fs::path out;
  std::string rgb_map;
  std::string model;
  double chroma_sigma = 25.0;
};

/// Writes the map as SMAP, or as a 16-bit PNG when `out` ends in .png.
inline int cmd_segment(const SegmentOptions& opt, const GlobalOptions& g, std::ostream& out) {
  const Method method = require_method(opt.method);
  const auto cube = io::load_cube(opt.cube);
  const auto clicks = io::clicks_from_json(parse_json_file(opt.clicks, "clicks"));
  clicks.check_bounds(cube.height(), cube.width());
  PipelineConfig cfg;
  cfg.chroma_sigma = opt.chroma_sigma;
  cfg.model = load_model(opt.model);
  cfg.threads = g.threads;
  std::optional<SimilarityMap> ext;
  if (!opt.rgb_map.empty()) ext = io::load_probability_map(opt.rgb_map);
  std::optional<RgbImage> rgb;
  if (needs_rgb(method) && !ext) rgb = pseudo_rgb(cube, cfg.bands);
  ScfDiagnostics diag;
  const auto map = compute_map(method, {cube, rgb ? &*rgb : nullptr, ext ? &*ext : nullptr}, clicks, cfg, &diag);
  if (diag.zero_norm_pixels || diag.zero_variance_pixels)
    spdlog::warn("{} zero-norm and {} zero-variance pixels", diag.zero_norm_pixels, diag.zero_variance_pixels);
  if (opt.out.extension() == ".png") io::write_file_bytes(opt.out, io::encode_map_png16(map));
  else io::save_probability_map(map, opt.out);
  const auto stats = service::map_stats(map);
  out << opt.out.string() << " " << map.height() << "x" << map.width() << " min " << stats.min << " max "
      << stats.max << " mean " << stats.mean << "\n";
  return kExitOk;
}

// ---- eval ---------------------------------------------------------------

struct EvalOptions {
  fs::path manifest;
  std::string methods = "sa,sa_eq,pcc,pcc_eq";
  std::size_t clicks = 5;
  fs::path out_dir;
  std::string model;
  int connectivity = 8;
  bool strict_dice = false;
  std::string sweep = "auto";
  double chroma_sigma = 25.0;
};

inline eval::EvalReport run_manifest_eval(const EvalOptions& opt, const GlobalOptions& g) {
  const auto entries = load_manifest(opt.manifest);
  if (entries.empty()) fail(Errc::invalid_argument, "manifest is empty");

  eval::EvalConfig cfg;
  cfg.methods = parse_methods(opt.methods);
  cfg.click_budget = opt.clicks;
  cfg.seed = g.seed.value_or(0);
  cfg.threads = g.threads;
  cfg.connectivity = eval::parse_connectivity(opt.connectivity);
  cfg.dice.empty_value = opt.strict_dice ? 0.0 : 1.0;
  if (opt.sweep == "exact") cfg.sweep.mode = eval::SweepMode::exact;
  else if (opt.sweep == "binned") cfg.sweep.mode = eval::SweepMode::binned;
  else if (opt.sweep != "auto") fail(Errc::invalid_argument, "sweep must be auto, exact or binned");
  cfg.pipeline.chroma_sigma = opt.chroma_sigma;
  cfg.pipeline.model = load_model(opt.model);

  // Items that fail to load become skips; evaluation runs on the rest with
  // their manifest indices preserved.
  std::vector<eval::DatasetItem> items;
  std::vector<std::size_t> index;
  std::vector<eval::Skip> load_skips;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      items.push_back(load_item(entries[i]));
      index.push_back(i);
    } catch (const std::exception& e) {
      spdlog::warn("skipping '{}': {}", entries[i].name, e.what());
      load_skips.push_back({i, entries[i].name, std::nullopt, std::nullopt, e.what()});
    }
  }
  auto report = eval::evaluate(items, cfg);
  for (auto& r : report.per_image) r.image_index = index[r.image_index];
  for (auto& s : report.skipped) s.image_index = index[s.image_index];
  report.skipped.insert(report.skipped.end(), load_skips.begin(), load_skips.end());
  std::stable_sort(report.skipped.begin(), report.skipped.end(),
                   [](const auto& a, const auto& b) { return a.image_index < b.image_index; });
  return report;
}

inline int cmd_eval(const EvalOptions& opt, const GlobalOptions& g, std::ostream& out) {
  const auto report = run_manifest_eval(opt, g);
  fs::create_directories(opt.out_dir);
  io::write_file_text(opt.out_dir / "report.json", eval::to_json(report).dump(2) + "\n");
  io::write_file_text(opt.out_dir / "report.csv", eval::to_csv(report));
  out << "seed " << report.config.seed << "\n";
  out << "method        clicks  classes  D@0.5     D@Max\n";
  for (const auto& m : report.macro) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-13s %6zu  %7zu  %.6f  %.6f\n", std::string(to_string(m.method)).c_str(),
                  m.clicks, m.classes, m.d_at_05, m.d_at_max);
    out << line;
  }
  if (!report.skipped.empty()) out << report.skipped.size() << " skipped (see report.json)\n";
  return kExitOk;
}

// ---- train-fusion -------------------------------------------------------

struct TrainOptions {
  fs::path manifest;
  fs::path config;  // optional JSON {epochs, learning_rate, seed, chroma_sigma, spectral}
  fs::path out;
};

inline int cmd_train_fusion(const TrainOptions& opt, const GlobalOptions& g, std::ostream& out) {
  TrainConfig train;
  PipelineConfig pipeline;
  if (!opt.config.empty()) {
    const auto j = parse_json_file(opt.config, "training config");
    if (!j.is_object()) fail(Errc::format, "training config must be a JSON object");
    try {
      train.epochs = j.value("epochs", train.epochs);
      train.learning_rate = j.value("learning_rate", train.learning_rate);
      train.seed = j.value("seed", train.seed);
      pipeline.chroma_sigma = j.value("chroma_sigma", pipeline.chroma_sigma);
      if (j.contains("spectral")) {
        const auto m = parse_scf_method(j.at("spectral").get<std::string>());
        if (!m) fail(Errc::invalid_argument, "unknown spectral method in training config");
        pipeline.fusion_scf = *m;
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::format, "invalid training config: " + std::string(e.what()));
    }
  }
  if (g.seed) train.seed = *g.seed;

  const auto entries = load_manifest(opt.manifest);
  if (entries.empty()) fail(Errc::invalid_argument, "manifest is empty");
  std::vector<eval::DatasetItem> items;
  for (const auto& e : entries) items.push_back(load_item(e));  // training needs every item
  const auto batches = fusion_training_batches(items, pipeline, eval::Connectivity::eight, g.threads);
  const auto model = train_logistic_fusion(batches, train);
  const double d05 = training_dice(model, batches);

  auto j = to_json(model);
  j["training_d_at_05"] = d05;
  j["training_batches"] = batches.size();
  j["chroma_sigma"] = pipeline.chroma_sigma;
  j["spectral"] = to_string(pipeline.fusion_scf);
  io::write_file_text(opt.out, j.dump(2) + "\n");
  out << "seed " << train.seed << "\nfinal loss " << model.final_loss << "\ntraining D@0.5 " << d05 << "\n";
  return kExitOk;
}

// ---- convert ------------------------------------------------------------

struct ConvertOptions {
  fs::path in;
  fs::path out;
  std::string interleave = "bsq";
};

/// Cubes (.hdr -> .hdr, any interleave), probability maps (SMAP <-> 16-bit
/// PNG) and label maps (LMAP <-> 8-bit PNG). Kind is taken from the input.
inline int cmd_convert(const ConvertOptions& opt, const GlobalOptions&, std::ostream& out) {
  const auto ext = opt.in.extension().string();
  if (ext == ".hdr") {
    io::save_cube(io::load_cube(opt.in), opt.out, io::parse_interleave(opt.interleave));
    out << "cube -> " << opt.out.string() << "\n";
    return kExitOk;
  }
  const auto bytes = io::read_file_bytes(opt.in);
  const bool png_in = png::has_signature(bytes);
  bool labels = false;
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "LMAP") labels = true;
  if (png_in) labels = png::decode(bytes).bit_depth == 8;
  if (labels) {
    io::save_labels(io::decode_labels(bytes), opt.out);
    out << "labels -> " << opt.out.string() << "\n";
  } else {
    const auto map = io::decode_probability_map(bytes);
    if (opt.out.extension() == ".png") io::write_file_bytes(opt.out, io::encode_map_png16(map));
    else io::save_probability_map(map, opt.out);
    out << "map -> " << opt.out.string() << "\n";
  }
  return kExitOk;
}

// ---- serve --------------------------------------------------------------

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string model;
  std::string static_dir;
  double idle_minutes = 30;
  double chroma_sigma = 25.0;
  /// Called once the socket is bound; tests use it to stop the server.
  std::function<void(service::Server&)> on_ready;
};

inline constexpr const char* kPortEnv = "HSISEG_PORT";

inline int cmd_serve(ServeOptions opt, const GlobalOptions& g, std::ostream& out) {
  if (const char* env = std::getenv(kPortEnv); env && *env) {
    try {
      opt.port = std::stoi(env);
    } catch (const std::exception&) {
      fail(Errc::invalid_argument, std::string(kPortEnv) + " is not a port number");
    }
  }
  if (opt.port < 0 || opt.port > 65535) fail(Errc::invalid_argument, "port must be in [0, 65535]");
  service::ServerOptions so;
  so.host = opt.host;
  so.port = opt.port;
  so.idle_timeout = std::chrono::seconds(static_cast<long long>(opt.idle_minutes * 60));
  so.pipeline.model = load_model(opt.model);
  so.pipeline.chroma_sigma = opt.chroma_sigma;
  so.pipeline.threads = g.threads;
  if (!opt.static_dir.empty()) so.static_dir = opt.static_dir;
  service::Server server(so);
  const int port = server.bind();
  out << "listening on http://" << opt.host << ":" << port << std::endl;
  if (opt.on_ready) {
    std::thread notify([&] {
      server.wait_until_ready();
      opt.on_ready(server);
    });
    server.run();
    notify.join();
  } else {
    server.run();
  }
  return kExitOk;
}

// ---- entry point --------------------------------------------------------

inline void configure_logging(const std::string& level) {
  static const auto logger = [] {
    auto l = spdlog::stderr_color_mt("hsiseg");
    spdlog::set_default_logger(l);
    return l;
  }();
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") fail(Errc::invalid_argument, "unknown log level '" + level + "'");
  logger->set_level(lvl);
}

/// Parses argv and runs one subcommand. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::function<void(service::Server&)> on_serve_ready = {}) {
  CLI::App app{"hsiseg: click-driven hyperspectral segmentation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hsiseg 1.0.0");
  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene from a JSON spec");
  s->add_option("spec", synth.spec, "Scene spec JSON")->required();
  s->add_option("-o,--out", synth.out_dir, "Output directory")->required();
  s->add_option("--name", synth.name, "File stem")->capture_default_str();

  SegmentOptions seg;
  auto* sg = app.add_subcommand("segment", "Compute one similarity map");
  sg->add_option("cube", seg.cube, "ENVI header")->required();
  sg->add_option("-c,--clicks", seg.clicks, "Clicks JSON")->required();
  sg->add_option("-m,--method", seg.method, "sa|sa_eq|pcc|pcc_eq|rgb|intersection|learned")->capture_default_str();
  sg->add_option("-o,--out", seg.out, "Output map (.smap or .png)")->required();
  sg->add_option("--rgb-map", seg.rgb_map, "External RGB-branch map");
  sg->add_option("--model", seg.model, "Fusion model JSON (for learned)");
  sg->add_option("--chroma-sigma", seg.chroma_sigma, "Colour stand-in width")->capture_default_str();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Run the click protocol over a manifest");
  e->add_option("manifest", ev.manifest, "Manifest JSON")->required();
  e->add_option("-m,--methods", ev.methods, "Comma-separated methods")->capture_default_str();
  e->add_option("-k,--clicks", ev.clicks, "Click budget")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_option("-o,--out", ev.out_dir, "Output directory")->required();
  e->add_option("--model", ev.model, "Fusion model JSON");
  e->add_option("--connectivity", ev.connectivity, "4 or 8")->capture_default_str();
  e->add_flag("--strict-dice", ev.strict_dice, "Score empty-vs-empty as 0");
  e->add_option("--sweep", ev.sweep, "auto|exact|binned")->capture_default_str();
  e->add_option("--chroma-sigma", ev.chroma_sigma, "Colour stand-in width")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train-fusion", "Fit the logistic fusion model");
  t->add_option("manifest", tr.manifest, "Manifest JSON")->required();
  t->add_option("--config", tr.config, "Training config JSON");
  t->add_option("-o,--out", tr.out, "Model JSON")->required();

  ServeOptions sv;
  auto* v = app.add_subcommand("serve", "Start the HTTP session service");
  v->add_option("--host", sv.host)->capture_default_str();
  v->add_option("-p,--port", sv.port, std::string("Port (0 = any; env ") + kPortEnv + " overrides)")
      ->capture_default_str();
  v->add_option("--model", sv.model, "Fusion model JSON (enables learned)");
  v->add_option("--static", sv.static_dir, "Directory served at /");
  v->add_option("--idle-minutes", sv.idle_minutes, "Session idle eviction")->capture_default_str();
  v->add_option("--chroma-sigma", sv.chroma_sigma)->capture_default_str();

  ConvertOptions cv;
  auto* c = app.add_subcommand("convert", "Convert cubes, maps and labels between formats");
  c->add_option("input", cv.in)->required();
  c->add_option("output", cv.out)->required();
  c->add_option("--interleave", cv.interleave, "bsq|bil|bip for cube output")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    std::ostringstream o, eo;
    const int code = app.exit(pe, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    configure_logging(g.log_level);
    if (*s) return cmd_synth(synth, g, out);
    if (*sg) return cmd_segment(seg, g, out);
    if (*e) return cmd_eval(ev, g, out);
    if (*t) return cmd_train_fusion(tr, g, out);
    if (*c) return cmd_convert(cv, g, out);
    if (*v) {
      sv.on_ready = std::move(on_serve_ready);
      return cmd_serve(sv, g, out);
    }
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hsiseg::cli
