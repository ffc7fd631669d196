// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// hard criterion fails.

#include "../oracles.hpp"
#include "../test_util.hpp"

#include <hsiseg/cli/commands.hpp>
#include <hsiseg/eval/evaluate.hpp>
#include <hsiseg/synth.hpp>
#include <hsiseg/train.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>

using namespace hsiseg;
using hsiseg::testing::random_mask;
using hsiseg::testing::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

int failures = 0;

void criterion(const char* name, const std::function<Outcome()>& fn) {
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::vector<float> random_floats(std::size_t n, RandomStream& rng, double lo, double hi) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.uniform(lo, hi));
  return v;
}

// Narrow, well separated class bumps: raw SA thresholds sensibly at 0.5, so
// noise (multiplicative, per band) is the knob that controls 1-click quality.
SceneSpec separated_scene(std::uint64_t seed, double sigma) {
  SceneSpec spec;
  spec.bands = 32;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  spec.shading = {0.5, 1.2, 24.0};
  spec.unlabeled_border = 2;
  RandomStream rng(seed, "acceptance.prototypes");
  for (int k = 0; k < 4; ++k) {
    SceneClass c;
    c.region_seeds = 2;
    c.prototype.baseline = 0.02;
    c.prototype.centers_nm = {500.0 + 125.0 * k + rng.uniform(-15.0, 15.0)};
    c.prototype.widths_nm = {rng.uniform(35.0, 50.0)};
    c.prototype.amplitudes = {rng.uniform(0.4, 0.7)};
    spec.classes.push_back(std::move(c));
  }
  return spec;
}

constexpr double kMultiClickSigma = 0.7;

std::vector<eval::DatasetItem> scenes(std::uint64_t first_seed, int n, const std::function<SceneSpec(std::uint64_t)>& make) {
  std::vector<eval::DatasetItem> items;
  for (int i = 0; i < n; ++i) {
    auto [cube, labels] = generate_scene(make(first_seed + std::uint64_t(i)));
    items.push_back({"scene" + std::to_string(i), std::move(cube), std::move(labels), {}});
  }
  return items;
}

// ---------------------------------------------------------------------------

Outcome sa_scale_invariance() {
  const auto t0 = Clock::now();
  RandomStream rng(1, "acceptance.sa_scale");
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 8 + rng.below(249);
    std::vector<double> s(n), t(n), ts(n);
    for (std::size_t b = 0; b < n; ++b) {
      s[b] = rng.uniform(0.0, 1.0);
      t[b] = rng.uniform(0.0, 1.0);
    }
    const double c = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (std::size_t b = 0; b < n; ++b) ts[b] = c * t[b];
    worst = std::max(worst, std::abs(sa_similarity(s, t) - sa_similarity(s, ts)));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 1.0, fmt("1000 pairs, max |diff| %.3g (< 1e-6), %.3f s (< 1 s)", worst, secs)};
}

Outcome shading_invariance() {
  const auto t0 = Clock::now();
  auto spec = standard_scene_spec(11, 4, 64, 32, 0.02);
  spec.shading = {1.0, 1.0, 16.0};
  const auto [flat, labels] = generate_scene(spec);
  RandomStream rng(12, "acceptance.shading");
  const auto field = smooth_field(64, 64, Shading{0.2, 1.5, 16.0}, rng);
  const auto shaded = apply_shading(flat, field);

  const ClickSet clicks{eval::place_first_click(labels, 0)};
  const auto a = scf_map(flat, clicks, ScfMethod::SA);
  const auto b = scf_map(shaded, clicks, ScfMethod::SA);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, double(std::abs(a[i] - b[i])));

  eval::EvalConfig cfg;
  cfg.methods = {Method::sa};
  cfg.sweep.mode = eval::SweepMode::exact;
  const std::vector<eval::DatasetItem> one{{"flat", flat, labels, {}}}, two{{"shaded", shaded, labels, {}}};
  const auto ra = eval::evaluate(one, cfg), rb = eval::evaluate(two, cfg);
  bool same = ra.per_class.size() == rb.per_class.size();
  std::size_t compared = 0;
  for (std::size_t i = 0; same && i < ra.per_class.size(); ++i) {
    same = std::llround(ra.per_class[i].d_at_max * 1e6) == std::llround(rb.per_class[i].d_at_max * 1e6);
    ++compared;
  }
  const double secs = seconds_since(t0);
  return {diff < 1e-5 && same && secs < 5.0,
          fmt("field [0.2,1.5], SA map max diff %.3g (< 1e-5), %zu per-class D@Max %s to 6 decimals, %.2f s (< 5 s)",
              diff, compared, same ? "equal" : "DIFFER", secs)};
}

Outcome pcc_oracle() {
  RandomStream rng(2, "acceptance.pcc");
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 8 + rng.below(249);
    std::vector<double> s(n), t(n);
    for (std::size_t b = 0; b < n; ++b) {
      s[b] = rng.uniform(0.0, 1.0);
      t[b] = 0.3 * s[b] + rng.uniform(0.0, 1.0);
    }
    // Naive two-pass correlation.
    double ms = 0, mt = 0;
    for (std::size_t b = 0; b < n; ++b) ms += s[b], mt += t[b];
    ms /= double(n);
    mt /= double(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t b = 0; b < n; ++b) {
      sxy += (s[b] - ms) * (t[b] - mt);
      sxx += (s[b] - ms) * (s[b] - ms);
      syy += (t[b] - mt) * (t[b] - mt);
    }
    const double want = (sxy / std::sqrt(sxx * syy) + 1.0) / 2.0;
    worst = std::max(worst, std::abs(pcc_similarity(s, t) - want));
  }
  return {worst < 1e-6, fmt("1000 pairs, max |diff| %.3g (< 1e-6)", worst)};
}

Outcome equalization_dmax() {
  eval::EvalConfig cfg;
  cfg.methods = {Method::sa, Method::sa_eq};
  cfg.sweep.mode = eval::SweepMode::exact;
  cfg.click_budget = 3;
  const auto items = scenes(100, 20, [](std::uint64_t s) { return standard_scene_spec(s); });
  const auto report = eval::evaluate(items, cfg);
  std::size_t compared = 0, mismatched = 0, d05_differs = 0;
  for (const auto& r : report.per_image) {
    if (r.method != Method::sa) continue;
    for (const auto& q : report.per_image) {
      if (q.method != Method::sa_eq || q.image_index != r.image_index || q.cls != r.cls) continue;
      for (std::size_t k = 0; k < r.per_click.size(); ++k) {
        ++compared;
        if (r.per_click[k].d_at_max != q.per_click[k].d_at_max) ++mismatched;
        if (r.per_click[k].d_at_05 != q.per_click[k].d_at_05) ++d05_differs;
      }
    }
  }
  const auto* m_sa = report.find_macro(Method::sa, 1);
  const auto* m_eq = report.find_macro(Method::sa_eq, 1);
  return {compared > 0 && mismatched == 0 && d05_differs > 0,
          fmt("20 scenes, %zu image/class/click cases: D@Max mismatches %zu (need 0); D@0.5 differs in %zu; "
              "macro 1-click D@0.5 sa %.4f vs sa_eq %.4f",
              compared, mismatched, d05_differs, m_sa->d_at_05, m_eq->d_at_05)};
}

bool same_partition(const std::vector<std::uint32_t>& a, const std::vector<long>& b) {
  std::map<std::uint32_t, long> ab;
  std::map<long, std::uint32_t> ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == 0) != (b[i] < 0)) return false;
    if (a[i] == 0) continue;
    auto [x, i1] = ab.emplace(a[i], b[i]);
    auto [y, i2] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  constexpr int kN = 10000;
  RandomStream rng(3, "acceptance.metrics");
  std::size_t bad_dice = 0, bad_thr = 0, bad_max = 0, bad_cc = 0, bad_dt = 0, bad_click = 0;
  for (int t = 0; t < kN; ++t) {
    const std::size_t H = 1 + rng.below(16), W = 1 + rng.below(16);
    const double density = rng.uniform(0.05, 0.95);

    // dice
    const auto a = random_mask(H, W, density, rng), b = random_mask(H, W, rng.uniform(0.05, 0.95), rng);
    std::vector<bool> va(a.size()), vb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) va[i] = a[i], vb[i] = b[i];
    if (std::abs(eval::dice(a, b) - oracle::dice(va, vb)) > 1e-12) ++bad_dice;

    // d_at_threshold and d_at_max on quantized maps so ties occur
    std::vector<float> v(H * W);
    const int levels = 2 + int(rng.below(20));
    for (auto& x : v) x = float(std::floor(rng.uniform() * levels) / levels);
    const SimilarityMap map(H, W, v);
    const auto valid = random_mask(H, W, 0.8, rng);
    const double thr = rng.uniform();
    if (std::abs(eval::d_at_threshold(map, a, valid, thr) - oracle::dice_at(map, a, valid, thr)) > 1e-12) ++bad_thr;
    if (std::abs(eval::d_at_threshold(map, a, valid, 0.5) - oracle::dice_at(map, a, valid, 0.5)) > 1e-12) ++bad_thr;
    eval::SweepOptions exact;
    exact.mode = eval::SweepMode::exact;
    bool any_gt = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_gt = any_gt || (a[i] && valid[i]);
    if (!any_gt) {
      // Undefined without a labeled foreground pixel; must be rejected.
      bool threw = false;
      try {
        eval::d_at_max(map, a, valid, exact);
      } catch (const Error&) {
        threw = true;
      }
      if (!threw) ++bad_max;
    } else {
      const auto got = eval::d_at_max(map, a, valid, exact);
      const auto want = oracle::max_dice(map, a, valid);
      if (std::abs(got.score - want.score) > 1e-12 || got.threshold != want.threshold) ++bad_max;
    }

    // connected components, both connectivities
    for (bool eight : {false, true})
      if (!same_partition(eval::connected_components(a, eight ? eval::Connectivity::eight : eval::Connectivity::four).labels,
                          oracle::components(a, eight)))
        ++bad_cc;

    // distance transform
    const auto dt = eval::distance_transform(a);
    const auto dw = oracle::distance(a);
    for (std::size_t i = 0; i < dt.size(); ++i)
      if (std::abs(dt[i] - dw[i]) > 1e-12) {
        ++bad_dt;
        break;
      }

    // first click on a random label map with unlabeled pixels
    const std::size_t classes = 1 + rng.below(3);
    std::vector<std::uint8_t> lab(H * W);
    for (auto& l : lab) l = rng.uniform() < 0.15 ? kUnlabeled : std::uint8_t(rng.below(classes));
    const LabelMap labels(H, W, classes, lab);
    const std::uint8_t cls = std::uint8_t(rng.below(classes));
    const auto cm = class_mask(labels, cls);
    const std::size_t centre = oracle::center(cm);
    if (centre == cm.size()) {
      bool threw = false;
      try {
        eval::place_first_click(labels, cls);
      } catch (const Error&) {
        threw = true;
      }
      if (!threw) ++bad_click;
    } else {
      const auto c = eval::place_first_click(labels, cls);
      if (c.row * W + c.col != centre) ++bad_click;
    }
  }
  const std::size_t bad = bad_dice + bad_thr + bad_max + bad_cc + bad_dt + bad_click;
  return {bad == 0, fmt("%d instances up to 16x16; mismatches dice %zu, d_at_threshold %zu, d_at_max %zu, "
                        "components %zu, distance %zu, first_click %zu; %.1f s",
                        kN, bad_dice, bad_thr, bad_max, bad_cc, bad_dt, bad_click, seconds_since(t0))};
}

Outcome gradient_check() {
  RandomStream rng(4, "acceptance.grad");
  double worst = 0.0;
  std::size_t masked_changes = 0, checked = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(200);
    // A third of instances have sparse masks, some with a single labeled pixel.
    const double density = t % 3 == 0 ? 0.05 : rng.uniform(0.3, 1.0);
    std::vector<double> p(n);
    std::vector<std::uint8_t> g(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.uniform(0.02, 0.98);
      g[i] = rng.uniform() < 0.4;
      m[i] = rng.uniform() < density;
    }
    if (std::count(m.begin(), m.end(), 1) == 0) m[rng.below(n)] = 1;
    const auto res = dice_ce_loss(p, g, m);
    const double h = 1e-5;
    for (std::size_t i = 0; i < n; ++i) {
      auto up = p, dn = p;
      up[i] += h;
      dn[i] -= h;
      const double lu = dice_ce_loss(up, g, m).loss, ld = dice_ce_loss(dn, g, m).loss;
      if (!m[i]) {
        if (lu != res.loss || ld != res.loss || res.grad[i] != 0.0) ++masked_changes;
        continue;
      }
      const double fd = (lu - ld) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(res.grad[i]), 1e-8});
      worst = std::max(worst, std::abs(res.grad[i] - fd) / scale);
      ++checked;
    }
  }
  return {worst < 1e-4 && masked_changes == 0,
          fmt("100 instances, %zu labeled coordinates: max relative error %.3g (< 1e-4); masked perturbations "
              "changing the loss: %zu (need 0)",
              checked, worst, masked_changes)};
}

Outcome fusion_dominance() {
  const auto t0 = Clock::now();
  const auto make = [](std::uint64_t s) { return separated_scene(s, kMultiClickSigma); };
  const auto train = scenes(2000, 10, make);
  const auto test = scenes(3000, 5, make);
  PipelineConfig pipeline;
  const auto batches = fusion_training_batches(train, pipeline);
  TrainConfig tc;
  tc.epochs = 3000;
  tc.seed = 1;
  pipeline.model = train_logistic_fusion(batches, tc);

  eval::EvalConfig cfg;
  cfg.methods = {Method::rgb, Method::sa_eq, Method::sa, Method::learned};
  cfg.click_budget = 1;
  cfg.pipeline = pipeline;
  const auto tr = eval::evaluate(train, cfg);
  const auto te = eval::evaluate(test, cfg);
  auto d05 = [](const eval::EvalReport& r, Method m) { return r.find_macro(m, 1)->d_at_05; };
  const double rgb = d05(te, Method::rgb), eq = d05(te, Method::sa_eq), sa = d05(te, Method::sa);
  const double fused = d05(te, Method::learned);
  const double best = std::max({rgb, eq, sa});
  const bool imperfect = d05(tr, Method::rgb) < 1.0 && d05(tr, Method::sa_eq) < 1.0 && d05(tr, Method::sa) < 1.0;
  const double secs = seconds_since(t0);
  return {imperfect && fused >= best - 0.02 && secs < 60.0,
          fmt("held-out macro D@0.5: fused %.4f vs rgb %.4f, sa_eq %.4f, sa %.4f (need >= %.4f); branches imperfect "
              "on training: %s; %.1f s (< 60 s)",
              fused, rgb, eq, sa, best - 0.02, imperfect ? "yes" : "no", secs)};
}

Outcome multi_click() {
  const auto items = scenes(2000, 10, [](std::uint64_t s) { return separated_scene(s, kMultiClickSigma); });
  eval::EvalConfig cfg;
  cfg.methods = {Method::sa};
  cfg.click_budget = 5;
  const auto report = eval::evaluate(items, cfg);
  const double one = report.find_macro(Method::sa, 1)->d_at_05;
  const double five = report.find_macro(Method::sa, 5)->d_at_05;

  // Replay every click sequence; adding a click must never lower any pixel.
  std::size_t steps = 0, violations = 0;
  for (const auto& r : report.per_image) {
    const auto& cube = items[r.image_index].cube;
    ClickSet clicks;
    std::optional<SimilarityMap> prev;
    for (const auto& step : r.per_click) {
      if (step.duplicate) continue;
      clicks.add(step.click);
      auto map = scf_map(cube, clicks, ScfMethod::SA);
      if (prev) {
        ++steps;
        for (std::size_t i = 0; i < map.size(); ++i)
          if (map[i] < (*prev)[i]) {
            ++violations;
            break;
          }
      }
      prev = std::move(map);
    }
  }
  const bool calibrated = one >= 0.6 && one <= 0.9;
  return {calibrated && five >= one && violations == 0 && steps > 0,
          fmt("noise sigma %.2f: macro SA D@0.5 1-click %.4f (in [0.6, 0.9]: %s), 5-click %.4f; %zu click additions, "
              "%zu pointwise decreases (need 0)",
              kMultiClickSigma, one, calibrated ? "yes" : "no", five, steps, violations)};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hsiseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(int(argv.size()), argv.data(), out, err);
}

Outcome determinism() {
  TempDir dir("hsiseg_acceptance");
  nlohmann::json manifest = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    const auto spec_path = dir / ("spec" + std::to_string(i) + ".json");
    io::write_file_text(spec_path, to_json(standard_scene_spec(40 + i, 3, 48, 24, 0.05)).dump());
    const auto name = "scene" + std::to_string(i);
    if (cli({"synth", spec_path.string(), "-o", dir.path().string(), "--name", name}) != 0)
      return {false, "synth failed"};
    manifest.push_back({{"cube", name + ".hdr"}, {"labels", name + "_labels.png"}});
  }
  io::write_file_text(dir / "manifest.json", manifest.dump());
  const auto m = (dir / "manifest.json").string();
  const std::string methods = "sa,sa_eq,pcc,pcc_eq,rgb,intersection";
  int rc = cli({"--seed", "5", "--threads", "1", "eval", m, "-m", methods, "-o", (dir / "a").string()});
  rc |= cli({"--seed", "5", "--threads", "1", "eval", m, "-m", methods, "-o", (dir / "b").string()});
  rc |= cli({"--seed", "5", "--threads", "4", "eval", m, "-m", methods, "-o", (dir / "c").string()});
  if (rc != 0) return {false, "eval exited non-zero"};
  bool same = true;
  for (const char* f : {"report.csv", "report.json"}) {
    const auto a = io::read_file_text(dir / "a" / f);
    same = same && a == io::read_file_text(dir / "b" / f) && a == io::read_file_text(dir / "c" / f);
  }
  return {same, fmt("eval twice with seed 5 and once with --threads 4: CSV and JSON %s",
                    same ? "byte-identical" : "DIFFER")};
}

Outcome performance() {
  RandomStream rng(6, "acceptance.perf");
  const std::size_t H = 512, W = 512, C = 128;
  const HyperCube cube(H, W, C, hsiseg::testing::linear_wavelengths(C), random_floats(H * W * C, rng, 0.01, 1.0));
  const ClickSet clicks{Click{256, 256, Polarity::positive}};
  auto time_it = [&](unsigned threads) {
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      const auto map = scf_map(cube, clicks, ScfMethod::SA, ScfOptions{threads});
      best = std::min(best, seconds_since(t0));
      if (map[256 * W + 256] < 0.999999f) best = 1e9;
    }
    return best;
  };
  const double one = time_it(1);
  const double eight = time_it(8);
  const unsigned hw = std::thread::hardware_concurrency();
  // The multi-thread speedup is a soft target: reported, never failed.
  return {one <= 2.0, fmt("512x512x128 SA map %.3f s single-threaded (<= 2 s); 8 threads %.3f s, speedup %.2fx "
                          "(soft target 3x; %u hardware threads here)",
                          one, eight, one / eight, hw)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  criterion("sa-scale-invariance", sa_scale_invariance);
  criterion("shading-invariance", shading_invariance);
  criterion("pcc-oracle", pcc_oracle);
  criterion("equalization-dmax-invariance", equalization_dmax);
  criterion("metric-oracles", metric_oracles);
  criterion("loss-gradient", gradient_check);
  criterion("fusion-dominance", fusion_dominance);
  criterion("multi-click-improvement", multi_click);
  criterion("determinism", determinism);
  criterion("performance", performance);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
