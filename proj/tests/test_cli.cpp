#include "test_util.hpp"

#include <hsiseg/cli/commands.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace hsiseg;
using hsiseg::testing::TempDir;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args, std::function<void(service::Server&)> on_ready = {}) {
  args.insert(args.begin(), "hsiseg");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(int(argv.size()), argv.data(), out, err, std::move(on_ready));
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) { return io::read_file_text(p); }

// Two classes with disjoint spectral support: SA between them is exactly 0.
json orthogonal_spec(std::uint64_t seed) {
  std::vector<double> a(16, 0.0), b(16, 0.0);
  for (int i = 0; i < 8; ++i) a[i] = 0.2 + 0.05 * i;
  for (int i = 8; i < 16; ++i) b[i] = 0.6 - 0.03 * i;
  return {{"height", 32},
          {"width", 32},
          {"bands", 16},
          {"wavelength_range", {450, 950}},
          {"classes", {{{"spectrum", a}, {"region_seeds", 2}}, {{"spectrum", b}, {"region_seeds", 2}}}},
          {"noise_sigma", 0.0},
          {"unlabeled_border", 1},
          {"seed", seed}};
}

std::filesystem::path orthogonal_manifest(const TempDir& dir, int scenes = 2) {
  json manifest = json::array();
  for (int i = 0; i < scenes; ++i) {
    const auto spec_path = dir / ("spec" + std::to_string(i) + ".json");
    io::write_file_text(spec_path, orthogonal_spec(100 + i).dump());
    const auto name = "s" + std::to_string(i);
    EXPECT_EQ(run_cli({"synth", spec_path.string(), "-o", (dir / "data").string(), "--name", name}).code, 0);
    manifest.push_back({{"cube", "data/" + name + ".hdr"}, {"labels", "data/" + name + "_labels.png"}});
  }
  io::write_file_text(dir / "manifest.json", manifest.dump());
  return dir / "manifest.json";
}

}  // namespace

TEST(CliSynth, WritesCubeAndLabelsDeterministically) {
  TempDir dir;
  io::write_file_text(dir / "spec.json", orthogonal_spec(5).dump());
  const auto r = run_cli({"synth", (dir / "spec.json").string(), "-o", (dir / "a").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("seed 5"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "scene.hdr"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "scene_labels.png"));
  ASSERT_EQ(run_cli({"synth", (dir / "spec.json").string(), "-o", (dir / "b").string()}).code, 0);
  for (const char* f : {"scene.hdr", "scene.img", "scene_labels.png"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  // --seed overrides the spec seed and is echoed.
  const auto c = run_cli({"--seed", "9", "synth", (dir / "spec.json").string(), "-o", (dir / "c").string()});
  EXPECT_NE(c.out.find("seed 9"), std::string::npos);
  EXPECT_NE(slurp(dir / "a" / "scene.img"), slurp(dir / "c" / "scene.img"));
  EXPECT_NE(slurp(dir / "c" / "scene.hdr").find("seed=9"), std::string::npos);
}

TEST(CliSynth, BadInputsExitTwo) {
  TempDir dir;
  io::write_file_text(dir / "bad.json", "{not json");
  const auto r = run_cli({"synth", (dir / "bad.json").string(), "-o", (dir / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_EQ(run_cli({"synth", (dir / "missing.json").string(), "-o", (dir / "x").string()}).code, 2);
  EXPECT_EQ(run_cli({"synth"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"--log-level", "loud", "synth", (dir / "bad.json").string(), "-o", "x"}).code, 2);
}

TEST(CliSegment, SelfSimilarityAndRoundTrip) {
  TempDir dir;
  io::write_file_text(dir / "spec.json", orthogonal_spec(6).dump());
  ASSERT_EQ(run_cli({"synth", (dir / "spec.json").string(), "-o", dir.path().string()}).code, 0);
  io::write_file_text(dir / "clicks.json", R"([{"row": 10, "col": 12}])");
  const auto r = run_cli({"segment", (dir / "scene.hdr").string(), "-c", (dir / "clicks.json").string(), "-m", "sa",
                          "-o", (dir / "map.smap").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto map = io::load_probability_map(dir / "map.smap");
  EXPECT_NEAR(map.at(10, 12), 1.0f, 1e-6f);
  const auto cube = io::load_cube(dir / "scene.hdr");
  EXPECT_EQ(map, scf_map(cube, {{10, 12, Polarity::positive}}, ScfMethod::SA));

  ASSERT_EQ(run_cli({"segment", (dir / "scene.hdr").string(), "-c", (dir / "clicks.json").string(), "-m",
                     "intersection", "-o", (dir / "map.png").string()})
                .code,
            0);
  EXPECT_EQ(io::load_probability_map(dir / "map.png").width(), 32u);

  EXPECT_EQ(run_cli({"segment", (dir / "scene.hdr").string(), "-c", (dir / "clicks.json").string(), "-m", "sid",
                     "-o", (dir / "x.smap").string()})
                .code,
            2);
  EXPECT_EQ(run_cli({"segment", (dir / "scene.hdr").string(), "-c", (dir / "clicks.json").string(), "-m",
                     "learned", "-o", (dir / "x.smap").string()})
                .code,
            2);
  io::write_file_text(dir / "far.json", R"([{"row": 99, "col": 0}])");
  EXPECT_EQ(run_cli({"segment", (dir / "scene.hdr").string(), "-c", (dir / "far.json").string(), "-o",
                     (dir / "x.smap").string()})
                .code,
            2);
}

TEST(CliEval, OrthogonalClassesAndDeterminism) {
  TempDir dir;
  const auto manifest = orthogonal_manifest(dir);
  const auto r = run_cli({"eval", manifest.string(), "-m", "sa,pcc_eq", "-k", "2", "-o", (dir / "r1").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir / "r1" / "report.json"));
  EXPECT_EQ(report["schema_version"], 1);
  EXPECT_EQ(report["config"]["seed"], 0);
  for (const auto& c : report["per_class"])
    if (c["method"] == "sa") EXPECT_EQ(c["d_at_max"].get<double>(), 1.0) << c.dump();

  ASSERT_EQ(run_cli({"eval", manifest.string(), "-m", "sa,pcc_eq", "-k", "2", "-o", (dir / "r2").string()}).code, 0);
  ASSERT_EQ(run_cli({"--threads", "3", "eval", manifest.string(), "-m", "sa,pcc_eq", "-k", "2", "-o",
                     (dir / "r3").string()})
                .code,
            0);
  EXPECT_EQ(slurp(dir / "r1" / "report.csv"), slurp(dir / "r2" / "report.csv"));
  EXPECT_EQ(slurp(dir / "r1" / "report.csv"), slurp(dir / "r3" / "report.csv"));
  EXPECT_EQ(slurp(dir / "r1" / "report.json"), slurp(dir / "r3" / "report.json"));
}

TEST(CliEval, ManifestProblems) {
  TempDir dir;
  io::write_file_text(dir / "empty.json", "[]");
  EXPECT_EQ(run_cli({"eval", (dir / "empty.json").string(), "-o", (dir / "o").string()}).code, 2);
  io::write_file_text(dir / "obj.json", "{}");
  EXPECT_EQ(run_cli({"eval", (dir / "obj.json").string(), "-o", (dir / "o").string()}).code, 2);

  // A missing item is skipped and reported; the rest is evaluated.
  orthogonal_manifest(dir, 1);
  auto m = json::parse(slurp(dir / "manifest.json"));
  m.push_back({{"name", "ghost"}, {"cube", "nope.hdr"}, {"labels", "nope.png"}});
  io::write_file_text(dir / "partial.json", m.dump());
  const auto r = run_cli({"eval", (dir / "partial.json").string(), "-m", "sa", "-k", "1", "-o", (dir / "p").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir / "p" / "report.json"));
  ASSERT_EQ(report["skipped"].size(), 1u);
  EXPECT_EQ(report["skipped"][0]["image"], "ghost");
  EXPECT_EQ(report["skipped"][0]["image_index"], 1);
  EXPECT_EQ(run_cli({"eval", (dir / "partial.json").string(), "-m", "bogus", "-o", (dir / "p").string()}).code, 2);
}

TEST(CliTrainFusion, SeparableDataAndReproducibility) {
  TempDir dir;
  const auto manifest = orthogonal_manifest(dir);
  const auto r = run_cli({"--seed", "4", "train-fusion", manifest.string(), "-o", (dir / "m1.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto model = json::parse(slurp(dir / "m1.json"));
  EXPECT_EQ(model["training_d_at_05"].get<double>(), 1.0);
  EXPECT_EQ(model["seed"], 4);
  ASSERT_EQ(run_cli({"--seed", "4", "train-fusion", manifest.string(), "-o", (dir / "m2.json").string()}).code, 0);
  EXPECT_EQ(slurp(dir / "m1.json"), slurp(dir / "m2.json"));

  io::write_file_text(dir / "cfg.json", R"({"epochs": 20, "learning_rate": 0.5, "seed": 2})");
  ASSERT_EQ(run_cli({"train-fusion", manifest.string(), "--config", (dir / "cfg.json").string(), "-o",
                     (dir / "m3.json").string()})
                .code,
            0);
  EXPECT_EQ(json::parse(slurp(dir / "m3.json"))["epochs"], 20);

  // The trained model drives the learned method.
  ASSERT_EQ(run_cli({"eval", manifest.string(), "-m", "learned", "-k", "1", "--model", (dir / "m1.json").string(),
                     "-o", (dir / "ev").string()})
                .code,
            0);

  auto m = json::parse(slurp(manifest));
  m[0].erase("labels");
  io::write_file_text(dir / "nolabels.json", m.dump());
  EXPECT_EQ(run_cli({"train-fusion", (dir / "nolabels.json").string(), "-o", (dir / "x.json").string()}).code, 2);
}

TEST(CliConvert, RoundTrips) {
  TempDir dir;
  RandomStream rng(7, "cli.convert");
  const auto cube = hsiseg::testing::random_cube(5, 6, 12, rng);
  io::save_cube(cube, dir / "c.hdr");
  ASSERT_EQ(run_cli({"convert", (dir / "c.hdr").string(), (dir / "bil.hdr").string(), "--interleave", "bil"}).code, 0);
  EXPECT_EQ(io::load_cube(dir / "bil.hdr"), cube);
  EXPECT_NE(slurp(dir / "bil.hdr").find("bil"), std::string::npos);

  std::vector<float> v(30);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = float(i) / 29.0f;
  const SimilarityMap map(5, 6, v);
  io::save_probability_map(map, dir / "m.smap");
  ASSERT_EQ(run_cli({"convert", (dir / "m.smap").string(), (dir / "m.png").string()}).code, 0);
  ASSERT_EQ(run_cli({"convert", (dir / "m.png").string(), (dir / "back.smap").string()}).code, 0);
  const auto back = io::load_probability_map(dir / "back.smap");
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(back[i], v[i], 0.5 / 65535.0 + 1e-7);

  const LabelMap labels(2, 3, 2, {0, 1, kUnlabeled, 1, 0, 0});
  io::save_labels(labels, dir / "l.png");
  ASSERT_EQ(run_cli({"convert", (dir / "l.png").string(), (dir / "l.lmap").string()}).code, 0);
  EXPECT_EQ(io::load_labels(dir / "l.lmap"), labels);
  EXPECT_EQ(run_cli({"convert", (dir / "none.smap").string(), (dir / "x.png").string()}).code, 2);
}

TEST(CliServe, HealthAndRgbThenStop) {
  TempDir dir;
  io::write_file_text(dir / "spec.json", orthogonal_spec(8).dump());
  ASSERT_EQ(run_cli({"synth", (dir / "spec.json").string(), "-o", dir.path().string()}).code, 0);
  std::string health;
  png::Image rgb;
  const auto r = run_cli({"serve", "--port", "0"}, [&](service::Server& server) {
    httplib::Client client("127.0.0.1", server.port());
    if (auto res = client.Get("/health")) health = res->body;
    auto created = client.Post("/sessions", json{{"cube_path", (dir / "scene.hdr").string()}}.dump(),
                               "application/json");
    if (created && created->status == 201) {
      const auto id = json::parse(created->body)["id"].get<std::string>();
      if (auto res = client.Get("/sessions/" + id + "/rgb"))
        rgb = png::decode(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
    }
    server.stop();
  });
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("listening on"), std::string::npos);
  EXPECT_EQ(json::parse(health)["status"], "ok");
  EXPECT_EQ(rgb.width, 32u);
  EXPECT_EQ(rgb.height, 32u);
}

TEST(CliServe, OccupiedPortAndEnvOverride) {
  service::Server holder(service::ServerOptions{.port = 0});
  const int port = holder.bind();
  const auto r = run_cli({"serve", "--port", std::to_string(port)});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(std::to_string(port)), std::string::npos);

  ::setenv(cli::kPortEnv, std::to_string(port).c_str(), 1);
  const auto env = run_cli({"serve", "--port", "0"});
  ::unsetenv(cli::kPortEnv);
  EXPECT_NE(env.code, 0);
  EXPECT_NE(env.err.find(std::to_string(port)), std::string::npos);
}
