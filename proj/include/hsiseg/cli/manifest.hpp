#pragma once

#include <hsiseg/eval/evaluate.hpp>
#include <hsiseg/io/envi.hpp>
#include <hsiseg/io/file.hpp>
#include <hsiseg/io/raster.hpp>

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hsiseg::cli {

// Manifest: JSON list of
//   {"name": "...", "cube": "x.hdr", "labels": "x_labels.png",
//    "rgb_map": "x_rgb.smap",                       (optional, every class)
//    "rgb_maps": {"0": ["c0_1click.smap", ...]}}    (optional, per class and click count)
// Relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string name;
  std::filesystem::path cube;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> rgb_map;
  std::map<std::uint8_t, std::vector<std::filesystem::path>> rgb_maps;
};

inline std::vector<ManifestEntry> parse_manifest(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_array()) fail(Errc::format, "manifest must be a JSON list");
  auto resolve = [&](const nlohmann::json& v, const char* what) {
    if (!v.is_string()) fail(Errc::format, std::string("manifest field '") + what + "' must be a path string");
    std::filesystem::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("cube"))
      fail(Errc::format, "manifest entry " + std::to_string(i) + " needs a 'cube' path");
    ManifestEntry entry;
    entry.cube = resolve(e.at("cube"), "cube");
    if (e.contains("labels")) entry.labels = resolve(e.at("labels"), "labels");
    entry.name = e.value("name", entry.cube.stem().string());
    if (e.contains("rgb_map")) entry.rgb_map = resolve(e.at("rgb_map"), "rgb_map");
    if (e.contains("rgb_maps")) {
      if (!e.at("rgb_maps").is_object()) fail(Errc::format, "'rgb_maps' must map class ids to path lists");
      for (const auto& [key, list] : e.at("rgb_maps").items()) {
        int cls = -1;
        try {
          cls = std::stoi(key);
        } catch (const std::exception&) {
        }
        if (cls < 0 || cls >= kUnlabeled) fail(Errc::format, "rgb_maps key '" + key + "' is not a class id");
        if (!list.is_array()) fail(Errc::format, "rgb_maps entries must be lists of paths");
        auto& paths = entry.rgb_maps[static_cast<std::uint8_t>(cls)];
        for (const auto& p : list) paths.push_back(resolve(p, "rgb_maps"));
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(nlohmann::json::parse(io::read_file_text(path)), path.parent_path());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, "invalid manifest JSON: " + std::string(e.what()));
  }
}

inline eval::DatasetItem load_item(const ManifestEntry& entry) {
  if (entry.labels.empty()) fail(Errc::not_found, "manifest entry '" + entry.name + "' has no labels");
  eval::DatasetItem item{entry.name, io::load_cube(entry.cube), io::load_labels(entry.labels), {}};
  if (entry.rgb_map) {
    const auto map = io::load_probability_map(*entry.rgb_map);
    for (std::size_t c = 0; c < item.labels.classes(); ++c) item.rgb_maps[static_cast<std::uint8_t>(c)] = {map};
  }
  for (const auto& [cls, paths] : entry.rgb_maps) {
    auto& maps = item.rgb_maps[cls];
    maps.clear();
    for (const auto& p : paths) maps.push_back(io::load_probability_map(p));
  }
  return item;
}

}  // namespace hsiseg::cli
