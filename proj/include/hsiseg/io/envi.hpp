#pragma once

#include <hsiseg/io/bytes.hpp>
#include <hsiseg/io/file.hpp>
#include <hsiseg/io/png.hpp>
#include <hsiseg/types.hpp>

#include <cctype>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace hsiseg::io {

enum class Interleave { bsq, bil, bip };

inline std::string_view to_string(Interleave il) {
  switch (il) {
    case Interleave::bsq: return "bsq";
    case Interleave::bil: return "bil";
    case Interleave::bip: return "bip";
  }
  return "bsq";
}

inline Interleave parse_interleave(std::string_view text) {
  if (text == "bsq") return Interleave::bsq;
  if (text == "bil") return Interleave::bil;
  if (text == "bip") return Interleave::bip;
  fail(Errc::format, "unsupported interleave '" + std::string(text) + "'");
}

/// Parsed `key = value` pairs of an ENVI header. Keys are lower-cased and
/// whitespace-normalised; brace-delimited values may span lines and keep
/// their inner text without the braces.
class EnviHeader {
 public:
  static EnviHeader parse(std::string_view text) {
    EnviHeader header;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;  // "ENVI" magic line, blanks
      std::string key = normalise_key(line.substr(0, eq));
      std::string_view rest = trim(line.substr(eq + 1));
      std::string value;
      if (!rest.empty() && rest.front() == '{') {
        std::string collected(rest.substr(1));
        while (collected.find('}') == std::string::npos) {
          if (pos >= text.size()) fail(Errc::format, "unterminated '{' in header key '" + key + "'");
          eol = text.find('\n', pos);
          if (eol == std::string_view::npos) eol = text.size();
          collected += ' ';
          collected += text.substr(pos, eol - pos);
          pos = eol + 1;
        }
        value = std::string(trim(std::string_view(collected).substr(0, collected.find('}'))));
      } else {
        value = std::string(rest);
      }
      header.fields_[key] = value;
    }
    return header;
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) const {
    auto v = get(key);
    if (!v) fail(Errc::format, "header missing required field '" + key + "'");
    return *v;
  }

  std::size_t require_count(const std::string& key) const {
    const std::string v = require(key);
    std::size_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
      fail(Errc::format, "header field '" + key + "' is not a non-negative integer: '" + v + "'");
    return out;
  }

  std::vector<double> require_list(const std::string& key) const {
    const std::string v = require(key);
    std::vector<double> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
      auto t = trim(item);
      if (t.empty()) continue;
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
      if (ec != std::errc{} || ptr != t.data() + t.size())
        fail(Errc::format, "header field '" + key + "' has a non-numeric entry '" + std::string(t) + "'");
      out.push_back(d);
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  static std::string normalise_key(std::string_view raw) {
    std::string key;
    bool space = false;
    for (char ch : trim(raw)) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        space = true;
        continue;
      }
      if (space && !key.empty()) key += ' ';
      space = false;
      key += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return key;
  }

  std::map<std::string, std::string> fields_;
};

/// Binary file paired with a header: same stem, first existing of
/// .img, .raw, .bin or no extension.
inline std::filesystem::path find_cube_data(const std::filesystem::path& header_path) {
  for (const char* ext : {".img", ".raw", ".bin", ""}) {
    auto candidate = header_path;
    candidate.replace_extension(ext);
    if (candidate != header_path && std::filesystem::is_regular_file(candidate)) return candidate;
  }
  fail(Errc::not_found, "no binary file found next to header " + header_path.string());
}

inline constexpr int kEnviFloat32 = 4;
inline constexpr int kEnviUint16 = 12;

/// Loads an ENVI float32 (type 4) or uint16 (type 12) little-endian cube in
/// any interleave and converts it to the internal BIP layout. uint16 samples
/// are divided by `reflectance scale factor` when present, else 65535.
inline HyperCube load_cube(const std::filesystem::path& header_path) {
  if (!std::filesystem::is_regular_file(header_path))
    fail(Errc::not_found, "header not found: " + header_path.string());
  const auto header_bytes = read_file_bytes(header_path);
  const auto header = EnviHeader::parse(
      std::string_view(reinterpret_cast<const char*>(header_bytes.data()), header_bytes.size()));

  const std::size_t samples = header.require_count("samples");
  const std::size_t lines = header.require_count("lines");
  const std::size_t bands = header.require_count("bands");
  const std::size_t data_type = header.require_count("data type");
  const Interleave interleave = parse_interleave(header.require("interleave"));
  if (header.require_count("byte order") != 0)
    fail(Errc::format, "only little-endian (byte order = 0) cubes are supported");
  const std::size_t offset = header.get("header offset") ? header.require_count("header offset") : 0;
  auto wavelengths = header.require_list("wavelength");
  if (samples == 0 || lines == 0 || bands == 0) fail(Errc::format, "cube has a zero dimension");
  if (wavelengths.size() != bands)
    fail(Errc::format, "wavelength count mismatch: " + std::to_string(wavelengths.size()) +
                           " wavelengths for " + std::to_string(bands) + " bands");

  std::size_t sample_size = 0;
  if (data_type == kEnviFloat32) sample_size = 4;
  else if (data_type == kEnviUint16) sample_size = 2;
  else fail(Errc::format, "unsupported data type " + std::to_string(data_type));

  double u16_scale = 65535.0;
  if (data_type == kEnviUint16 && header.get("reflectance scale factor")) {
    auto f = header.require_list("reflectance scale factor");
    if (f.size() != 1 || !(f[0] > 0.0)) fail(Errc::format, "invalid reflectance scale factor");
    u16_scale = f[0];
  }

  const auto data_path = find_cube_data(header_path);
  const auto raw = read_file_bytes(data_path);
  const std::size_t n = samples * lines * bands;
  if (raw.size() != offset + n * sample_size)
    fail(Errc::dimension_mismatch, "binary size " + std::to_string(raw.size()) + " does not match " +
                                       std::to_string(lines) + "x" + std::to_string(samples) + "x" +
                                       std::to_string(bands) + " header");

  std::vector<float> bip(n);
  const std::uint8_t* base = raw.data() + offset;
  for (std::size_t r = 0; r < lines; ++r) {
    for (std::size_t c = 0; c < samples; ++c) {
      for (std::size_t b = 0; b < bands; ++b) {
        std::size_t src = 0;
        switch (interleave) {
          case Interleave::bsq: src = (b * lines + r) * samples + c; break;
          case Interleave::bil: src = (r * bands + b) * samples + c; break;
          case Interleave::bip: src = (r * samples + c) * bands + b; break;
        }
        float v;
        if (data_type == kEnviFloat32) v = bytes::read_le<float>(base + src * 4);
        else v = static_cast<float>(bytes::read_le<std::uint16_t>(base + src * 2) / u16_scale);
        bip[(r * samples + c) * bands + b] = v;
      }
    }
  }
  return HyperCube(lines, samples, bands, std::move(wavelengths), std::move(bip));
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Writes `<stem>.hdr` + `<stem>.img` as float32 little-endian. The header path
/// may be given with or without the .hdr extension.
inline void save_cube(const HyperCube& cube, const std::filesystem::path& path,
                      Interleave interleave = Interleave::bsq,
                      const std::string& description = "hsiseg cube") {
  auto header_path = path;
  header_path.replace_extension(".hdr");
  auto data_path = path;
  data_path.replace_extension(".img");

  std::ostringstream hdr;
  hdr << "ENVI\n"
      << "description = {" << description << "}\n"
      << "samples = " << cube.width() << "\n"
      << "lines = " << cube.height() << "\n"
      << "bands = " << cube.bands() << "\n"
      << "header offset = 0\n"
      << "file type = ENVI Standard\n"
      << "data type = " << kEnviFloat32 << "\n"
      << "interleave = " << to_string(interleave) << "\n"
      << "byte order = 0\n"
      << "wavelength units = Nanometers\n"
      << "wavelength = {";
  for (std::size_t b = 0; b < cube.bands(); ++b)
    hdr << (b ? ", " : "") << format_double(cube.wavelengths()[b]);
  hdr << "}\n";

  const std::size_t H = cube.height(), W = cube.width(), C = cube.bands();
  std::vector<std::uint8_t> raw;
  raw.reserve(H * W * C * 4);
  auto emit = [&](std::size_t r, std::size_t c, std::size_t b) {
    bytes::append_le<float>(raw, cube.data()[(r * W + c) * C + b]);
  };
  switch (interleave) {
    case Interleave::bsq:
      for (std::size_t b = 0; b < C; ++b)
        for (std::size_t r = 0; r < H; ++r)
          for (std::size_t c = 0; c < W; ++c) emit(r, c, b);
      break;
    case Interleave::bil:
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t b = 0; b < C; ++b)
          for (std::size_t c = 0; c < W; ++c) emit(r, c, b);
      break;
    case Interleave::bip:
      for (std::size_t r = 0; r < H; ++r)
        for (std::size_t c = 0; c < W; ++c)
          for (std::size_t b = 0; b < C; ++b) emit(r, c, b);
      break;
  }
  const std::string text = hdr.str();
  write_file_text(header_path, text);
  write_file_bytes(data_path, raw);
}

}  // namespace hsiseg::io
