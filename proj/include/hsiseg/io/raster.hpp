#pragma once

#include <hsiseg/io/bytes.hpp>
#include <hsiseg/io/file.hpp>
#include <hsiseg/io/png.hpp>
#include <hsiseg/types.hpp>

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

// Raw raster container shared by probability maps ("SMAP", float32 payload)
// and label maps ("LMAP", u8 payload):
//   bytes 0..3   magic
//   bytes 4..7   u32 height   (little-endian)
//   bytes 8..11  u32 width
//   bytes 12..15 u32 reserved (written as 0)
//   payload      height*width samples, row-major, little-endian

namespace hsiseg::io {

inline constexpr std::size_t kRasterHeaderSize = 16;
inline constexpr std::uint64_t kMaxRasterPixels = std::uint64_t{1} << 32;

namespace detail {

struct RasterHeader {
  std::size_t height = 0;
  std::size_t width = 0;
};

inline RasterHeader parse_raster_header(std::span<const std::uint8_t> bytes,
                                        std::string_view magic, std::size_t sample_size) {
  if (bytes.size() < kRasterHeaderSize) fail(Errc::format, "raster shorter than its 16-byte header");
  if (std::memcmp(bytes.data(), magic.data(), 4) != 0)
    fail(Errc::format, "magic mismatch: expected " + std::string(magic));
  const auto h = bytes::read_le<std::uint32_t>(bytes.data() + 4);
  const auto w = bytes::read_le<std::uint32_t>(bytes.data() + 8);
  if (h == 0 || w == 0) fail(Errc::format, "raster has zero dimension");
  const std::uint64_t pixels = std::uint64_t{h} * std::uint64_t{w};
  if (pixels > kMaxRasterPixels) fail(Errc::format, "dimension overflow");
  if (bytes.size() - kRasterHeaderSize != pixels * sample_size)
    fail(Errc::format, "raster payload size does not match " + std::to_string(h) + "x" +
                           std::to_string(w) + " header");
  return {h, w};
}

inline std::vector<std::uint8_t> raster_header(std::string_view magic, std::size_t height,
                                               std::size_t width) {
  if (height > UINT32_MAX || width > UINT32_MAX) fail(Errc::format, "dimension overflow");
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(height));
  bytes::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(width));
  bytes::append_le<std::uint32_t>(out, 0);
  return out;
}

}  // namespace detail

/// 16-bit quantization used for every map transported as PNG.
inline std::uint16_t quantize16(float value) noexcept {
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(v * 65535.0));
}

/// Decodes an SMAP raster or a grayscale PNG (16-bit: v/65535, 8-bit: v/255).
/// Out-of-range values are clamped to [0,1]; non-finite values are rejected.
inline SimilarityMap decode_probability_map(std::span<const std::uint8_t> bytes,
                                            std::size_t* clamped = nullptr) {
  std::size_t clamp_count = 0;
  std::optional<SimilarityMap> result;
  if (png::has_signature(bytes)) {
    auto image = png::decode(bytes);
    if (image.channels != 1) fail(Errc::format, "probability PNG must be grayscale");
    const double scale = image.bit_depth == 16 ? 65535.0 : double((1 << image.bit_depth) - 1);
    std::vector<float> values(image.samples.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = static_cast<float>(image.samples[i] / scale);
    result.emplace(image.height, image.width, std::move(values));
  } else {
    const auto header = detail::parse_raster_header(bytes, "SMAP", sizeof(float));
    std::vector<float> values(header.height * header.width);
    const std::uint8_t* p = bytes.data() + kRasterHeaderSize;
    for (std::size_t i = 0; i < values.size(); ++i) {
      float v = bytes::read_le<float>(p + i * sizeof(float));
      if (!std::isfinite(v)) fail(Errc::numeric, "non-finite probability at index " + std::to_string(i));
      if (v < 0.0f || v > 1.0f) {
        v = std::clamp(v, 0.0f, 1.0f);
        ++clamp_count;
      }
      values[i] = v;
    }
    result.emplace(header.height, header.width, std::move(values));
  }
  if (clamp_count > 0) spdlog::warn("probability map: clamped {} out-of-range values", clamp_count);
  if (clamped) *clamped = clamp_count;
  return std::move(*result);
}

inline SimilarityMap load_probability_map(const std::filesystem::path& path,
                                          std::size_t* clamped = nullptr) {
  return decode_probability_map(read_file_bytes(path), clamped);
}

inline std::vector<std::uint8_t> encode_smap(const SimilarityMap& map) {
  auto out = detail::raster_header("SMAP", map.height(), map.width());
  out.reserve(out.size() + map.size() * sizeof(float));
  for (float v : map.data()) bytes::append_le<float>(out, v);
  return out;
}

inline void save_probability_map(const SimilarityMap& map, const std::filesystem::path& path) {
  write_file_bytes(path, encode_smap(map));
}

/// 16-bit grayscale PNG, sample = round(v * 65535).
inline std::vector<std::uint8_t> encode_map_png16(const SimilarityMap& map) {
  png::Image image{map.width(), map.height(), 1, 16, {}};
  image.samples.resize(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) image.samples[i] = quantize16(map[i]);
  return png::encode(image);
}

/// Decodes an 8-bit grayscale PNG or an LMAP raster. The class count is
/// max(non-sentinel value) + 1 unless `classes` overrides it.
inline LabelMap decode_labels(std::span<const std::uint8_t> bytes,
                              std::optional<std::size_t> classes = std::nullopt) {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> values;
  if (png::has_signature(bytes)) {
    auto image = png::decode(bytes);
    if (image.channels != 1 || image.bit_depth > 8)
      fail(Errc::format, "label PNG must be 8-bit (or lower) grayscale");
    height = image.height;
    width = image.width;
    values.assign(image.samples.begin(), image.samples.end());
  } else {
    const auto header = detail::parse_raster_header(bytes, "LMAP", 1);
    height = header.height;
    width = header.width;
    values.assign(bytes.begin() + kRasterHeaderSize, bytes.end());
  }
  std::size_t n = 0;
  for (auto v : values)
    if (v != kUnlabeled) n = std::max<std::size_t>(n, std::size_t{v} + 1);
  return LabelMap(height, width, classes.value_or(n), std::move(values));
}

inline LabelMap load_labels(const std::filesystem::path& path,
                            std::optional<std::size_t> classes = std::nullopt) {
  return decode_labels(read_file_bytes(path), classes);
}

inline std::vector<std::uint8_t> encode_lmap(const LabelMap& labels) {
  auto out = detail::raster_header("LMAP", labels.height(), labels.width());
  out.insert(out.end(), labels.data().begin(), labels.data().end());
  return out;
}

inline std::vector<std::uint8_t> encode_labels_png(const LabelMap& labels) {
  png::Image image{labels.width(), labels.height(), 1, 8, {}};
  image.samples.assign(labels.data().begin(), labels.data().end());
  return png::encode(image);
}

/// Writes PNG when the extension is ".png", LMAP otherwise.
inline void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
  if (path.extension() == ".png") write_file_bytes(path, encode_labels_png(labels));
  else write_file_bytes(path, encode_lmap(labels));
}

inline std::vector<std::uint8_t> encode_rgb_png(const RgbImage& rgb) {
  png::Image image{rgb.width(), rgb.height(), 3, 8, {}};
  image.samples.assign(rgb.data().begin(), rgb.data().end());
  return png::encode(image);
}

}  // namespace hsiseg::io
