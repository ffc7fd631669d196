#pragma once

#include <hsiseg/error.hpp>

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace hsiseg::png {

/// Decoded or to-be-encoded PNG raster. Samples are stored one per channel per
/// pixel, row-major, at their native range (0..2^bit_depth - 1).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  int channels = 1;   // 1 = gray, 3 = RGB
  int bit_depth = 8;  // 1, 8 or 16
  std::vector<std::uint16_t> samples;
};

namespace detail {

struct ErrorSink {
  char message[256] = {};
};

inline void on_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  if (sink) std::strncpy(sink->message, msg, sizeof(sink->message) - 1);
  png_longjmp(png, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

inline void read_fn(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) png_error(png, "truncated PNG data");
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

inline void write_fn(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void flush_fn(png_structp) {}

}  // namespace detail

inline bool has_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline std::vector<std::uint8_t> encode(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    fail(Errc::invalid_argument, "PNG encoder supports 1 or 3 channels");
  if (image.bit_depth != 1 && image.bit_depth != 8 && image.bit_depth != 16)
    fail(Errc::invalid_argument, "PNG encoder supports bit depths 1, 8 and 16");
  if (image.bit_depth == 1 && image.channels != 1)
    fail(Errc::invalid_argument, "1-bit PNG must be grayscale");
  if (image.samples.size() != image.width * image.height * static_cast<std::size_t>(image.channels))
    fail(Errc::dimension_mismatch, "PNG sample count does not match dimensions");
  if (image.width == 0 || image.height == 0) fail(Errc::invalid_argument, "empty PNG image");

  // Pack rows up front so nothing is allocated between setjmp and longjmp.
  const std::size_t row_samples = image.width * static_cast<std::size_t>(image.channels);
  std::size_t row_bytes = 0;
  if (image.bit_depth == 1) row_bytes = (image.width + 7) / 8;
  else if (image.bit_depth == 8) row_bytes = row_samples;
  else row_bytes = row_samples * 2;
  std::vector<std::uint8_t> packed(row_bytes * image.height, 0);
  for (std::size_t y = 0; y < image.height; ++y) {
    std::uint8_t* row = packed.data() + y * row_bytes;
    const std::uint16_t* src = image.samples.data() + y * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      if (image.bit_depth == 1) {
        if (src[i]) row[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
      } else if (image.bit_depth == 8) {
        row[i] = static_cast<std::uint8_t>(src[i]);
      } else {
        row[2 * i] = static_cast<std::uint8_t>(src[i] >> 8);
        row[2 * i + 1] = static_cast<std::uint8_t>(src[i] & 0xff);
      }
    }
  }
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) rows[y] = packed.data() + y * row_bytes;

  std::vector<std::uint8_t> out;
  out.reserve(packed.size() / 2 + 64);
  detail::ErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, detail::on_error,
                                            detail::on_warning);
  if (!png) fail(Errc::io, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(Errc::io, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::io, std::string("PNG encode failed: ") + sink.message);
  }
  png_set_write_fn(png, &out, detail::write_fn, detail::flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), image.bit_depth,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline Image decode(std::span<const std::uint8_t> bytes) {
  if (!has_signature(bytes)) fail(Errc::format, "not a PNG file");
  Image image;
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;
  detail::ReadCursor cursor{bytes, 0};
  detail::ErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, detail::on_error,
                                           detail::on_warning);
  if (!png) fail(Errc::io, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(Errc::io, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::format, std::string("PNG decode failed: ") + sink.message);
  }
  png_set_read_fn(png, &cursor, detail::read_fn);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (depth < 8) png_set_packing(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const std::size_t width = png_get_image_width(png, info);
  const std::size_t height = png_get_image_height(png, info);
  const int out_channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  pixels.resize(row_bytes * height);
  rows.resize(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  image.width = width;
  image.height = height;
  image.channels = out_channels;
  image.bit_depth = depth < 8 ? depth : out_depth;
  image.samples.resize(width * height * static_cast<std::size_t>(out_channels));
  const std::size_t row_samples = width * static_cast<std::size_t>(out_channels);
  for (std::size_t y = 0; y < height; ++y) {
    const std::uint8_t* row = pixels.data() + y * row_bytes;
    for (std::size_t i = 0; i < row_samples; ++i) {
      image.samples[y * row_samples + i] =
          out_depth == 16 ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                          : row[i];
    }
  }
  return image;
}

}  // namespace hsiseg::png
