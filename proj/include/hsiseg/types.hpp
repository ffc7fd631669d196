#pragma once

#include <hsiseg/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hsiseg {

/// H x W x C cube stored band-interleaved-by-pixel: the spectrum of pixel
/// (r, c) is the contiguous run data[(r * W + c) * C, +C).
class HyperCube {
 public:
  HyperCube(std::size_t height, std::size_t width, std::size_t bands,
            std::vector<double> wavelengths, std::vector<float> data)
      : height_(height), width_(width), bands_(bands),
        wavelengths_(std::move(wavelengths)), data_(std::move(data)) {
    if (height_ == 0 || width_ == 0)
      fail(Errc::invalid_argument, "cube must have non-zero spatial size");
    if (bands_ == 0) fail(Errc::invalid_argument, "cube must have at least one band");
    if (wavelengths_.size() != bands_)
      fail(Errc::format, "wavelength count mismatch: " + std::to_string(wavelengths_.size()) +
                             " for " + std::to_string(bands_) + " bands");
    for (std::size_t i = 0; i < bands_; ++i) {
      if (!(wavelengths_[i] > 0.0) || !std::isfinite(wavelengths_[i]))
        fail(Errc::format, "wavelengths must be positive and finite");
      if (i > 0 && !(wavelengths_[i] > wavelengths_[i - 1]))
        fail(Errc::format, "wavelengths must be strictly increasing");
    }
    if (data_.size() != height_ * width_ * bands_)
      fail(Errc::dimension_mismatch, "cube data length does not match height*width*bands");
    for (float v : data_) {
      if (!std::isfinite(v) || v < 0.0f)
        fail(Errc::numeric, "cube values must be finite and non-negative");
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t bands() const noexcept { return bands_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> spectrum(std::size_t row, std::size_t col) const noexcept {
    return {data_.data() + (row * width_ + col) * bands_, bands_};
  }
  std::span<const float> spectrum(std::size_t pixel) const noexcept {
    return {data_.data() + pixel * bands_, bands_};
  }

  friend bool operator==(const HyperCube&, const HyperCube&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t bands_;
  std::vector<double> wavelengths_;
  std::vector<float> data_;
};

inline constexpr std::uint8_t kUnlabeled = 255;

class LabelMap {
 public:
  LabelMap(std::size_t height, std::size_t width, std::size_t classes,
           std::vector<std::uint8_t> data)
      : height_(height), width_(width), classes_(classes), data_(std::move(data)) {
    if (classes_ > kUnlabeled) fail(Errc::invalid_argument, "at most 255 classes are supported");
    if (data_.size() != height_ * width_)
      fail(Errc::dimension_mismatch, "label data length does not match height*width");
    for (auto v : data_) {
      if (v != kUnlabeled && v >= classes_)
        fail(Errc::out_of_range, "label value " + std::to_string(v) + " >= class count " +
                                     std::to_string(classes_));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t classes() const noexcept { return classes_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::uint8_t at(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }
  bool labeled(std::size_t pixel) const noexcept { return data_[pixel] != kUnlabeled; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t classes_;
  std::vector<std::uint8_t> data_;
};

/// H x W field of values in [0, 1].
class SimilarityMap {
 public:
  SimilarityMap(std::size_t height, std::size_t width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_)
      fail(Errc::dimension_mismatch, "map data length does not match height*width");
    for (float v : data_) {
      if (!std::isfinite(v)) fail(Errc::numeric, "non-finite similarity value");
      if (v < 0.0f || v > 1.0f) fail(Errc::out_of_range, "similarity value outside [0,1]");
    }
  }

  /// Constant-valued map.
  static SimilarityMap filled(std::size_t height, std::size_t width, float value) {
    return SimilarityMap(height, width, std::vector<float>(height * width, value));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const float> data() const noexcept { return data_; }
  float at(std::size_t row, std::size_t col) const noexcept { return data_[row * width_ + col]; }
  float operator[](std::size_t pixel) const noexcept { return data_[pixel]; }

  friend bool operator==(const SimilarityMap&, const SimilarityMap&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<float> data_;
};

enum class Polarity : std::uint8_t { positive, negative };

struct Click {
  std::size_t row = 0;
  std::size_t col = 0;
  Polarity polarity = Polarity::positive;

  friend bool operator==(const Click&, const Click&) = default;
};

/// Ordered clicks with unique coordinates.
class ClickSet {
 public:
  ClickSet() = default;
  ClickSet(std::initializer_list<Click> clicks) {
    for (const auto& c : clicks) add(c);
  }

  bool contains(std::size_t row, std::size_t col) const noexcept {
    return std::any_of(clicks_.begin(), clicks_.end(),
                       [&](const Click& c) { return c.row == row && c.col == col; });
  }

  void add(const Click& click) {
    if (contains(click.row, click.col))
      fail(Errc::conflict, "duplicate click at (" + std::to_string(click.row) + ", " +
                               std::to_string(click.col) + ")");
    clicks_.push_back(click);
  }

  void pop_back() {
    if (clicks_.empty()) fail(Errc::conflict, "click history is empty");
    clicks_.pop_back();
  }

  std::size_t size() const noexcept { return clicks_.size(); }
  bool empty() const noexcept { return clicks_.empty(); }
  std::size_t positive_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(
        clicks_.begin(), clicks_.end(), [](const Click& c) { return c.polarity == Polarity::positive; }));
  }
  const Click& operator[](std::size_t i) const noexcept { return clicks_[i]; }
  auto begin() const noexcept { return clicks_.begin(); }
  auto end() const noexcept { return clicks_.end(); }

  void check_bounds(std::size_t height, std::size_t width) const {
    for (const auto& c : clicks_) {
      if (c.row >= height || c.col >= width)
        fail(Errc::out_of_range, "click (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                                     ") outside " + std::to_string(height) + "x" +
                                     std::to_string(width) + " image");
    }
  }

  friend bool operator==(const ClickSet&, const ClickSet&) = default;

 private:
  std::vector<Click> clicks_;
};

/// 8-bit RGB, interleaved per pixel.
class RgbImage {
 public:
  RgbImage(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_ * 3)
      fail(Errc::dimension_mismatch, "rgb data length does not match height*width*3");
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::span<const std::uint8_t, 3> pixel(std::size_t index) const noexcept {
    return std::span<const std::uint8_t, 3>(data_.data() + index * 3, 3);
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> data_;
};

/// Foreground/background mask; one byte per pixel (0 or 1).
class BinaryMask {
 public:
  BinaryMask(std::size_t height, std::size_t width)
      : height_(height), width_(width), data_(height * width, 0) {}
  BinaryMask(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_)
      fail(Errc::dimension_mismatch, "mask data length does not match height*width");
    for (auto& v : data_) v = v ? 1 : 0;
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  bool operator[](std::size_t pixel) const noexcept { return data_[pixel] != 0; }
  bool at(std::size_t row, std::size_t col) const noexcept { return data_[row * width_ + col] != 0; }
  void set(std::size_t pixel, bool value) noexcept { data_[pixel] = value ? 1 : 0; }
  void set(std::size_t row, std::size_t col, bool value) noexcept { set(row * width_ + col, value); }
  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> data_;
};

/// Mask of pixels carrying the given class.
inline BinaryMask class_mask(const LabelMap& labels, std::uint8_t cls) {
  BinaryMask mask(labels.height(), labels.width());
  auto d = labels.data();
  for (std::size_t i = 0; i < d.size(); ++i) mask.set(i, d[i] == cls);
  return mask;
}

/// Mask of labeled (non-sentinel) pixels.
inline BinaryMask labeled_mask(const LabelMap& labels) {
  BinaryMask mask(labels.height(), labels.width());
  auto d = labels.data();
  for (std::size_t i = 0; i < d.size(); ++i) mask.set(i, d[i] != kUnlabeled);
  return mask;
}

template <class A, class B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width())
    fail(Errc::dimension_mismatch,
         std::string(what) + ": dimension mismatch " + std::to_string(a.height()) + "x" +
             std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
             std::to_string(b.width()));
}

}  // namespace hsiseg
