#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace slr {

/// 8-bit RGB raster, row-major, channels interleaved.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Per-pixel class indices in [0, classes). A one-hot W x H x C tensor is a
/// view of this grid.
struct LabelMask {
  int width = 0;
  int height = 0;
  int classes = 0;
  std::vector<std::uint8_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h, int c)
      : width(w), height(h), classes(c), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t size() const { return labels.size(); }
  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  /// Throws a validation error if any pixel value is >= classes or the
  /// buffer does not match the declared dimensions.
  void validate() const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

// Binary netpbm I/O. Only 8-bit P6 (RGB) and P5 (gray) are supported.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Reads a P5 file whose pixel values are class indices.
LabelMask read_mask(const std::filesystem::path& path, int classes);
void write_mask(const std::filesystem::path& path, const LabelMask& mask);

RgbImage resize_nearest(const RgbImage& image, int width, int height);
LabelMask resize_nearest(const LabelMask& mask, int width, int height);

}  // namespace slr
