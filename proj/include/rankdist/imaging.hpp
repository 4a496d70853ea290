// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace rankdist {

inline constexpr int kPatchSize = 32;
inline constexpr int kChannels = 3;
inline constexpr std::size_t kPatchValues = kPatchSize * kPatchSize * kChannels;

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;
  auto operator<=>(const Rect&) const = default;

  bool overlaps(const Rect& o) const {
    return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
  }
};

/// Three-channel raster, row-major, interleaved RGB samples in [0, 1].
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(int width, int height, double fill = 0.0);
  ImageRGB(int width, int height, std::vector<double> samples);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return samples_.empty(); }

  double& at(int x, int y, int c) { return samples_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return samples_[index(x, y, c)]; }

  std::span<double> samples() { return samples_; }
  std::span<const double> samples() const { return samples_; }

  bool operator==(const ImageRGB&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> samples_;
};

/// 32x32x3 network input, HWC order like ImageRGB.
struct Patch {
  std::array<float, kPatchValues> data{};
  Rect source_rect{0, 0, kPatchSize, kPatchSize};

  float at(int x, int y, int c) const { return data[(y * kPatchSize + x) * kChannels + c]; }
  float& at(int x, int y, int c) { return data[(y * kPatchSize + x) * kChannels + c]; }
};

/// Per-pixel nonnegative difference magnitude between two registered images.
struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Average (fractional) ranks, 1-based.
using RankVector = std::vector<double>;

enum class ImageFormat { Png, Ppm };

ImageRGB load_image(const std::filesystem::path& path);
void save_image(const ImageRGB& img, const std::filesystem::path& path, ImageFormat format);
/// Picks the format from the extension (.png or .ppm).
void save_image(const ImageRGB& img, const std::filesystem::path& path);

/// Decodes an in-memory P6 stream. Exposed for malformed-input tests.
ImageRGB decode_ppm(std::span<const unsigned char> bytes);

/// round(v * 255) with halves away from zero, clamped to [0, 255].
unsigned char quantize_sample(double v);

/// Channel-max absolute difference.
ErrorMap error_map(const ImageRGB& a, const ImageRGB& b);

ImageRGB crop(const ImageRGB& img, const Rect& rect);

/// Crops a 32x32 rect into a network patch.
Patch extract_patch(const ImageRGB& img, const Rect& rect);

RankVector average_ranks(std::span<const double> values);

/// Pearson correlation of two rank vectors.
double spearman(std::span<const double> x, std::span<const double> y);

double median(std::vector<double> values);

}  // namespace rankdist
