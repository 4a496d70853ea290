// SPDX-License-Identifier: Apache-2.0

#include "rankdist/distortion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "rankdist/error.hpp"

namespace rankdist {

std::string_view to_string(DistortionKind kind) {
  return kind == DistortionKind::Lca ? "lca" : "moire";
}

std::string_view to_string(Diagonal dir) { return dir == Diagonal::Main ? "main" : "anti"; }

DistortionKind parse_distortion_kind(std::string_view text) {
  if (text == "lca" || text == "LCA") return DistortionKind::Lca;
  if (text == "moire" || text == "Moire") return DistortionKind::Moire;
  throw Error(ErrorCode::InvalidArgument, "unknown distortion kind '" + std::string(text) + "'");
}

Diagonal parse_diagonal(std::string_view text) {
  if (text == "main") return Diagonal::Main;
  if (text == "anti") return Diagonal::Anti;
  throw Error(ErrorCode::InvalidArgument, "unknown diagonal '" + std::string(text) + "'");
}

namespace {

// Bilinear sample of one channel with clamp-to-edge addressing.
double sample_bilinear(const ImageRGB& img, double px, double py, int c) {
  const double fx0 = std::floor(px);
  const double fy0 = std::floor(py);
  const double tx = px - fx0;
  const double ty = py - fy0;
  const int w = img.width();
  const int h = img.height();
  const int x0 = std::clamp(static_cast<int>(fx0), 0, w - 1);
  const int x1 = std::clamp(static_cast<int>(fx0) + 1, 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(fy0), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(fy0) + 1, 0, h - 1);
  const double a = img.at(x0, y0, c);
  const double b = img.at(x1, y0, c);
  const double top = a + tx * (b - a);
  if (ty == 0.0) return top;
  const double d = img.at(x0, y1, c);
  const double e = img.at(x1, y1, c);
  const double bottom = d + tx * (e - d);
  return top + ty * (bottom - top);
}

}  // namespace

ImageRGB simulate_lca(const ImageRGB& img, double shift, Diagonal direction) {
  if (!(shift >= 0.0)) throw Error(ErrorCode::InvalidArgument, "LCA shift must be >= 0");
  if (shift > std::min(img.width(), img.height()) / 4.0) {
    throw Error(ErrorCode::ShiftTooLarge,
                "shift " + std::to_string(shift) + " exceeds a quarter of the image size");
  }
  if (shift == 0.0) return img;
  const double dx = shift;
  const double dy = direction == Diagonal::Main ? shift : -shift;
  ImageRGB out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y, 0) = sample_bilinear(img, x - dx, y - dy, 0);
      out.at(x, y, 2) = sample_bilinear(img, x + dx, y + dy, 2);
    }
  }
  return out;
}

double keys_cubic(double t) {
  constexpr double a = -0.5;
  const double x = std::abs(t);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

namespace {

struct Taps {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
};

std::vector<Taps> make_taps(int src, int dst) {
  const double scale = static_cast<double>(src) / dst;
  std::vector<Taps> taps(dst);
  for (int i = 0; i < dst; ++i) {
    const double pos = (i + 0.5) * scale - 0.5;
    const double base = std::floor(pos);
    const double frac = pos - base;
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      taps[i].index[k] = std::clamp(static_cast<int>(base) - 1 + k, 0, src - 1);
      taps[i].weight[k] = keys_cubic(frac - (k - 1));
      sum += taps[i].weight[k];
    }
    for (auto& w : taps[i].weight) w /= sum;
  }
  return taps;
}

}  // namespace

ImageRGB resize_bicubic(const ImageRGB& img, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "resize to empty size");
  const auto xt = make_taps(img.width(), width);
  const auto yt = make_taps(img.height(), height);

  // horizontal pass, unclamped
  std::vector<double> mid(static_cast<std::size_t>(width) * img.height() * kChannels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) v += xt[x].weight[k] * img.at(xt[x].index[k], y, c);
        mid[(static_cast<std::size_t>(y) * width + x) * kChannels + c] = v;
      }
    }
  }
  ImageRGB out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        double v = 0.0;
        for (int k = 0; k < 4; ++k) {
          v += yt[y].weight[k] * mid[(static_cast<std::size_t>(yt[y].index[k]) * width + x) * kChannels + c];
        }
        out.at(x, y, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

ImageRGB simulate_moire(const ImageRGB& img, double factor) {
  if (!(factor >= 1.0) || !std::isfinite(factor)) {
    throw Error(ErrorCode::FactorOutOfRange, "resize factor must be >= 1");
  }
  const int w = static_cast<int>(std::floor(img.width() / factor));
  const int h = static_cast<int>(std::floor(img.height() / factor));
  if (w < kPatchSize || h < kPatchSize) {
    throw Error(ErrorCode::ImageTooSmall, "downscaled size " + std::to_string(w) + "x" +
                                              std::to_string(h) + " is below 32 pixels");
  }
  if (w == img.width() && h == img.height()) return img;
  return resize_bicubic(resize_bicubic(img, w, h), img.width(), img.height());
}

ImageRGB apply(const DistortionSpec& spec, const ImageRGB& img) {
  if (spec.kind == DistortionKind::Lca) return simulate_lca(img, spec.level, spec.direction);
  return simulate_moire(img, spec.level);
}

}  // namespace rankdist
