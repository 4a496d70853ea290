// SPDX-License-Identifier: Apache-2.0

#include "rankdist/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rankdist/error.hpp"

namespace rankdist {

ImageRGB::ImageRGB(int width, int height, double fill) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  }
  width_ = width;
  height_ = height;
  samples_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

ImageRGB::ImageRGB(int width, int height, std::vector<double> samples) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
  }
  if (samples.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw Error(ErrorCode::DimensionMismatch, "sample buffer does not match width*height*3");
  }
  width_ = width;
  height_ = height;
  samples_ = std::move(samples);
}

ErrorMap error_map(const ImageRGB& a, const ImageRGB& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::DimensionMismatch, "error_map needs images of identical size");
  }
  ErrorMap map{a.width(), a.height(), {}};
  map.values.resize(static_cast<std::size_t>(a.width()) * a.height());
  const auto sa = a.samples();
  const auto sb = b.samples();
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    double m = 0.0;
    for (int c = 0; c < kChannels; ++c) {
      m = std::max(m, std::abs(sa[p * kChannels + c] - sb[p * kChannels + c]));
    }
    map.values[p] = m;
  }
  return map;
}

namespace {

void check_inside(int width, int height, const Rect& rect) {
  if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > width ||
      rect.y + rect.h > height) {
    throw Error(ErrorCode::OutOfBounds,
                "rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) + "," +
                    std::to_string(rect.w) + "," + std::to_string(rect.h) +
                    ") is not inside a " + std::to_string(width) + "x" +
                    std::to_string(height) + " image");
  }
}

}  // namespace

ImageRGB crop(const ImageRGB& img, const Rect& rect) {
  check_inside(img.width(), img.height(), rect);
  ImageRGB out(rect.w, rect.h);
  const auto src = img.samples();
  auto dst = out.samples();
  const std::size_t row = static_cast<std::size_t>(rect.w) * kChannels;
  for (int y = 0; y < rect.h; ++y) {
    const auto from = src.begin() +
                      ((static_cast<std::size_t>(rect.y + y) * img.width() + rect.x) * kChannels);
    std::copy(from, from + row, dst.begin() + y * row);
  }
  return out;
}

Patch extract_patch(const ImageRGB& img, const Rect& rect) {
  if (rect.w != kPatchSize || rect.h != kPatchSize) {
    throw Error(ErrorCode::InvalidArgument, "patch rect must be 32x32");
  }
  check_inside(img.width(), img.height(), rect);
  Patch patch;
  patch.source_rect = rect;
  for (int y = 0; y < kPatchSize; ++y) {
    for (int x = 0; x < kPatchSize; ++x) {
      for (int c = 0; c < kChannels; ++c) {
        patch.at(x, y, c) = static_cast<float>(img.at(rect.x + x, rect.y + y, c));
      }
    }
  }
  return patch;
}

RankVector average_ranks(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "cannot rank an empty sequence");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  RankVector ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "rank vectors differ in length");
  if (x.size() < 2) throw Error(ErrorCode::DegenerateInput, "need at least two ranked items");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::DegenerateInput, "rank vector has zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median of an empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace rankdist
