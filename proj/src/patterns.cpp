// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "rankdist/distortion.hpp"
#include "rankdist/error.hpp"

namespace rankdist {

std::string_view to_string(PatternKind kind) {
  switch (kind) {
    case PatternKind::Bars: return "bars";
    case PatternKind::Net: return "net";
    case PatternKind::SiemensStar: return "siemens-star";
    case PatternKind::Wedge: return "wedge";
    case PatternKind::Rings: return "rings";
  }
  return "unknown";
}

double pattern_phase(std::uint64_t seed) { return Rng(derive_seed(seed, "phase")).uniform(); }

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// First half of each cycle is the bright half.
bool bright(double cycles) { return cycles - std::floor(cycles) < 0.5; }

void validate(const PatternSpec& spec) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (spec.size < 64) fail("pattern size must be >= 64");
  if (!(spec.contrast > 0.0 && spec.contrast <= 1.0)) fail("contrast must be in (0, 1]");
  if (!std::isfinite(spec.orientation)) fail("orientation must be finite");
  switch (spec.kind) {
    case PatternKind::Bars:
    case PatternKind::Net:
    case PatternKind::Rings:
      if (!(spec.period >= 2.0)) fail("period below 2 px exceeds 0.5 cycles/px");
      break;
    case PatternKind::Wedge:
      if (!(spec.period >= 2.0)) fail("wedge period below 2 px exceeds 0.5 cycles/px");
      if (!(spec.period_max >= spec.period) || !std::isfinite(spec.period_max)) {
        fail("wedge period_max must be >= period");
      }
      break;
    case PatternKind::SiemensStar:
      if (spec.spokes < 1) fail("star needs at least one spoke");
      if (spec.spokes / std::numbers::pi >= 0.5 * spec.size) fail("too many spokes for the chart size");
      break;
  }
}

}  // namespace

ImageRGB generate_pattern(const PatternSpec& spec, std::uint64_t seed) {
  validate(spec);
  const int n = spec.size;
  const double phase = pattern_phase(seed);
  const double hi = 0.5 + 0.5 * spec.contrast;
  const double lo = 0.5 - 0.5 * spec.contrast;
  const double cs = std::cos(spec.orientation);
  const double sn = std::sin(spec.orientation);
  const double center = pattern_center(n);

  // Wedge: a fan of lines converging on an apex outside the chart, so the
  // local period grows linearly from `period` at one edge to `period_max`.
  const bool wedge_is_bars = spec.kind == PatternKind::Wedge && spec.period_max - spec.period < 1e-9;
  const double apex_gap = wedge_is_bars ? 0.0 : n * spec.period / (spec.period_max - spec.period);
  const double wedge_cycles_per_radian = wedge_is_bars ? 0.0 : apex_gap / spec.period;
  const double star_hole = spec.spokes / std::numbers::pi;

  ImageRGB img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double value = 0.5;
      switch (spec.kind) {
        case PatternKind::Bars: {
          const double u = x * cs + y * sn;
          value = bright(u / spec.period + phase) ? hi : lo;
          break;
        }
        case PatternKind::Net: {
          const double u = x * cs + y * sn;
          const double v = -x * sn + y * cs;
          const bool a = bright(u / spec.period + phase);
          const bool b = bright(v / spec.period + phase);
          value = a == b ? hi : lo;
          break;
        }
        case PatternKind::SiemensStar: {
          const double dx = x - center;
          const double dy = y - center;
          if (std::hypot(dx, dy) < star_hole) break;
          const double angle = std::atan2(dy, dx) - spec.orientation;
          value = bright(angle * spec.spokes / kTwoPi + phase) ? hi : lo;
          break;
        }
        case PatternKind::Wedge: {
          const double dx = x - center;
          const double dy = y - center;
          const double u = dx * cs + dy * sn;
          const double v = -dx * sn + dy * cs;
          if (wedge_is_bars) {
            value = bright(u / spec.period + phase) ? hi : lo;
          } else {
            const double angle = std::atan2(u, v + 0.5 * n + apex_gap);
            value = bright(angle * wedge_cycles_per_radian + phase) ? hi : lo;
          }
          break;
        }
        case PatternKind::Rings: {
          const double r = std::hypot(x - center, y - center);
          value = bright(r / spec.period + phase) ? hi : lo;
          break;
        }
      }
      for (int c = 0; c < kChannels; ++c) img.at(x, y, c) = value;
    }
  }
  return img;
}

PatternSpec sample_pattern_spec(int size, Rng& rng) {
  PatternSpec spec;
  spec.size = size;
  spec.kind = static_cast<PatternKind>(rng.index(5));
  spec.period = std::exp(rng.uniform(std::log(2.5), std::log(16.0)));
  spec.period_max = spec.period * rng.uniform(2.0, 4.0);
  spec.spokes = 16 + static_cast<int>(rng.index(57));
  spec.contrast = rng.uniform(0.4, 1.0);
  spec.orientation = rng.uniform(0.0, std::numbers::pi);
  return spec;
}

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

}  // namespace

ImageRGB generate_scene(int size, std::uint64_t seed, double saturation) {
  if (size < 64) throw Error(ErrorCode::InvalidSpec, "scene size must be >= 64");
  if (!(saturation >= 0.0 && saturation <= 1.0)) throw Error(ErrorCode::InvalidSpec, "saturation must be in [0, 1]");
  Rng rng(derive_seed(seed, "scene"));
  ImageRGB img(size, size);

  const Color c0 = random_color(rng);
  const Color c1 = random_color(rng);
  const double ga = rng.uniform(0.0, kTwoPi);
  const double gx = std::cos(ga) / size;
  const double gy = std::sin(ga) / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(0.5 + (x - 0.5 * size) * gx + (y - 0.5 * size) * gy, 0.0, 1.0);
      for (int c = 0; c < kChannels; ++c) img.at(x, y, c) = c0[c] + t * (c1[c] - c0[c]);
    }
  }

  const int shapes = 14 + static_cast<int>(rng.index(14));
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(rng.index(4));
    const Color fg = random_color(rng);
    const Color bg = random_color(rng);
    const double cx = rng.uniform(0.0, size);
    const double cy = rng.uniform(0.0, size);
    const double r = rng.uniform(0.04, 0.22) * size;
    const double rot = rng.uniform(0.0, std::numbers::pi);
    const double aspect = rng.uniform(0.4, 1.0);
    const double stripe = std::exp(rng.uniform(std::log(3.0), std::log(14.0)));
    const double cr = std::cos(rot);
    const double sr = std::sin(rot);

    const int x0 = std::max(0, static_cast<int>(cx - r - 1));
    const int x1 = std::min(size - 1, static_cast<int>(cx + r + 1));
    const int y0 = std::max(0, static_cast<int>(cy - r - 1));
    const int y1 = std::min(size - 1, static_cast<int>(cy + r + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = dx * cr + dy * sr;
        const double v = (-dx * sr + dy * cr) / aspect;
        bool inside = false;
        const Color* color = &fg;
        switch (kind) {
          case 0:  // rotated rectangle
            inside = std::abs(u) <= r && std::abs(v) <= r;
            break;
          case 1:  // ellipse
            inside = u * u + v * v <= r * r;
            break;
          case 2:  // triangle
            inside = v >= -0.5 * r && v <= r - 1.5 * std::abs(u) * 0.8;
            break;
          default:  // striped disk
            inside = dx * dx + dy * dy <= r * r;
            if (!bright(u / stripe)) color = &bg;
            break;
        }
        if (!inside) continue;
        for (int c = 0; c < kChannels; ++c) img.at(x, y, c) = (*color)[c];
      }
    }
  }
  if (saturation < 1.0) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double luma = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
        for (int c = 0; c < kChannels; ++c) img.at(x, y, c) = luma + saturation * (img.at(x, y, c) - luma);
      }
    }
  }
  return img;
}

}  // namespace rankdist
