// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "rankdist/imaging.hpp"
#include "rankdist/rng.hpp"

namespace rankdist {

enum class DistortionKind { Lca, Moire };

/// Diagonal along which the red channel moves by +s and the blue channel by -s.
/// MainDiagonal is (+1, +1) in (x, y); AntiDiagonal is (+1, -1).
enum class Diagonal { Main, Anti };

std::string_view to_string(DistortionKind kind);
std::string_view to_string(Diagonal dir);
DistortionKind parse_distortion_kind(std::string_view text);
Diagonal parse_diagonal(std::string_view text);

struct DistortionSpec {
  DistortionKind kind = DistortionKind::Lca;
  /// LCA: shift in pixels (0 = identity). Moire: resize factor (1 = identity).
  double level = 0.0;
  Diagonal direction = Diagonal::Main;

  bool operator==(const DistortionSpec&) const = default;
};

/// Training-level sampling laws.
inline constexpr double kLcaLevelMin = 1.0;
inline constexpr double kLcaLevelMax = 5.0;
inline constexpr double kMoireFactorMin = 1.5;
inline constexpr double kMoireFactorMax = 10.0;

ImageRGB simulate_lca(const ImageRGB& img, double shift, Diagonal direction);

/// Keys cubic convolution kernel, a = -0.5.
double keys_cubic(double t);

/// Point-sampled bicubic resize (no pre-filter) to an explicit size. Pixel
/// centers are aligned: src = (dst + 0.5) * (src_dim / dst_dim) - 0.5.
ImageRGB resize_bicubic(const ImageRGB& img, int width, int height);

/// Unfiltered downscale by `factor` followed by an upscale back to the
/// original size, so the result stays registered with the input.
ImageRGB simulate_moire(const ImageRGB& img, double factor);

ImageRGB apply(const DistortionSpec& spec, const ImageRGB& img);

enum class PatternKind { Bars, Net, SiemensStar, Wedge, Rings };

std::string_view to_string(PatternKind kind);

struct PatternSpec {
  PatternKind kind = PatternKind::Bars;
  int size = 256;
  /// Bars, net and rings: period in pixels. Wedge: period at the narrow end.
  double period = 8.0;
  /// Wedge: period at the wide end.
  double period_max = 16.0;
  /// Siemens star spoke (cycle) count.
  int spokes = 36;
  double contrast = 1.0;
  double orientation = 0.0;

  bool operator==(const PatternSpec&) const = default;
};

/// Grayscale square-wave chart replicated to RGB. The seed only sets the
/// phase offset of the square wave.
ImageRGB generate_pattern(const PatternSpec& spec, std::uint64_t seed);

/// Phase offset in [0, 1) periods that generate_pattern derives from a seed.
double pattern_phase(std::uint64_t seed);

/// Geometric center used by the star and ring charts.
inline double pattern_center(int size) { return 0.5 * (size - 1); }

/// Draws chart parameters from the corpus-generation ranges.
PatternSpec sample_pattern_spec(int size, Rng& rng);

/// Chroma kept by synthetic LCA base scenes. Strongly colored content hides
/// the color fringes a channel shift adds.
inline constexpr double kLcaSceneSaturation = 0.25;

/// Synthetic scene (gradient background, random flat-colored shapes and a
/// few textured regions) used as an LCA base image when no photographs are
/// supplied. Colors are blended toward their Rec. 601 luma by
/// 1 - saturation.
ImageRGB generate_scene(int size, std::uint64_t seed, double saturation = 1.0);

}  // namespace rankdist
