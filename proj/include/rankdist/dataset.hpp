// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rankdist/distortion.hpp"
#include "rankdist/imaging.hpp"
#include "rankdist/rng.hpp"

namespace rankdist {

/// Registered patch pair; patch_a is the less distorted one.
struct OrderedPair {
  Patch patch_a;
  Patch patch_b;
  DistortionSpec spec_a;
  DistortionSpec spec_b;
  std::string source_id;
  Rect roi_rect;
};

struct OrderedImages {
  ImageRGB a;
  ImageRGB b;
  DistortionSpec spec_a;
  DistortionSpec spec_b;
};

/// Pairs whose levels differ by less than this are redrawn.
inline constexpr double kMinLevelGap = 0.25;

/// One draw from the kind's training law: U(1, 5) shift or U(1.5, 10) factor.
double draw_level(DistortionKind kind, Rng& rng);

OrderedImages make_ordered_images(const ImageRGB& base, DistortionKind kind, Rng& rng);

/// Same as above with the level draws and direction injected.
OrderedImages make_ordered_images(const ImageRGB& base, DistortionKind kind, Diagonal direction,
                                  const std::function<double()>& draw);

struct RoiOptions {
  int window = kPatchSize;
  int stride = 16;
  /// A pixel counts as significantly different above this map value.
  double pixel_threshold = 2.0 / 255.0;
  /// Significant pixels inside a window must exceed this fraction of the
  /// whole map's pixel count.
  double area_fraction = 0.00025;
};

/// Greedy non-overlapping selection of the highest-scoring qualifying windows.
/// Ties in window score are broken by (y, x) ascending.
std::vector<Rect> select_rois(const ErrorMap& map, std::size_t max_rois,
                              const RoiOptions& options = {});

std::vector<Rect> extract_rois(const ImageRGB& a, const ImageRGB& b, std::size_t max_rois,
                               const RoiOptions& options = {});

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// 80/10/10 assignment by FNV-1a hash of the source id.
Split split_for(std::string_view source_id);

struct CorpusSource {
  std::string id;
  /// A base image, or a chart rendered with a seed derived from the corpus
  /// seed and the source id.
  std::variant<ImageRGB, PatternSpec> content;
};

struct ManifestEntry {
  std::string source_id;
  DistortionKind kind = DistortionKind::Lca;
  double level_a = 0.0;
  double level_b = 0.0;
  std::optional<Diagonal> direction;
  Rect rect;
  std::string patch_a_path;
  std::string patch_b_path;
  Split split = Split::Train;

  bool operator==(const ManifestEntry&) const = default;
};

struct CorpusCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t skipped = 0;

  bool operator==(const CorpusCounts&) const = default;
};

struct CorpusManifest {
  int version = 1;
  std::uint64_t seed = 0;
  DistortionKind kind = DistortionKind::Lca;
  CorpusCounts counts;
  std::vector<ManifestEntry> entries;
  /// Directory patch paths are relative to (not serialized).
  std::filesystem::path root;
};

struct CorpusOptions {
  DistortionKind kind = DistortionKind::Lca;
  std::size_t pairs_per_source = 1;
  std::size_t max_rois = 8;
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kManifestName = "manifest.jsonl";
inline constexpr std::string_view kPatchDir = "patches";

/// Simulates, extracts and writes every source's patch pairs under out_dir
/// and writes out_dir/manifest.jsonl. Sources are processed concurrently;
/// output depends only on (sources, options).
CorpusManifest build_corpus(std::span<const CorpusSource> sources, const CorpusOptions& options,
                            const std::filesystem::path& out_dir);

std::string format_manifest(const CorpusManifest& manifest);
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& path);

/// Parses a JSON Lines manifest; CorruptData errors name the 1-based line.
CorpusManifest read_manifest(const std::filesystem::path& path);

/// Loads the patch files of one split.
std::vector<OrderedPair> load_pairs(const CorpusManifest& manifest, Split split);

/// Checks manifest invariants (level order, registration, patch files, split
/// leaks). Returns one message per violation.
std::vector<std::string> validate_manifest(const CorpusManifest& manifest);

}  // namespace rankdist
