// SPDX-License-Identifier: Apache-2.0

#include "rankdist/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "rankdist/error.hpp"
#include "rankdist/parallel.hpp"

namespace rankdist {

namespace fs = std::filesystem;

double draw_level(DistortionKind kind, Rng& rng) {
  if (kind == DistortionKind::Lca) return rng.uniform(kLcaLevelMin, kLcaLevelMax);
  return rng.uniform(kMoireFactorMin, kMoireFactorMax);
}

OrderedImages make_ordered_images(const ImageRGB& base, DistortionKind kind, Diagonal direction,
                                  const std::function<double()>& draw) {
  double la = draw();
  double lb = draw();
  while (std::abs(la - lb) < kMinLevelGap) {
    la = draw();
    lb = draw();
  }
  if (lb < la) std::swap(la, lb);
  DistortionSpec sa{kind, la, direction};
  DistortionSpec sb{kind, lb, direction};
  return {apply(sa, base), apply(sb, base), sa, sb};
}

OrderedImages make_ordered_images(const ImageRGB& base, DistortionKind kind, Rng& rng) {
  const Diagonal direction = rng.index(2) == 0 ? Diagonal::Main : Diagonal::Anti;
  return make_ordered_images(base, kind, direction, [&] { return draw_level(kind, rng); });
}

std::vector<Rect> select_rois(const ErrorMap& map, std::size_t max_rois, const RoiOptions& options) {
  if (max_rois < 1) throw Error(ErrorCode::InvalidArgument, "max_rois must be >= 1");
  const int win = options.window;
  if (map.width < win || map.height < win) {
    throw Error(ErrorCode::ImageTooSmall, "error map smaller than the ROI window");
  }
  const double min_support =
      options.area_fraction * static_cast<double>(map.width) * static_cast<double>(map.height);

  struct Candidate {
    double score;
    Rect rect;
  };
  std::vector<Candidate> candidates;
  for (int y = 0; y + win <= map.height; y += options.stride) {
    for (int x = 0; x + win <= map.width; x += options.stride) {
      double score = 0.0;
      std::size_t support = 0;
      for (int yy = y; yy < y + win; ++yy) {
        const double* row = map.values.data() + static_cast<std::size_t>(yy) * map.width;
        for (int xx = x; xx < x + win; ++xx) {
          score += row[xx];
          support += row[xx] > options.pixel_threshold ? 1 : 0;
        }
      }
      if (static_cast<double>(support) > min_support) candidates.push_back({score, {x, y, win, win}});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    return a.rect.x < b.rect.x;
  });

  std::vector<Rect> selected;
  for (const auto& c : candidates) {
    if (selected.size() >= max_rois) break;
    const bool free = std::none_of(selected.begin(), selected.end(),
                                   [&](const Rect& r) { return r.overlaps(c.rect); });
    if (free) selected.push_back(c.rect);
  }
  if (selected.empty()) throw Error(ErrorCode::NoQualifyingRoi, "no window carries enough distortion");
  return selected;
}

std::vector<Rect> extract_rois(const ImageRGB& a, const ImageRGB& b, std::size_t max_rois,
                               const RoiOptions& options) {
  return select_rois(error_map(a, b), max_rois, options);
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

Split split_for(std::string_view source_id) {
  const auto bucket = fnv1a64(source_id) % 10;
  if (bucket < 8) return Split::Train;
  return bucket == 8 ? Split::Val : Split::Test;
}

namespace {

struct SourceResult {
  std::vector<ManifestEntry> entries;
  std::size_t skipped = 0;
};

SourceResult process_source(const CorpusSource& source, const CorpusOptions& options,
                            const fs::path& out_dir) {
  const std::uint64_t source_seed = derive_seed(options.seed, source.id);
  const ImageRGB base = std::holds_alternative<ImageRGB>(source.content)
                            ? std::get<ImageRGB>(source.content)
                            : generate_pattern(std::get<PatternSpec>(source.content),
                                               derive_seed(source_seed, "pattern"));
  Rng rng(source_seed);
  const Split split = split_for(source.id);
  SourceResult result;
  std::size_t roi_index = 0;
  for (std::size_t p = 0; p < options.pairs_per_source; ++p) {
    const OrderedImages pair = make_ordered_images(base, options.kind, rng);
    std::vector<Rect> rects;
    try {
      rects = extract_rois(pair.a, pair.b, options.max_rois);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoQualifyingRoi) throw;
      ++result.skipped;
      continue;
    }
    for (const Rect& rect : rects) {
      const std::string stem = source.id + "_" + std::to_string(roi_index++);
      ManifestEntry entry;
      entry.source_id = source.id;
      entry.kind = options.kind;
      entry.level_a = pair.spec_a.level;
      entry.level_b = pair.spec_b.level;
      if (options.kind == DistortionKind::Lca) entry.direction = pair.spec_a.direction;
      entry.rect = rect;
      entry.patch_a_path = (fs::path(kPatchDir) / (stem + "_a.png")).generic_string();
      entry.patch_b_path = (fs::path(kPatchDir) / (stem + "_b.png")).generic_string();
      entry.split = split;
      save_image(crop(pair.a, rect), out_dir / entry.patch_a_path, ImageFormat::Png);
      save_image(crop(pair.b, rect), out_dir / entry.patch_b_path, ImageFormat::Png);
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

}  // namespace

CorpusManifest build_corpus(std::span<const CorpusSource> sources, const CorpusOptions& options,
                            const fs::path& out_dir) {
  if (sources.empty()) throw Error(ErrorCode::EmptyInput, "no sources to build a corpus from");
  if (options.max_rois < 1) throw Error(ErrorCode::InvalidArgument, "max_rois must be >= 1");
  {
    std::map<std::string, int> seen;
    for (const auto& s : sources) {
      if (s.id.empty()) throw Error(ErrorCode::InvalidArgument, "source id must not be empty");
      if (++seen[s.id] > 1) throw Error(ErrorCode::InvalidArgument, "duplicate source id " + s.id);
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir / kPatchDir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / kPatchDir).string());

  std::vector<SourceResult> results(sources.size());
  parallel_for(sources.size(),
               [&](std::size_t i) { results[i] = process_source(sources[i], options, out_dir); });

  // Normalize order by (source id, roi index) so scheduling never shows.
  std::vector<std::size_t> order(sources.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return sources[a].id < sources[b].id; });

  CorpusManifest manifest;
  manifest.seed = options.seed;
  manifest.kind = options.kind;
  manifest.root = out_dir;
  for (std::size_t i : order) {
    manifest.counts.skipped += results[i].skipped;
    for (auto& e : results[i].entries) {
      switch (e.split) {
        case Split::Train: ++manifest.counts.train; break;
        case Split::Val: ++manifest.counts.val; break;
        case Split::Test: ++manifest.counts.test; break;
      }
      manifest.entries.push_back(std::move(e));
    }
  }
  write_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

std::vector<OrderedPair> load_pairs(const CorpusManifest& manifest, Split split) {
  std::vector<const ManifestEntry*> selected;
  for (const auto& e : manifest.entries) {
    if (e.split == split) selected.push_back(&e);
  }
  std::vector<OrderedPair> pairs(selected.size());
  const Rect local{0, 0, kPatchSize, kPatchSize};
  parallel_for(selected.size(), [&](std::size_t i) {
    const ManifestEntry& e = *selected[i];
    const ImageRGB a = load_image(manifest.root / e.patch_a_path);
    const ImageRGB b = load_image(manifest.root / e.patch_b_path);
    if (a.width() != kPatchSize || a.height() != kPatchSize || b.width() != kPatchSize ||
        b.height() != kPatchSize) {
      throw Error(ErrorCode::ShapeMismatch, "patch file is not 32x32: " + e.patch_a_path);
    }
    OrderedPair& pair = pairs[i];
    pair.patch_a = extract_patch(a, local);
    pair.patch_b = extract_patch(b, local);
    pair.patch_a.source_rect = e.rect;
    pair.patch_b.source_rect = e.rect;
    const Diagonal dir = e.direction.value_or(Diagonal::Main);
    pair.spec_a = {e.kind, e.level_a, dir};
    pair.spec_b = {e.kind, e.level_b, dir};
    pair.source_id = e.source_id;
    pair.roi_rect = e.rect;
  });
  return pairs;
}

std::vector<std::string> validate_manifest(const CorpusManifest& manifest) {
  std::vector<std::string> problems;
  std::map<std::string, Split> split_of;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const std::string where = "entry " + std::to_string(i) + " (" + e.source_id + "): ";
    if (!(e.level_a < e.level_b)) problems.push_back(where + "level_a is not below level_b");
    if (e.rect.w != kPatchSize || e.rect.h != kPatchSize) problems.push_back(where + "rect is not 32x32");
    auto [it, inserted] = split_of.emplace(e.source_id, e.split);
    if (!inserted && it->second != e.split) problems.push_back(where + "source appears in two splits");
    for (const auto& path : {e.patch_a_path, e.patch_b_path}) {
      try {
        const ImageRGB img = load_image(manifest.root / path);
        if (img.width() != kPatchSize || img.height() != kPatchSize) {
          problems.push_back(where + path + " is not 32x32");
        }
      } catch (const Error& err) {
        problems.push_back(where + err.what());
      }
    }
  }
  return problems;
}

}  // namespace rankdist
