// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <optional>
#include <string>

#include "rankdist/error.hpp"
#include "rankdist/parallel.hpp"
#include "rankdist/ranking.hpp"
#include "rankdist/report.hpp"
#include "rankdist/rng.hpp"

namespace rankdist {

namespace {

std::size_t distinct_levels(const SceneSet& scene) {
  std::vector<double> levels;
  for (const auto& li : scene) levels.push_back(li.level);
  std::sort(levels.begin(), levels.end());
  return static_cast<std::size_t>(std::unique(levels.begin(), levels.end()) - levels.begin());
}

void validate(std::span<const SceneSet> scenes, const MonteCarloOptions& options,
              std::size_t needed_levels) {
  if (options.trials == 0) throw Error(ErrorCode::InvalidArgument, "no trials requested");
  if (options.crop_size < kPatchSize) throw Error(ErrorCode::InvalidArgument, "crop smaller than a patch");
  if (options.max_rois < 1) throw Error(ErrorCode::InvalidArgument, "max_rois must be >= 1");
  if (scenes.empty()) throw Error(ErrorCode::InsufficientImages, "no image sets");
  for (const auto& scene : scenes) {
    if (distinct_levels(scene) < needed_levels) {
      throw Error(ErrorCode::InsufficientImages, "need " + std::to_string(needed_levels) +
                                                     " images with distinct levels per set");
    }
    for (const auto& li : scene) {
      if (li.image.width() != scene.front().image.width() ||
          li.image.height() != scene.front().image.height()) {
        throw Error(ErrorCode::DimensionMismatch, "images of a set must be registered");
      }
      if (li.image.width() < options.crop_size || li.image.height() < options.crop_size) {
        throw Error(ErrorCode::ImageTooSmall, "image smaller than the crop size");
      }
    }
  }
}

// Draws `count` images with pairwise distinct levels.
std::vector<std::size_t> pick_distinct(const SceneSet& scene, std::size_t count, Rng& rng) {
  std::vector<std::size_t> order(scene.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::size_t> chosen;
  for (std::size_t i : order) {
    const bool fresh = std::none_of(chosen.begin(), chosen.end(),
                                    [&](std::size_t c) { return scene[c].level == scene[i].level; });
    if (fresh) chosen.push_back(i);
    if (chosen.size() == count) break;
  }
  return chosen;
}

struct CropSelection {
  std::vector<ImageRGB> crops;
  std::vector<Rect> rois;
};

// Shared random crop with at least one qualifying ROI, or nullopt once the
// resample budget is spent.
std::optional<CropSelection> crop_with_rois(const SceneSet& scene, std::span<const std::size_t> chosen,
                                            const MonteCarloOptions& options, Rng& rng) {
  const int w = scene.front().image.width();
  const int h = scene.front().image.height();
  for (std::size_t attempt = 0; attempt <= options.max_resamples; ++attempt) {
    const Rect rect{static_cast<int>(rng.index(static_cast<std::uint64_t>(w - options.crop_size + 1))),
                    static_cast<int>(rng.index(static_cast<std::uint64_t>(h - options.crop_size + 1))),
                    options.crop_size, options.crop_size};
    CropSelection sel;
    for (std::size_t i : chosen) sel.crops.push_back(crop(scene[i].image, rect));
    try {
      sel.rois = chosen.size() == 2 ? extract_rois(sel.crops[0], sel.crops[1], options.max_rois)
                                    : select_set_rois(sel.crops, options.max_rois);
      return sel;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoQualifyingRoi) throw;
    }
  }
  return std::nullopt;
}

}  // namespace

MonteCarloReport monte_carlo_pairs(std::span<const SceneSet> scenes, const PatchScorer& scorer,
                                   const MonteCarloOptions& options) {
  validate(scenes, options, 2);
  std::vector<TrialRecord> records(options.trials);
  parallel_for(options.trials, [&](std::size_t t) {
    Rng rng(derive_seed(options.seed, t));
    const SceneSet& scene = scenes[rng.index(scenes.size())];
    const auto chosen = pick_distinct(scene, 2, rng);
    TrialRecord& rec = records[t];
    rec.trial = t;
    const auto sel = crop_with_rois(scene, chosen, options, rng);
    if (!sel) {
      rec.type = "skipped";
      return;
    }
    std::vector<Patch> ra, rb;
    for (const Rect& r : sel->rois) {
      ra.push_back(extract_patch(sel->crops[0], r));
      rb.push_back(extract_patch(sel->crops[1], r));
    }
    const PairVerdict v = order_image_pair(scorer, ra, rb);
    const bool a_is_less = scene[chosen[0]].level < scene[chosen[1]].level;
    rec.type = "pair";
    rec.n_rois = sel->rois.size();
    if (v.decision == PairDecision::Tie) {
      rec.decision = "tie";
    } else {
      const bool said_a = v.decision == PairDecision::ALessDistorted;
      rec.decision = said_a == a_is_less ? "correct" : "wrong";
    }
  });

  MonteCarloReport report;
  report.kind = "pairs";
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.type == "skipped") {
      ++report.skipped;
      continue;
    }
    ++report.trials_run;
    if (r.decision == "correct") ++correct;
  }
  if (report.trials_run == 0) throw Error(ErrorCode::NoQualifyingRoi, "every trial was skipped");
  report.summary = 100.0 * static_cast<double>(correct) / static_cast<double>(report.trials_run);
  report.records = std::move(records);
  return report;
}

MonteCarloReport monte_carlo_pairs(const SceneSet& images, const PatchScorer& scorer,
                                   const MonteCarloOptions& options) {
  return monte_carlo_pairs(std::span<const SceneSet>(&images, 1), scorer, options);
}

MonteCarloReport monte_carlo_sets(std::span<const SceneSet> scenes, const PatchScorer& scorer,
                                  const MonteCarloOptions& options) {
  if (options.set_size < 2) throw Error(ErrorCode::InvalidArgument, "set_size must be >= 2");
  validate(scenes, options, options.set_size);
  std::vector<TrialRecord> records(options.trials);
  parallel_for(options.trials, [&](std::size_t t) {
    Rng rng(derive_seed(options.seed, t));
    const SceneSet& scene = scenes[rng.index(scenes.size())];
    const auto chosen = pick_distinct(scene, options.set_size, rng);
    TrialRecord& rec = records[t];
    rec.trial = t;
    const auto sel = crop_with_rois(scene, chosen, options, rng);
    if (!sel) {
      rec.type = "skipped";
      return;
    }
    rec.type = "set";
    rec.n_rois = sel->rois.size();
    std::vector<double> levels;
    for (std::size_t i : chosen) levels.push_back(scene[i].level);
    const RankVector expected = average_ranks(levels);
    const ScoreMatrix m = score_matrix(scorer, sel->crops, sel->rois);
    try {
      const SetRanking ranking = rank_image_set(m);
      rec.rho = set_rank_accuracy(ranking.per_patch_ranks, expected).median_rho;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMatrix && e.code() != ErrorCode::DegenerateInput) throw;
      rec.rho = 0.0;
    }
  });

  MonteCarloReport report;
  report.kind = "sets";
  std::vector<double> rhos;
  for (const auto& r : records) {
    if (r.type == "skipped") {
      ++report.skipped;
      continue;
    }
    ++report.trials_run;
    rhos.push_back(r.rho);
  }
  if (rhos.empty()) throw Error(ErrorCode::NoQualifyingRoi, "every trial was skipped");
  report.summary = median(rhos);
  report.records = std::move(records);
  return report;
}

MonteCarloReport monte_carlo_sets(const SceneSet& images, const PatchScorer& scorer,
                                  const MonteCarloOptions& options) {
  return monte_carlo_sets(std::span<const SceneSet>(&images, 1), scorer, options);
}

void write_report_csv(const MonteCarloReport& report, const std::filesystem::path& path) {
  CsvWriter csv(path);
  csv.row({"trial", "type", "decision", "rho", "n_rois"});
  for (const auto& r : report.records) {
    csv.row({std::to_string(r.trial), r.type, r.decision,
             r.type == "set" ? format_number(r.rho) : "", std::to_string(r.n_rois)});
  }
  const std::string label = report.kind == "pairs" ? "tp_percent" : "median_rho";
  // summary rows: the value sits in the rho column, the trial count in n_rois
  csv.row({"summary", label, "", format_number(report.summary), std::to_string(report.trials_run)});
  csv.row({"summary", "skipped", "", "", std::to_string(report.skipped)});
  csv.close();
}

}  // namespace rankdist
