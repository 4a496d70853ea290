// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rankdist/dataset.hpp"
#include "rankdist/imaging.hpp"
#include "rankdist/model.hpp"

namespace rankdist {

/// Anything that maps a patch to a distortion score (higher = more distorted).
using PatchScorer = std::function<double(const Patch&)>;

/// Wraps forward(); the model must outlive the returned scorer.
PatchScorer model_scorer(const ScorerModel& model);

enum class PatchOrder { FirstLess, SecondLess, Tie };

inline constexpr double kTieThreshold = 1e-9;

PatchOrder compare_scores(double first, double second);
PatchOrder order_patch_pair(const PatchScorer& scorer, const Patch& first, const Patch& second);

enum class PairDecision { ALessDistorted, BLessDistorted, Tie };

std::string_view to_string(PairDecision decision);

struct PairVerdict {
  PairDecision decision = PairDecision::Tie;
  std::size_t votes_a = 0;
  std::size_t votes_b = 0;
  std::size_t ties = 0;
};

/// Majority vote over index-registered ROI pairs.
PairVerdict order_image_pair(const PatchScorer& scorer, std::span<const Patch> rois_a,
                             std::span<const Patch> rois_b);

/// scores[i][j] = f(ROI i of image j).
struct ScoreMatrix {
  std::vector<std::vector<double>> scores;
  std::vector<Rect> patch_rects;
  std::vector<std::string> image_ids;

  std::size_t patches() const { return scores.size(); }
  std::size_t images() const { return scores.empty() ? 0 : scores.front().size(); }
};

struct SetRanking {
  RankVector image_ranks;
  std::vector<RankVector> per_patch_ranks;
};

/// Ranks images within each ROI row, takes the per-image median over rows
/// and re-ranks the medians.
SetRanking rank_image_set(const ScoreMatrix& matrix);

struct TpBreakdown {
  std::size_t correct = 0;
  std::size_t ties = 0;
  std::size_t wrong = 0;

  std::size_t total() const { return correct + ties + wrong; }
  double tp_percent() const;
  double tie_percent() const;
  double wrong_percent() const;
};

TpBreakdown tp_breakdown(const PatchScorer& scorer, std::span<const OrderedPair> pairs);

/// Percentage of pairs ordered first_less; ties count as failures.
double tp_rate(const PatchScorer& scorer, std::span<const OrderedPair> pairs);
double tp_rate(const ScorerModel& model, std::span<const OrderedPair> pairs);

struct SetAccuracy {
  double median_rho = 0.0;
  std::vector<double> rhos;
  /// Rows with zero variance, excluded from the median.
  std::size_t skipped = 0;
};

/// Median over ROI rows of spearman(row ranks, expected).
SetAccuracy set_rank_accuracy(std::span<const RankVector> predicted, std::span<const double> expected);

/// ROIs for a registered image set: error maps of every image against the
/// elementwise median image are summed, then windows are selected as in
/// select_rois.
std::vector<Rect> select_set_rois(std::span<const ImageRGB> images, std::size_t max_rois,
                                  const RoiOptions& options = {});

ImageRGB median_image(std::span<const ImageRGB> images);

ScoreMatrix score_matrix(const PatchScorer& scorer, std::span<const ImageRGB> images,
                         std::span<const Rect> rois);

struct LevelledImage {
  ImageRGB image;
  double level = 0.0;
};

/// Registered images of one scene at different distortion levels.
using SceneSet = std::vector<LevelledImage>;

struct MonteCarloOptions {
  std::size_t trials = 150;
  int crop_size = 150;
  std::size_t max_rois = 8;
  std::size_t set_size = 4;
  std::size_t max_resamples = 20;
  std::uint64_t seed = 0;
};

struct TrialRecord {
  std::size_t trial = 0;
  /// "pair", "set" or "skipped".
  std::string type;
  /// Pairs: "correct", "wrong" or "tie". Sets: empty.
  std::string decision;
  /// Sets: median rho of the trial.
  double rho = 0.0;
  std::size_t n_rois = 0;
};

struct MonteCarloReport {
  /// "pairs" (summary is TP %) or "sets" (summary is median rho).
  std::string kind;
  double summary = 0.0;
  std::size_t trials_run = 0;
  std::size_t skipped = 0;
  std::vector<TrialRecord> records;
};

/// Each trial picks a scene, two images with distinct levels and one shared
/// crop, selects ROIs inside the crop and scores the majority decision
/// against the level order. Crops without qualifying ROIs are redrawn up to
/// max_resamples times, then the trial is skipped.
MonteCarloReport monte_carlo_pairs(std::span<const SceneSet> scenes, const PatchScorer& scorer,
                                   const MonteCarloOptions& options);
MonteCarloReport monte_carlo_pairs(const SceneSet& images, const PatchScorer& scorer,
                                   const MonteCarloOptions& options);

/// Like monte_carlo_pairs with set_size images per trial; each trial yields
/// the median per-ROI Spearman rho against the level ranks (0 when every
/// ROI row is tied) and the summary is the median over trials.
MonteCarloReport monte_carlo_sets(std::span<const SceneSet> scenes, const PatchScorer& scorer,
                                  const MonteCarloOptions& options);
MonteCarloReport monte_carlo_sets(const SceneSet& images, const PatchScorer& scorer,
                                  const MonteCarloOptions& options);

/// CSV with header trial,type,decision,rho,n_rois and a final summary row.
void write_report_csv(const MonteCarloReport& report, const std::filesystem::path& path);

}  // namespace rankdist
