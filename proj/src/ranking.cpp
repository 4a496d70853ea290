// SPDX-License-Identifier: Apache-2.0

#include "rankdist/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankdist/error.hpp"

namespace rankdist {

PatchScorer model_scorer(const ScorerModel& model) {
  return [&model](const Patch& p) { return static_cast<double>(forward(model, p)); };
}

PatchOrder compare_scores(double first, double second) {
  if (std::abs(first - second) <= kTieThreshold) return PatchOrder::Tie;
  return first < second ? PatchOrder::FirstLess : PatchOrder::SecondLess;
}

PatchOrder order_patch_pair(const PatchScorer& scorer, const Patch& first, const Patch& second) {
  return compare_scores(scorer(first), scorer(second));
}

std::string_view to_string(PairDecision decision) {
  switch (decision) {
    case PairDecision::ALessDistorted: return "A_less_distorted";
    case PairDecision::BLessDistorted: return "B_less_distorted";
    case PairDecision::Tie: return "tie";
  }
  return "tie";
}

PairVerdict order_image_pair(const PatchScorer& scorer, std::span<const Patch> rois_a,
                             std::span<const Patch> rois_b) {
  if (rois_a.size() != rois_b.size()) {
    throw Error(ErrorCode::LengthMismatch, "ROI lists must be index-registered");
  }
  if (rois_a.empty()) throw Error(ErrorCode::EmptyRois, "no ROIs to vote with");
  PairVerdict v;
  for (std::size_t i = 0; i < rois_a.size(); ++i) {
    switch (order_patch_pair(scorer, rois_a[i], rois_b[i])) {
      case PatchOrder::FirstLess: ++v.votes_a; break;
      case PatchOrder::SecondLess: ++v.votes_b; break;
      case PatchOrder::Tie: ++v.ties; break;
    }
  }
  if (v.votes_a > v.votes_b) {
    v.decision = PairDecision::ALessDistorted;
  } else if (v.votes_b > v.votes_a) {
    v.decision = PairDecision::BLessDistorted;
  }
  return v;
}

SetRanking rank_image_set(const ScoreMatrix& matrix) {
  const std::size_t rows = matrix.patches();
  const std::size_t cols = matrix.images();
  if (rows < 1 || cols < 2) {
    throw Error(ErrorCode::InvalidArgument, "score matrix needs >= 1 patch and >= 2 images");
  }
  SetRanking out;
  bool any_informative = false;
  for (const auto& row : matrix.scores) {
    if (row.size() != cols) throw Error(ErrorCode::LengthMismatch, "ragged score matrix");
    out.per_patch_ranks.push_back(average_ranks(row));
    if (std::any_of(row.begin(), row.end(), [&](double s) { return s != row.front(); })) {
      any_informative = true;
    }
  }
  if (!any_informative) {
    throw Error(ErrorCode::DegenerateMatrix, "every ROI row scores all images equally");
  }
  std::vector<double> medians(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    std::vector<double> column(rows);
    for (std::size_t i = 0; i < rows; ++i) column[i] = out.per_patch_ranks[i][j];
    medians[j] = median(std::move(column));
  }
  out.image_ranks = average_ranks(medians);
  return out;
}

double TpBreakdown::tp_percent() const {
  return total() ? 100.0 * static_cast<double>(correct) / static_cast<double>(total()) : 0.0;
}
double TpBreakdown::tie_percent() const {
  return total() ? 100.0 * static_cast<double>(ties) / static_cast<double>(total()) : 0.0;
}
double TpBreakdown::wrong_percent() const {
  return total() ? 100.0 * static_cast<double>(wrong) / static_cast<double>(total()) : 0.0;
}

TpBreakdown tp_breakdown(const PatchScorer& scorer, std::span<const OrderedPair> pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "no labeled pairs");
  TpBreakdown b;
  for (const auto& p : pairs) {
    switch (order_patch_pair(scorer, p.patch_a, p.patch_b)) {
      case PatchOrder::FirstLess: ++b.correct; break;
      case PatchOrder::Tie: ++b.ties; break;
      case PatchOrder::SecondLess: ++b.wrong; break;
    }
  }
  return b;
}

double tp_rate(const PatchScorer& scorer, std::span<const OrderedPair> pairs) {
  return tp_breakdown(scorer, pairs).tp_percent();
}

double tp_rate(const ScorerModel& model, std::span<const OrderedPair> pairs) {
  return tp_rate(model_scorer(model), pairs);
}

SetAccuracy set_rank_accuracy(std::span<const RankVector> predicted, std::span<const double> expected) {
  if (predicted.empty()) throw Error(ErrorCode::EmptyInput, "no per-patch rank rows");
  SetAccuracy acc;
  for (const auto& row : predicted) {
    try {
      acc.rhos.push_back(spearman(row, expected));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateInput) throw;
      ++acc.skipped;
    }
  }
  if (acc.rhos.empty()) throw Error(ErrorCode::DegenerateInput, "every rank row has zero variance");
  acc.median_rho = median(acc.rhos);
  return acc;
}

ImageRGB median_image(std::span<const ImageRGB> images) {
  if (images.empty()) throw Error(ErrorCode::EmptyInput, "median of no images");
  const ImageRGB& first = images.front();
  for (const auto& img : images) {
    if (img.width() != first.width() || img.height() != first.height()) {
      throw Error(ErrorCode::DimensionMismatch, "set images must share dimensions");
    }
  }
  ImageRGB out(first.width(), first.height());
  std::vector<double> values(images.size());
  auto dst = out.samples();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    for (std::size_t i = 0; i < images.size(); ++i) values[i] = images[i].samples()[k];
    dst[k] = median(values);
  }
  return out;
}

std::vector<Rect> select_set_rois(std::span<const ImageRGB> images, std::size_t max_rois,
                                  const RoiOptions& options) {
  if (images.size() < 2) throw Error(ErrorCode::InsufficientImages, "a set needs >= 2 images");
  const ImageRGB med = median_image(images);
  ErrorMap total{med.width(), med.height(), std::vector<double>(static_cast<std::size_t>(med.width()) * med.height(), 0.0)};
  for (const auto& img : images) {
    const ErrorMap m = error_map(img, med);
    for (std::size_t k = 0; k < total.values.size(); ++k) total.values[k] += m.values[k];
  }
  return select_rois(total, max_rois, options);
}

ScoreMatrix score_matrix(const PatchScorer& scorer, std::span<const ImageRGB> images,
                         std::span<const Rect> rois) {
  ScoreMatrix m;
  m.patch_rects.assign(rois.begin(), rois.end());
  for (std::size_t j = 0; j < images.size(); ++j) m.image_ids.push_back(std::to_string(j));
  for (const Rect& r : rois) {
    std::vector<double> row;
    row.reserve(images.size());
    for (const auto& img : images) row.push_back(scorer(extract_patch(img, r)));
    m.scores.push_back(std::move(row));
  }
  return m;
}

}  // namespace rankdist
