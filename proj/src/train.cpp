// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rankdist/error.hpp"
#include "rankdist/model.hpp"
#include "rankdist/ranking.hpp"
#include "rankdist/rng.hpp"

namespace rankdist {

namespace {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch_size must be positive");
  if (cfg.eval_every == 0) throw Error(ErrorCode::InvalidArgument, "eval_every must be positive");
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning_rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "momentum must be in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0)) throw Error(ErrorCode::InvalidArgument, "weight_decay must be >= 0");
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
}

// v <- momentum * v + (g + wd * w);  w <- w - lr * v
void sgd_step(std::vector<float>& w, const std::vector<float>& g, std::vector<float>& v,
              const TrainConfig& cfg) {
  const float lr = static_cast<float>(cfg.learning_rate);
  const float mu = static_cast<float>(cfg.momentum);
  const float wd = static_cast<float>(cfg.weight_decay);
  for (std::size_t k = 0; k < w.size(); ++k) {
    v[k] = mu * v[k] + (g[k] + wd * w[k]);
    w[k] -= lr * v[k];
  }
}

}  // namespace

TrainResult train(ScorerModel model, std::span<const OrderedPair> train_pairs,
                  std::span<const OrderedPair> val_pairs, const TrainConfig& cfg) {
  validate(cfg);
  if (train_pairs.empty()) throw Error(ErrorCode::EmptySplit, "train split is empty");
  if (val_pairs.empty()) throw Error(ErrorCode::EmptySplit, "val split is empty");
  model.epsilon = cfg.epsilon;

  TrainResult result{model, {}};
  if (cfg.epochs == 0) return result;

  GradientSet<float> velocity = zero_gradients(model);
  Rng rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(train_pairs.size());
  std::vector<OrderedPair> batch;
  batch.reserve(cfg.batch_size);

  double best_tp = -1.0;
  double loss_sum = 0.0;
  std::size_t loss_batches = 0;
  std::size_t batch_index = 0;
  std::size_t last_eval = 0;

  auto evaluate = [&] {
    const double tp = tp_rate(model, val_pairs);
    result.history.push_back({batch_index, loss_batches ? loss_sum / loss_batches : 0.0, tp});
    if (tp > best_tp) {
      best_tp = tp;
      result.model = model;
    }
    loss_sum = 0.0;
    loss_batches = 0;
    last_eval = batch_index;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_pairs[order[k]]);

      auto [loss, grads] = backward(model, std::span<const OrderedPair>(batch), cfg.epsilon);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::DivergenceDetected,
                    "loss became non-finite at batch " + std::to_string(batch_index));
      }
      for (std::size_t l = 0; l < model.params.size(); ++l) {
        sgd_step(model.params[l].weight, grads[l].weight, velocity[l].weight, cfg);
        sgd_step(model.params[l].bias, grads[l].bias, velocity[l].bias, cfg);
      }
      loss_sum += loss;
      ++loss_batches;
      ++batch_index;
      if (batch_index % cfg.eval_every == 0) evaluate();
    }
  }
  if (last_eval != batch_index) evaluate();
  return result;
}

TrainResult train(ScorerModel model, const CorpusManifest& manifest, const TrainConfig& cfg) {
  const auto train_pairs = load_pairs(manifest, Split::Train);
  const auto val_pairs = load_pairs(manifest, Split::Val);
  return train(std::move(model), train_pairs, val_pairs, cfg);
}

}  // namespace rankdist
