// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "rankdist/dataset.hpp"
#include "rankdist/imaging.hpp"

namespace rankdist {

enum class LayerKind : std::uint32_t { Conv = 1, Relu = 2, GlobalAvgPool = 3, Dense = 4 };

/// Conv is 3x3 with padding 1 (in/out are channel counts). Dense maps a
/// flattened input of `in` values to `out` values.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int in = 0;
  int out = 0;
  int stride = 1;

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv(int in, int out, int stride) { return {LayerKind::Conv, in, out, stride}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1}; }
  static LayerSpec global_avg_pool() { return {LayerKind::GlobalAvgPool, 0, 0, 1}; }
  static LayerSpec dense(int in, int out) { return {LayerKind::Dense, in, out, 1}; }

  bool has_params() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
  std::size_t weight_count() const;
  std::size_t bias_count() const { return has_params() ? static_cast<std::size_t>(out) : 0; }
};

/// Weight layout: conv [out][in][3][3], dense [out][in]. Layers without
/// parameters carry empty vectors.
template <typename T>
struct LayerParams {
  std::vector<T> weight;
  std::vector<T> bias;

  bool operator==(const LayerParams&) const = default;
};

/// Per-layer gradients, shape-matched to the model parameters.
template <typename T>
using GradientSet = std::vector<LayerParams<T>>;

/// The order-preserving scorer f: a 32x32x3 patch in, one real out. Both
/// branches of a Siamese pair evaluate this same object.
template <typename T>
struct BasicScorer {
  std::string arch_id;
  double epsilon = 0.1;
  std::vector<LayerSpec> layers;
  std::vector<LayerParams<T>> params;

  bool operator==(const BasicScorer&) const = default;

  std::size_t parameter_count() const;
};

using ScorerModel = BasicScorer<float>;

inline constexpr std::string_view kSmallV1 = "small-v1";
inline constexpr double kDefaultEpsilon = 0.1;

/// Layer list of a registered architecture; throws UnknownArch.
std::vector<LayerSpec> architecture(std::string_view arch_id);

/// Throws ShapeMismatch unless the layers map a 3x32x32 input to one value.
void validate_layers(std::span<const LayerSpec> layers);

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
template <typename T>
BasicScorer<T> init_layers(std::vector<LayerSpec> layers, std::uint64_t seed,
                           std::string arch_id = "custom");

ScorerModel init_model(std::string_view arch_id, std::uint64_t seed);

template <typename To, typename From>
BasicScorer<To> cast_model(const BasicScorer<From>& model) {
  BasicScorer<To> out{model.arch_id, model.epsilon, model.layers, {}};
  for (const auto& p : model.params) {
    out.params.push_back({std::vector<To>(p.weight.begin(), p.weight.end()),
                          std::vector<To>(p.bias.begin(), p.bias.end())});
  }
  return out;
}

template <typename T>
GradientSet<T> zero_gradients(const BasicScorer<T>& model);

/// Activations kept by forward for the backward pass. acts[0] is the input
/// in CHW order; acts[i + 1] is the output of layer i.
template <typename T>
struct ForwardCache {
  std::vector<std::vector<T>> acts;
};

template <typename T>
T forward(const BasicScorer<T>& model, const Patch& patch, ForwardCache<T>* cache = nullptr);

/// Accumulates d(upstream * f)/dw into grads using a cache from forward.
template <typename T>
void backpropagate(const BasicScorer<T>& model, const ForwardCache<T>& cache, T upstream,
                   GradientSet<T>& grads);

/// max(0, f(a) + epsilon - f(b))^2 for scores of the less (a) and more (b)
/// distorted patch.
double hinge_squared(double score_a, double score_b, double epsilon);

template <typename T>
double pair_loss(const BasicScorer<T>& model, const OrderedPair& pair, double epsilon);

/// Mean pair_loss; throws EmptyBatch.
template <typename T>
double batch_loss(const BasicScorer<T>& model, std::span<const OrderedPair> pairs, double epsilon);

template <typename T>
struct LossAndGradients {
  double loss = 0.0;
  GradientSet<T> grads;
};

/// Exact gradient of batch_loss. Per-pair gradients are reduced in pair index
/// order so the result does not depend on the worker count.
template <typename T>
LossAndGradients<T> backward(const BasicScorer<T>& model, std::span<const OrderedPair> pairs,
                             double epsilon);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double epsilon = kDefaultEpsilon;
  std::uint64_t seed = 0;
  std::size_t eval_every = 100;
};

struct EvalRecord {
  std::size_t batch = 0;
  double train_loss = 0.0;
  double val_tp = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct TrainResult {
  ScorerModel model;
  std::vector<EvalRecord> history;
};

/// Minibatch SGD with momentum and weight decay. Validation TP is recorded
/// every eval_every batches and after the last batch; the best-TP weights are
/// returned.
TrainResult train(ScorerModel model, std::span<const OrderedPair> train_pairs,
                  std::span<const OrderedPair> val_pairs, const TrainConfig& cfg);

TrainResult train(ScorerModel model, const CorpusManifest& manifest, const TrainConfig& cfg);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ScorerModel& model, const std::filesystem::path& path);
ScorerModel load_checkpoint(const std::filesystem::path& path);

}  // namespace rankdist
