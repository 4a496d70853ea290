// SPDX-License-Identifier: Apache-2.0

#include "rankdist/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rankdist/error.hpp"
#include "rankdist/parallel.hpp"
#include "rankdist/rng.hpp"

namespace rankdist {

std::size_t LayerSpec::weight_count() const {
  switch (kind) {
    case LayerKind::Conv: return static_cast<std::size_t>(out) * in * 9;
    case LayerKind::Dense: return static_cast<std::size_t>(out) * in;
    default: return 0;
  }
}

template <typename T>
std::size_t BasicScorer<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.weight.size() + p.bias.size();
  return n;
}

std::vector<LayerSpec> architecture(std::string_view arch_id) {
  if (arch_id == kSmallV1) {
    return {LayerSpec::conv(3, 8, 2),   LayerSpec::relu(), LayerSpec::conv(8, 16, 2),
            LayerSpec::relu(),          LayerSpec::conv(16, 32, 2), LayerSpec::relu(),
            LayerSpec::global_avg_pool(), LayerSpec::dense(32, 1)};
  }
  throw Error(ErrorCode::UnknownArch, "unknown architecture '" + std::string(arch_id) + "'");
}

namespace {

struct Shape {
  int c = kChannels;
  int h = kPatchSize;
  int w = kPatchSize;

  std::size_t size() const { return static_cast<std::size_t>(c) * h * w; }
};

int conv_out_dim(int in, int stride) { return (in - 1) / stride + 1; }

// Output shape of every layer; shapes[0] is the input.
std::vector<Shape> layer_shapes(std::span<const LayerSpec> layers) {
  std::vector<Shape> shapes{Shape{}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const Shape in = shapes.back();
    Shape out = in;
    const std::string where = "layer " + std::to_string(i) + ": ";
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.in != in.c || l.out < 1 || l.stride < 1) {
          throw Error(ErrorCode::ShapeMismatch, where + "conv channels do not match input");
        }
        out = {l.out, conv_out_dim(in.h, l.stride), conv_out_dim(in.w, l.stride)};
        break;
      case LayerKind::Relu:
        break;
      case LayerKind::GlobalAvgPool:
        out = {in.c, 1, 1};
        break;
      case LayerKind::Dense:
        if (static_cast<std::size_t>(l.in) != in.size() || l.out < 1) {
          throw Error(ErrorCode::ShapeMismatch, where + "dense input size does not match");
        }
        out = {l.out, 1, 1};
        break;
      default:
        throw Error(ErrorCode::ShapeMismatch, where + "unknown layer kind");
    }
    shapes.push_back(out);
  }
  return shapes;
}

}  // namespace

void validate_layers(std::span<const LayerSpec> layers) {
  const auto shapes = layer_shapes(layers);
  if (shapes.back().size() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "architecture does not reduce a patch to one value");
  }
}

template <typename T>
BasicScorer<T> init_layers(std::vector<LayerSpec> layers, std::uint64_t seed, std::string arch_id) {
  validate_layers(layers);
  Rng rng(derive_seed(seed, "init"));
  BasicScorer<T> model;
  model.arch_id = std::move(arch_id);
  model.epsilon = kDefaultEpsilon;
  for (const LayerSpec& l : layers) {
    LayerParams<T> p;
    if (l.has_params()) {
      const double fan_in = l.kind == LayerKind::Conv ? l.in * 9.0 : static_cast<double>(l.in);
      const double std = std::sqrt(2.0 / fan_in);
      p.weight.resize(l.weight_count());
      for (auto& w : p.weight) w = static_cast<T>(std * rng.normal());
      p.bias.assign(l.bias_count(), T{0});
    }
    model.params.push_back(std::move(p));
  }
  model.layers = std::move(layers);
  return model;
}

ScorerModel init_model(std::string_view arch_id, std::uint64_t seed) {
  return init_layers<float>(architecture(arch_id), seed, std::string(arch_id));
}

template <typename T>
GradientSet<T> zero_gradients(const BasicScorer<T>& model) {
  GradientSet<T> g;
  for (const auto& p : model.params) {
    g.push_back({std::vector<T>(p.weight.size(), T{0}), std::vector<T>(p.bias.size(), T{0})});
  }
  return g;
}

namespace {

template <typename T>
void conv_forward(const LayerSpec& l, const LayerParams<T>& p, const Shape& is, const Shape& os,
                  const std::vector<T>& in, std::vector<T>& out) {
  out.assign(os.size(), T{0});
  const int s = l.stride;
  for (int oc = 0; oc < os.c; ++oc) {
    T* o = out.data() + static_cast<std::size_t>(oc) * os.h * os.w;
    std::fill(o, o + os.h * os.w, p.bias[oc]);
    for (int ic = 0; ic < is.c; ++ic) {
      const T* src = in.data() + static_cast<std::size_t>(ic) * is.h * is.w;
      const T* wk = p.weight.data() + (static_cast<std::size_t>(oc) * is.c + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T w = wk[ky * 3 + kx];
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * s + ky - 1;
            if (iy < 0 || iy >= is.h) continue;
            const T* row = src + static_cast<std::size_t>(iy) * is.w;
            T* orow = o + static_cast<std::size_t>(oy) * os.w;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * s + kx - 1;
              if (ix < 0 || ix >= is.w) continue;
              orow[ox] += w * row[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const LayerSpec& l, const LayerParams<T>& p, const Shape& is, const Shape& os,
                   const std::vector<T>& in, const std::vector<T>& dout, std::vector<T>& din,
                   LayerParams<T>& g, bool need_din) {
  if (need_din) din.assign(is.size(), T{0});
  const int s = l.stride;
  for (int oc = 0; oc < os.c; ++oc) {
    const T* d = dout.data() + static_cast<std::size_t>(oc) * os.h * os.w;
    T bsum{0};
    for (int i = 0; i < os.h * os.w; ++i) bsum += d[i];
    g.bias[oc] += bsum;
    for (int ic = 0; ic < is.c; ++ic) {
      const T* src = in.data() + static_cast<std::size_t>(ic) * is.h * is.w;
      T* dsrc = need_din ? din.data() + static_cast<std::size_t>(ic) * is.h * is.w : nullptr;
      const std::size_t widx = (static_cast<std::size_t>(oc) * is.c + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T w = p.weight[widx + ky * 3 + kx];
          T gw{0};
          for (int oy = 0; oy < os.h; ++oy) {
            const int iy = oy * s + ky - 1;
            if (iy < 0 || iy >= is.h) continue;
            const T* row = src + static_cast<std::size_t>(iy) * is.w;
            const T* drow = d + static_cast<std::size_t>(oy) * os.w;
            T* dinrow = dsrc ? dsrc + static_cast<std::size_t>(iy) * is.w : nullptr;
            for (int ox = 0; ox < os.w; ++ox) {
              const int ix = ox * s + kx - 1;
              if (ix < 0 || ix >= is.w) continue;
              gw += drow[ox] * row[ix];
              if (dinrow) dinrow[ix] += w * drow[ox];
            }
          }
          g.weight[widx + ky * 3 + kx] += gw;
        }
      }
    }
  }
}

}  // namespace

template <typename T>
T forward(const BasicScorer<T>& model, const Patch& patch, ForwardCache<T>* cache) {
  const auto shapes = layer_shapes(model.layers);
  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.acts.resize(model.layers.size() + 1);

  auto& input = c.acts[0];
  input.resize(kPatchValues);
  for (int ch = 0; ch < kChannels; ++ch) {
    for (int y = 0; y < kPatchSize; ++y) {
      for (int x = 0; x < kPatchSize; ++x) {
        input[(static_cast<std::size_t>(ch) * kPatchSize + y) * kPatchSize + x] =
            static_cast<T>(patch.at(x, y, ch));
      }
    }
  }

  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& l = model.layers[i];
    const Shape& is = shapes[i];
    const Shape& os = shapes[i + 1];
    const auto& in = c.acts[i];
    auto& out = c.acts[i + 1];
    switch (l.kind) {
      case LayerKind::Conv:
        conv_forward(l, model.params[i], is, os, in, out);
        break;
      case LayerKind::Relu:
        out.resize(in.size());
        for (std::size_t k = 0; k < in.size(); ++k) out[k] = in[k] > T{0} ? in[k] : T{0};
        break;
      case LayerKind::GlobalAvgPool: {
        out.assign(os.c, T{0});
        const std::size_t area = static_cast<std::size_t>(is.h) * is.w;
        for (int ch = 0; ch < is.c; ++ch) {
          T sum{0};
          for (std::size_t k = 0; k < area; ++k) sum += in[ch * area + k];
          out[ch] = sum / static_cast<T>(area);
        }
        break;
      }
      case LayerKind::Dense: {
        const auto& p = model.params[i];
        out.assign(l.out, T{0});
        for (int o = 0; o < l.out; ++o) {
          T sum = p.bias[o];
          const T* w = p.weight.data() + static_cast<std::size_t>(o) * l.in;
          for (int k = 0; k < l.in; ++k) sum += w[k] * in[k];
          out[o] = sum;
        }
        break;
      }
    }
  }
  return c.acts.back()[0];
}

template <typename T>
void backpropagate(const BasicScorer<T>& model, const ForwardCache<T>& cache, T upstream,
                   GradientSet<T>& grads) {
  const auto shapes = layer_shapes(model.layers);
  std::vector<T> dout{upstream};
  std::vector<T> din;
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const LayerSpec& l = model.layers[i];
    const Shape& is = shapes[i];
    const Shape& os = shapes[i + 1];
    const auto& in = cache.acts[i];
    // The input gradient of the first layer is never needed.
    const bool need_din = i > 0;
    switch (l.kind) {
      case LayerKind::Conv:
        conv_backward(l, model.params[i], is, os, in, dout, din, grads[i], need_din);
        break;
      case LayerKind::Relu:
        din.resize(in.size());
        for (std::size_t k = 0; k < in.size(); ++k) din[k] = in[k] > T{0} ? dout[k] : T{0};
        break;
      case LayerKind::GlobalAvgPool: {
        const std::size_t area = static_cast<std::size_t>(is.h) * is.w;
        din.resize(is.size());
        for (int ch = 0; ch < is.c; ++ch) {
          const T v = dout[ch] / static_cast<T>(area);
          std::fill(din.begin() + ch * area, din.begin() + (ch + 1) * area, v);
        }
        break;
      }
      case LayerKind::Dense: {
        const auto& p = model.params[i];
        auto& g = grads[i];
        din.assign(l.in, T{0});
        for (int o = 0; o < l.out; ++o) {
          const T d = dout[o];
          g.bias[o] += d;
          const std::size_t row = static_cast<std::size_t>(o) * l.in;
          for (int k = 0; k < l.in; ++k) {
            g.weight[row + k] += d * in[k];
            din[k] += d * p.weight[row + k];
          }
        }
        break;
      }
    }
    std::swap(dout, din);
  }
}

double hinge_squared(double score_a, double score_b, double epsilon) {
  const double violation = std::max(0.0, score_a + epsilon - score_b);
  return violation * violation;
}

template <typename T>
double pair_loss(const BasicScorer<T>& model, const OrderedPair& pair, double epsilon) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  return hinge_squared(forward(model, pair.patch_a), forward(model, pair.patch_b), epsilon);
}

template <typename T>
double batch_loss(const BasicScorer<T>& model, std::span<const OrderedPair> pairs, double epsilon) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "batch_loss of an empty batch");
  double sum = 0.0;
  for (const auto& p : pairs) sum += pair_loss(model, p, epsilon);
  return sum / static_cast<double>(pairs.size());
}

template <typename T>
LossAndGradients<T> backward(const BasicScorer<T>& model, std::span<const OrderedPair> pairs,
                             double epsilon) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyBatch, "backward on an empty batch");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  const std::size_t n = pairs.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> losses(n, 0.0);
  std::vector<GradientSet<T>> per_pair(n);
  parallel_for(n, [&](std::size_t i) {
    ForwardCache<T> ca;
    ForwardCache<T> cb;
    const double fa = forward(model, pairs[i].patch_a, &ca);
    const double fb = forward(model, pairs[i].patch_b, &cb);
    const double violation = fa + epsilon - fb;
    if (violation <= 0.0) return;
    losses[i] = violation * violation;
    per_pair[i] = zero_gradients(model);
    const T up = static_cast<T>(2.0 * violation * inv_n);
    backpropagate(model, ca, up, per_pair[i]);
    backpropagate(model, cb, static_cast<T>(-up), per_pair[i]);
  });

  LossAndGradients<T> result{0.0, zero_gradients(model)};
  for (std::size_t i = 0; i < n; ++i) {
    result.loss += losses[i];
    if (per_pair[i].empty()) continue;
    for (std::size_t l = 0; l < per_pair[i].size(); ++l) {
      auto& dst = result.grads[l];
      const auto& src = per_pair[i][l];
      for (std::size_t k = 0; k < dst.weight.size(); ++k) dst.weight[k] += src.weight[k];
      for (std::size_t k = 0; k < dst.bias.size(); ++k) dst.bias[k] += src.bias[k];
    }
  }
  result.loss *= inv_n;
  return result;
}

#define RANKDIST_INSTANTIATE(T)                                                                  \
  template struct BasicScorer<T>;                                                                \
  template BasicScorer<T> init_layers<T>(std::vector<LayerSpec>, std::uint64_t, std::string);    \
  template GradientSet<T> zero_gradients<T>(const BasicScorer<T>&);                              \
  template T forward<T>(const BasicScorer<T>&, const Patch&, ForwardCache<T>*);                  \
  template void backpropagate<T>(const BasicScorer<T>&, const ForwardCache<T>&, T,               \
                                 GradientSet<T>&);                                               \
  template double pair_loss<T>(const BasicScorer<T>&, const OrderedPair&, double);               \
  template double batch_loss<T>(const BasicScorer<T>&, std::span<const OrderedPair>, double);    \
  template LossAndGradients<T> backward<T>(const BasicScorer<T>&, std::span<const OrderedPair>, \
                                           double);

RANKDIST_INSTANTIATE(float)
RANKDIST_INSTANTIATE(double)

#undef RANKDIST_INSTANTIATE

}  // namespace rankdist
