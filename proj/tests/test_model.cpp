// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "gradcheck.hpp"
#include "rankdist/model.hpp"
#include "rankdist/ranking.hpp"
#include "support.hpp"

namespace rankdist {
namespace {

using test::TempDir;

// Plain nested-loop evaluation of the layer list with explicit zero padding.
double reference_forward(const BasicScorer<double>& m, const Patch& patch) {
  int c = 3, h = 32, w = 32;
  std::vector<double> act(3 * 32 * 32);
  for (int ch = 0; ch < 3; ++ch) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) act[(ch * 32 + y) * 32 + x] = patch.at(x, y, ch);
    }
  }
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    const auto& p = m.params[i];
    if (l.kind == LayerKind::Conv) {
      const int oh = (h + l.stride - 1) / l.stride, ow = (w + l.stride - 1) / l.stride;
      std::vector<double> out(static_cast<std::size_t>(l.out) * oh * ow);
      for (int o = 0; o < l.out; ++o) {
        for (int y = 0; y < oh; ++y) {
          for (int x = 0; x < ow; ++x) {
            double s = p.bias[o];
            for (int ic = 0; ic < l.in; ++ic) {
              for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                  const int sy = y * l.stride + ky - 1, sx = x * l.stride + kx - 1;
                  if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                  s += p.weight[((o * l.in + ic) * 3 + ky) * 3 + kx] * act[(ic * h + sy) * w + sx];
                }
              }
            }
            out[(o * oh + y) * ow + x] = s;
          }
        }
      }
      act = std::move(out);
      c = l.out, h = oh, w = ow;
    } else if (l.kind == LayerKind::Relu) {
      for (double& v : act) v = std::max(v, 0.0);
    } else if (l.kind == LayerKind::GlobalAvgPool) {
      std::vector<double> out(c, 0.0);
      for (int ch = 0; ch < c; ++ch) {
        for (int k = 0; k < h * w; ++k) out[ch] += act[ch * h * w + k];
        out[ch] /= h * w;
      }
      act = std::move(out);
      h = w = 1;
    } else {
      std::vector<double> out(l.out);
      for (int o = 0; o < l.out; ++o) {
        out[o] = p.bias[o];
        for (int k = 0; k < l.in; ++k) out[o] += p.weight[o * l.in + k] * act[k];
      }
      act = std::move(out);
      c = l.out, h = w = 1;
    }
  }
  return act[0];
}

Patch constant_patch(float r, float g = 0.0f, float b = 0.0f) {
  Patch p;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      p.at(x, y, 0) = r;
      p.at(x, y, 1) = g;
      p.at(x, y, 2) = b;
    }
  }
  return p;
}

// f(patch) = mean red value.
BasicScorer<double> mean_red_model() {
  BasicScorer<double> m =
      init_layers<double>({LayerSpec::global_avg_pool(), LayerSpec::dense(3, 1)}, 0);
  m.params[1].weight = {1.0, 0.0, 0.0};
  m.params[1].bias = {0.0};
  return m;
}

OrderedPair pair_of(const Patch& a, const Patch& b) {
  OrderedPair p;
  p.patch_a = a;
  p.patch_b = b;
  return p;
}

TEST(InitModel, DeterministicAndShaped) {
  const ScorerModel a = init_model(kSmallV1, 7);
  EXPECT_EQ(a, init_model(kSmallV1, 7));
  EXPECT_NE(a, init_model(kSmallV1, 8));
  EXPECT_EQ(a.layers, architecture(kSmallV1));
  EXPECT_EQ(a.parameter_count(), 3u * 8 * 9 + 8 + 8u * 16 * 9 + 16 + 16u * 32 * 9 + 32 + 32 + 1);
  for (const auto& p : a.params) {
    for (float b : p.bias) EXPECT_EQ(b, 0.0f);
  }
  EXPECT_ERROR_CODE(init_model("resnet-104", 1), ErrorCode::UnknownArch);
}

TEST(InitModel, HeNormalScale) {
  // conv3 has 16 * 9 = 144 inputs per unit and 4608 weights
  const ScorerModel m = init_model(kSmallV1, 3);
  const auto& w = m.params[4].weight;
  double sum = 0, sq = 0;
  for (float v : w) {
    sum += v;
    sq += double(v) * v;
  }
  const double mean = sum / w.size();
  const double sd = std::sqrt(sq / w.size() - mean * mean);
  EXPECT_NEAR(sd, std::sqrt(2.0 / 144), 0.1 * std::sqrt(2.0 / 144));
  EXPECT_NEAR(mean, 0.0, 0.01);
}

TEST(ValidateLayers, RejectsBadShapes) {
  EXPECT_ERROR_CODE(validate_layers(std::vector{LayerSpec::conv(4, 8, 1)}), ErrorCode::ShapeMismatch);
  EXPECT_ERROR_CODE(validate_layers(std::vector{LayerSpec::global_avg_pool()}), ErrorCode::ShapeMismatch);
  EXPECT_ERROR_CODE(validate_layers(std::vector{LayerSpec::global_avg_pool(), LayerSpec::dense(4, 1)}),
                    ErrorCode::ShapeMismatch);
  EXPECT_NO_THROW(validate_layers(std::vector{LayerSpec::dense(3072, 1)}));
}

TEST(Forward, ZeroWeightsScoreZero) {
  ScorerModel m = init_model(kSmallV1, 1);
  for (auto& p : m.params) {
    std::fill(p.weight.begin(), p.weight.end(), 0.0f);
    std::fill(p.bias.begin(), p.bias.end(), 0.0f);
  }
  Rng rng(2);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(forward(m, test::random_patch(rng)), 0.0f);
}

TEST(Forward, MatchesScalarReference) {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const BasicScorer<double> m = test::random_small_model(rng);
    const Patch p = test::random_patch(rng);
    EXPECT_NEAR(forward(m, p), reference_forward(m, p), 1e-12);
  }
  const BasicScorer<double> big = cast_model<double>(init_model(kSmallV1, 4));
  const Patch p = test::random_patch(rng);
  EXPECT_NEAR(forward(big, p), reference_forward(big, p), 1e-12);
}

TEST(Forward, HandSetConvOnConstantPatch) {
  // one 3x3 conv of all-ones weights with zero padding, averaged: interior
  // pixels see 9 taps per channel, edges 6, corners 4
  BasicScorer<double> m = init_layers<double>(
      {LayerSpec::conv(3, 1, 1), LayerSpec::global_avg_pool(), LayerSpec::dense(1, 1)}, 0);
  std::fill(m.params[0].weight.begin(), m.params[0].weight.end(), 1.0);
  m.params[0].bias = {0.5};
  m.params[2].weight = {2.0};
  m.params[2].bias = {-1.0};
  const Patch p = constant_patch(0.25f, 0.5f, 0.25f);
  const double taps = 30.0 * 30 * 9 + 4 * 30 * 6 + 4 * 4;  // summed over the 32x32 map
  const double expected = 2.0 * (taps * (0.25 + 0.5 + 0.25) / 1024 + 0.5) - 1.0;
  EXPECT_NEAR(forward(m, p), expected, 1e-12);
}

TEST(Forward, FloatModelIsDeterministicAndThreadSafe) {
  const ScorerModel m = init_model(kSmallV1, 5);
  Rng rng(6);
  std::vector<Patch> patches;
  for (int i = 0; i < 8; ++i) patches.push_back(test::random_patch(rng));
  std::vector<float> serial;
  for (const auto& p : patches) serial.push_back(forward(m, p));
  std::vector<float> threaded(patches.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < patches.size(); ++i) pool.emplace_back([&, i] { threaded[i] = forward(m, patches[i]); });
  }
  EXPECT_EQ(serial, threaded);
  const BasicScorer<double> d = cast_model<double>(m);
  EXPECT_NEAR(forward(m, patches[0]), forward(d, patches[0]), 1e-5);
}

TEST(Loss, HingeExamples) {
  EXPECT_EQ(hinge_squared(0.0, 1.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(hinge_squared(1.0, 0.0, 0.05), 1.1025);
  for (double c : {-3.0, 0.0, 0.7, 12.5}) EXPECT_NEAR(hinge_squared(c, c, 0.2), 0.04, 1e-15);
}

TEST(Loss, ZeroExactlyWhenMarginHolds) {
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    // dyadic values keep every sum exact
    const double a = static_cast<double>(rng.index(64)) / 16;
    const double b = static_cast<double>(rng.index(64)) / 16;
    const double eps = static_cast<double>(1 + rng.index(8)) / 8;
    EXPECT_EQ(hinge_squared(a, b, eps) == 0.0, b >= a + eps);
    const double c = static_cast<double>(rng.index(64)) / 4 - 8;
    EXPECT_EQ(hinge_squared(a + c, b + c, eps), hinge_squared(a, b, eps));
  }
}

TEST(Loss, PairAndBatchLoss) {
  const BasicScorer<double> m = mean_red_model();
  const OrderedPair wrong = pair_of(constant_patch(1.0f), constant_patch(0.0f));
  const OrderedPair right = pair_of(constant_patch(0.0f), constant_patch(1.0f));
  EXPECT_DOUBLE_EQ(pair_loss(m, wrong, 0.05), 1.1025);
  EXPECT_EQ(pair_loss(m, right, 0.05), 0.0);
  const std::vector<OrderedPair> both{right, wrong};
  EXPECT_DOUBLE_EQ(batch_loss(m, std::span<const OrderedPair>(both), 0.05), 0.55125);
  EXPECT_EQ(batch_loss(m, std::span<const OrderedPair>(&wrong, 1), 0.05), pair_loss(m, wrong, 0.05));
  EXPECT_ERROR_CODE(batch_loss(m, std::span<const OrderedPair>(), 0.05), ErrorCode::EmptyBatch);
  EXPECT_ERROR_CODE(backward(m, std::span<const OrderedPair>(), 0.05), ErrorCode::EmptyBatch);
}

TEST(Loss, BiasShiftKeepsOrderingAndLoss) {
  Rng rng(9);
  const BasicScorer<double> m = test::random_small_model(rng);
  BasicScorer<double> shifted = m;
  shifted.params.back().bias[0] += 0.75;
  const auto pairs = test::random_pairs(20, rng);
  for (const auto& p : pairs) {
    EXPECT_NEAR(pair_loss(m, p, 0.3), pair_loss(shifted, p, 0.3), 1e-12);
    const PatchScorer f = [&](const Patch& x) { return forward(m, x); };
    const PatchScorer g = [&](const Patch& x) { return forward(shifted, x); };
    EXPECT_EQ(order_patch_pair(f, p.patch_a, p.patch_b), order_patch_pair(g, p.patch_a, p.patch_b));
  }
}

TEST(Backward, LossMatchesBatchLoss) {
  Rng rng(10);
  const BasicScorer<double> m = test::random_small_model(rng);
  const auto pairs = test::random_pairs(6, rng);
  EXPECT_NEAR(backward(m, std::span<const OrderedPair>(pairs), 0.4).loss,
              batch_loss(m, std::span<const OrderedPair>(pairs), 0.4), 1e-15);
}

TEST(Backward, SatisfiedMarginGivesZeroGradient) {
  const BasicScorer<double> m = mean_red_model();
  const std::vector<OrderedPair> pairs{pair_of(constant_patch(0.1f), constant_patch(0.9f)),
                                       pair_of(constant_patch(0.0f), constant_patch(0.5f))};
  const auto r = backward(m, std::span<const OrderedPair>(pairs), 0.2);
  EXPECT_EQ(r.loss, 0.0);
  for (const auto& g : r.grads) {
    for (double v : g.weight) EXPECT_EQ(v, 0.0);
    for (double v : g.bias) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, DuplicatedPairEqualsSinglePair) {
  Rng rng(11);
  const ScorerModel m = init_model(kSmallV1, 12);
  const auto one = test::random_pairs(1, rng);
  const std::vector<OrderedPair> two{one[0], one[0]};
  const auto g1 = backward(m, std::span<const OrderedPair>(one), 1.0);
  const auto g2 = backward(m, std::span<const OrderedPair>(two), 1.0);
  ASSERT_GT(g1.loss, 0.0);
  EXPECT_EQ(g1.grads, g2.grads);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const test::SmoothCase c = test::check_smooth_case(rng, 3);
    EXPECT_EQ(c.result.skipped_kinks, 0u);
    EXPECT_GT(c.result.checked, 0u);
    EXPECT_EQ(c.result.failures, 0u) << "worst relative error " << c.result.worst_relative;
  }
}

TEST(Backward, SmallV1MatchesFiniteDifferences) {
  Rng rng(13);
  const BasicScorer<double> m = cast_model<double>(init_model(kSmallV1, 14));
  const auto pairs = test::random_pairs(2, rng);
  const auto r = test::check_gradients(m, pairs, 1.0);
  EXPECT_EQ(r.failures, 0u) << "worst relative error " << r.worst_relative;
  EXPECT_GT(r.checked, 5000u);
}

TEST(Backward, IndependentOfWorkerCount) {
  Rng rng(15);
  const ScorerModel m = init_model(kSmallV1, 16);
  const auto pairs = test::random_pairs(16, rng);
  setenv("RANKDIST_THREADS", "1", 1);
  const auto a = backward(m, std::span<const OrderedPair>(pairs), 1.0);
  setenv("RANKDIST_THREADS", "3", 1);
  const auto b = backward(m, std::span<const OrderedPair>(pairs), 1.0);
  unsetenv("RANKDIST_THREADS");
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grads, b.grads);
}

TEST(Training, OverfitsOneTinyBatch) {
  Rng rng(17);
  auto pairs = test::random_pairs(8, rng);
  // B = A plus a red cast, so an ordering exists
  for (auto& p : pairs) {
    p.patch_b = p.patch_a;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) p.patch_b.at(x, y, 0) = std::min(1.0f, p.patch_b.at(x, y, 0) + 0.3f);
    }
  }
  BasicScorer<double> m = cast_model<double>(init_model(kSmallV1, 18));
  double previous = batch_loss(m, std::span<const OrderedPair>(pairs), 0.1);
  double loss = previous;
  int step = 0;
  for (; step < 500 && loss >= 1e-3; ++step) {
    const auto r = backward(m, std::span<const OrderedPair>(pairs), 0.1);
    for (std::size_t l = 0; l < m.params.size(); ++l) {
      for (std::size_t k = 0; k < m.params[l].weight.size(); ++k) m.params[l].weight[k] -= 0.05 * r.grads[l].weight[k];
      for (std::size_t k = 0; k < m.params[l].bias.size(); ++k) m.params[l].bias[k] -= 0.05 * r.grads[l].bias[k];
    }
    loss = batch_loss(m, std::span<const OrderedPair>(pairs), 0.1);
    EXPECT_LE(loss, previous + 1e-12) << "step " << step;
    previous = loss;
  }
  EXPECT_LT(loss, 1e-3) << "after " << step << " steps";
}

// Patches whose mean intensity encodes their level.
std::vector<OrderedPair> separable_pairs(std::size_t n, Rng& rng) {
  std::vector<OrderedPair> out(n);
  auto make = [&](double level) {
    Patch p;
    const double mean = 0.1 + 0.16 * level;
    for (float& v : p.data) v = static_cast<float>(mean + rng.uniform(-0.05, 0.05));
    return p;
  };
  for (auto& pair : out) {
    double a = rng.uniform(0, 5), b = rng.uniform(0, 5);
    while (std::abs(a - b) < 0.25) b = rng.uniform(0, 5);
    if (b < a) std::swap(a, b);
    pair.patch_a = make(a);
    pair.patch_b = make(b);
    pair.spec_a.level = a;
    pair.spec_b.level = b;
  }
  return out;
}

TEST(Training, LearnsSeparableToyTask) {
  Rng rng(19);
  const auto train_pairs = separable_pairs(800, rng);
  const auto val_pairs = separable_pairs(200, rng);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.eval_every = 25;
  cfg.seed = 1;
  const TrainResult r = train(init_model(kSmallV1, 20), train_pairs, val_pairs, cfg);
  ASSERT_FALSE(r.history.empty());
  double best = 0;
  for (const auto& e : r.history) best = std::max(best, e.val_tp);
  EXPECT_GE(best, 99.0);
  EXPECT_EQ(tp_rate(r.model, val_pairs), best);
}

TEST(Training, DeterministicAndZeroEpochs) {
  Rng rng(21);
  const auto train_pairs = separable_pairs(96, rng);
  const auto val_pairs = separable_pairs(32, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.eval_every = 4;
  cfg.seed = 5;
  const ScorerModel init = init_model(kSmallV1, 22);
  const TrainResult a = train(init, train_pairs, val_pairs, cfg);
  const TrainResult b = train(init, train_pairs, val_pairs, cfg);
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.history.size(), b.history.size());
  EXPECT_EQ(a.history.size(), 3u);  // batches 4, 8 and the final 12
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].batch, b.history[i].batch);
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_tp, b.history[i].val_tp);
  }

  cfg.epochs = 0;
  const TrainResult z = train(init, train_pairs, val_pairs, cfg);
  EXPECT_TRUE(z.history.empty());
  EXPECT_EQ(z.model, init);
}

TEST(Training, Errors) {
  Rng rng(23);
  const auto pairs = separable_pairs(16, rng);
  TrainConfig cfg;
  EXPECT_ERROR_CODE(train(init_model(kSmallV1, 1), {}, pairs, cfg), ErrorCode::EmptySplit);
  EXPECT_ERROR_CODE(train(init_model(kSmallV1, 1), pairs, {}, cfg), ErrorCode::EmptySplit);
  cfg.learning_rate = 1e30;
  cfg.momentum = 0.0;
  cfg.epochs = 50;
  EXPECT_ERROR_CODE(train(init_model(kSmallV1, 1), pairs, pairs, cfg), ErrorCode::DivergenceDetected);
  cfg = {};
  cfg.epsilon = 0.0;
  EXPECT_ERROR_CODE(train(init_model(kSmallV1, 1), pairs, pairs, cfg), ErrorCode::InvalidArgument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir d("ckpt");
  ScorerModel m = init_model(kSmallV1, 30);
  m.epsilon = 0.37;
  m.params.back().bias[0] = -1.25e-7f;
  save_checkpoint(m, d / "m.rkds");
  EXPECT_EQ(load_checkpoint(d / "m.rkds"), m);
  const std::string bytes = test::read_bytes(d / "m.rkds");
  EXPECT_EQ(bytes.substr(0, 4), "RKDS");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_FALSE(std::filesystem::exists(d / "m.rkds.tmp"));
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  TempDir d("ckpt_bad");
  const ScorerModel m = init_model(kSmallV1, 31);
  save_checkpoint(m, d / "m.rkds");
  const std::string good = test::read_bytes(d / "m.rkds");

  auto write = [&](const std::string& name, const std::string& bytes) {
    std::ofstream(d / name, std::ios::binary) << bytes;
    return d / name;
  };
  EXPECT_ERROR_CODE(load_checkpoint(write("trunc", good.substr(0, good.size() - 7))), ErrorCode::CorruptData);
  EXPECT_ERROR_CODE(load_checkpoint(write("header_only", good.substr(0, 10))), ErrorCode::CorruptData);
  EXPECT_ERROR_CODE(load_checkpoint(write("tiny", "RK")), ErrorCode::VersionMismatch);

  std::string magic = good;
  magic[0] = 'X';
  EXPECT_ERROR_CODE(load_checkpoint(write("magic", magic)), ErrorCode::VersionMismatch);

  std::string version = good;
  version[4] = 2;
  EXPECT_ERROR_CODE(load_checkpoint(write("version", version)), ErrorCode::VersionMismatch);

  EXPECT_ERROR_CODE(load_checkpoint(write("trailing", good + "x")), ErrorCode::CorruptData);
  EXPECT_ERROR_CODE(load_checkpoint(d / "absent"), ErrorCode::FileNotFound);
  EXPECT_ERROR_CODE(save_checkpoint(m, "/nonexistent/dir/m.rkds"), ErrorCode::IoError);
}

TEST(Checkpoint, ShapeMismatchIsDetected) {
  TempDir d("ckpt_shape");
  ScorerModel m = init_model(kSmallV1, 32);
  // a custom architecture under the small-v1 name
  ScorerModel other = init_layers<float>({LayerSpec::global_avg_pool(), LayerSpec::dense(3, 1)}, 1, std::string(kSmallV1));
  save_checkpoint(other, d / "renamed.rkds");
  EXPECT_ERROR_CODE(load_checkpoint(d / "renamed.rkds"), ErrorCode::ShapeMismatch);
  // custom architectures round-trip under their own id
  other.arch_id = "custom";
  save_checkpoint(other, d / "custom.rkds");
  EXPECT_EQ(load_checkpoint(d / "custom.rkds"), other);
  (void)m;
}

}  // namespace
}  // namespace rankdist
