// Copyright 2026 The submi Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "submi/nnet.h"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "submi/errors.h"

namespace submi {
namespace {

LabeledPoint Point(std::vector<double> x, int label) {
  LabeledPoint p;
  p.x = std::move(x);
  p.label = label;
  return p;
}

// Random weights and biases; biases nonzero so their gradients are exercised.
ModelParams RandomParams(const MlpSpec& spec, Rng& rng) {
  ModelParams params(spec);
  std::normal_distribution<double> n(0.0, 0.7);
  for (double& v : params.values()) v = n(rng);
  return params;
}

LabeledPoint RandomPoint(int d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(d);
  for (double& v : x) v = n(rng);
  return Point(std::move(x), static_cast<int>(rng() & 1));
}

double Norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(MlpSpecTest, ParameterCount) {
  MlpSpec spec{3, {4, 2}};
  EXPECT_EQ(spec.num_params(), (3 * 4 + 4) + (4 * 2 + 2) + (2 + 1));
  EXPECT_EQ(MlpSpec({5, {}}).num_params(), 6u);
}

TEST(MlpSpecTest, Validation) {
  EXPECT_NO_THROW(MlpSpec({2, {}}).Validate());
  EXPECT_THROW(MlpSpec({0, {}}).Validate(), ConfigError);
  EXPECT_THROW(MlpSpec({2, {3, 0}}).Validate(), ConfigError);
  EXPECT_THROW(MlpSpec({2, std::vector<int>(9, 2)}).Validate(), ConfigError);
}

TEST(ForwardTest, ZeroParamsGiveHalf) {
  ModelParams params(MlpSpec{3, {4, 2}});
  EXPECT_DOUBLE_EQ(Forward(params, std::vector<double>{1.0, -2.0, 3.0}), 0.5);
  EXPECT_NEAR(PerExampleLoss(params, Point({1, 2, 3}, 1)), std::log(2.0), 1e-15);
  EXPECT_NEAR(PerExampleLoss(params, Point({1, 2, 3}, 0)), 0.6931, 1e-4);
}

TEST(ForwardTest, LogisticRegressionValue) {
  ModelParams params(MlpSpec{2, {}});
  params.weight(0)(0, 0) = 1.0;
  EXPECT_NEAR(Forward(params, std::vector<double>{3.0, 7.0}), 0.9526, 1e-4);
}

TEST(ForwardTest, MonotoneInScore) {
  ModelParams params(MlpSpec{2, {}});
  params.weight(0)(0, 0) = 0.5;
  params.weight(0)(0, 1) = -1.5;
  double prev = 0.0;
  for (double t = -5.0; t <= 5.0; t += 0.5) {
    const double p = Forward(params, std::vector<double>{t, -t});
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(ForwardTest, DimensionMismatchThrows) {
  ModelParams params(MlpSpec{3, {2}});
  EXPECT_THROW(Forward(params, std::vector<double>{1.0, 2.0}), DimensionMismatch);
}

TEST(LossTest, SaturatedLogits) {
  EXPECT_NEAR(BinaryCrossEntropy(20.0, 1), 2.06e-9, 1e-11);
  EXPECT_NEAR(BinaryCrossEntropy(20.0, 0), 20.0, 1e-8);
  EXPECT_TRUE(std::isfinite(BinaryCrossEntropy(800.0, 0)));
  EXPECT_TRUE(std::isfinite(BinaryCrossEntropy(-800.0, 1)));
  EXPECT_GE(BinaryCrossEntropy(-800.0, 0), 0.0);
}

TEST(LossTest, BatchLossesMatchSingle) {
  Rng rng(2);
  MlpSpec spec{4, {5, 3}};
  const ModelParams params = RandomParams(spec, rng);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 1100; ++i) pts.push_back(RandomPoint(4, rng));
  const auto losses = PerExampleLosses(params, pts);
  const auto probs = Predictions(params, pts);
  ASSERT_EQ(losses.size(), pts.size());
  for (size_t i = 0; i < pts.size(); i += 37) {
    EXPECT_NEAR(losses[i], PerExampleLoss(params, pts[i]), 1e-12);
    EXPECT_NEAR(probs[i], Forward(params, pts[i].x), 1e-12);
    EXPECT_GE(losses[i], 0.0);
  }
}

TEST(GradientTest, MatchesFiniteDifferences) {
  Rng rng(123);
  std::uniform_int_distribution<int> dim(1, 10), width(1, 8), depth(0, 2);
  const double h = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    MlpSpec spec;
    spec.input_dim = dim(rng);
    const int layers = depth(rng);
    if (layers >= 1) spec.hidden.push_back(width(rng));
    if (layers >= 2) spec.hidden.push_back(std::uniform_int_distribution<int>(1, 4)(rng));
    ModelParams params = RandomParams(spec, rng);
    const LabeledPoint p = RandomPoint(spec.input_dim, rng);

    const auto grad = PerExampleGradient(params, p);
    ASSERT_EQ(grad.size(), params.size());
    std::vector<double> fd(params.size());
    for (size_t k = 0; k < params.size(); ++k) {
      const double orig = params.values()[k];
      params.values()[k] = orig + h;
      const double up = PerExampleLoss(params, p);
      params.values()[k] = orig - h;
      const double down = PerExampleLoss(params, p);
      params.values()[k] = orig;
      fd[k] = (up - down) / (2 * h);
    }
    std::vector<double> diff(grad.size());
    for (size_t k = 0; k < grad.size(); ++k) diff[k] = grad[k] - fd[k];
    const double scale = std::max(Norm(fd), 1e-8);
    EXPECT_LT(Norm(diff) / scale, 1e-3) << "trial " << trial;
  }
}

TEST(GradientTest, LogisticClosedForm) {
  ModelParams params(MlpSpec{3, {}});
  params.weight(0) << 0.2, -0.4, 1.1;
  params.bias(0)(0) = 0.3;
  const LabeledPoint p = Point({1.0, 2.0, -0.5}, 1);
  const double s = 1.0 / (1.0 + std::exp(-(0.2 - 0.8 - 0.55 + 0.3)));
  const auto g = PerExampleGradient(params, p);
  ASSERT_EQ(g.size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], (s - 1.0) * p.x[i], 1e-14);
  EXPECT_NEAR(g[3], s - 1.0, 1e-14);
}

TEST(GradientTest, SaturatedPredictionHasTinyGradient) {
  ModelParams params(MlpSpec{2, {}});
  params.weight(0)(0, 0) = 20.0;
  EXPECT_LT(Norm(PerExampleGradient(params, Point({1.0, 0.5}, 1))), 1e-6);
  params.weight(0)(0, 0) = -20.0;
  EXPECT_LT(Norm(PerExampleGradient(params, Point({1.0, 0.5}, 0))), 1e-6);
}

class BatchBackpropTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(77);
    params_ = RandomParams(MlpSpec{6, {7, 4}}, rng);
    for (int i = 0; i < 13; ++i) points_.push_back(RandomPoint(6, rng));
    for (const auto& p : points_) ptrs_.push_back(&p);
  }
  ModelParams params_;
  std::vector<LabeledPoint> points_;
  std::vector<const LabeledPoint*> ptrs_;
};

TEST_F(BatchBackpropTest, MeanEqualsMeanOfExampleGradients) {
  BatchBackprop bp(params_, ptrs_);
  const auto mean = bp.MeanGradient();
  std::vector<double> ref(params_.size(), 0.0);
  for (const auto& p : points_) {
    const auto g = PerExampleGradient(params_, p);
    for (size_t k = 0; k < g.size(); ++k) ref[k] += g[k] / points_.size();
  }
  const double scale = Norm(ref);
  for (size_t k = 0; k < ref.size(); ++k) {
    EXPECT_NEAR(mean[k], ref[k], 1e-10 * scale);
  }
}

TEST_F(BatchBackpropTest, ExampleGradientsAndLosses) {
  BatchBackprop bp(params_, ptrs_);
  for (size_t i = 0; i < points_.size(); ++i) {
    const auto ref = PerExampleGradient(params_, points_[i]);
    const auto g = bp.ExampleGradient(i);
    for (size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(g[k], ref[k], 1e-12);
    EXPECT_NEAR(bp.losses()[i], PerExampleLoss(params_, points_[i]), 1e-12);
  }
}

TEST_F(BatchBackpropTest, NormsMatchExplicitGradients) {
  BatchBackprop bp(params_, ptrs_);
  const auto norms = bp.ExampleGradientNormsSq();
  for (size_t i = 0; i < points_.size(); ++i) {
    const double n = Norm(PerExampleGradient(params_, points_[i]));
    EXPECT_NEAR(norms[i], n * n, 1e-10 * std::max(1.0, n * n));
  }
  const std::vector<size_t> group = {0, 3, 4, 9};
  std::vector<double> mean(params_.size(), 0.0);
  for (size_t i : group) {
    const auto g = PerExampleGradient(params_, points_[i]);
    for (size_t k = 0; k < g.size(); ++k) mean[k] += g[k] / group.size();
  }
  const double n = Norm(mean);
  EXPECT_NEAR(bp.MeanGradientNormSq(group), n * n, 1e-10 * std::max(1.0, n * n));
}

TEST_F(BatchBackpropTest, WeightedGradient) {
  BatchBackprop bp(params_, ptrs_);
  std::vector<double> w(points_.size());
  for (size_t i = 0; i < w.size(); ++i) w[i] = 0.1 * static_cast<double>(i) - 0.4;
  const auto got = bp.WeightedGradient(w);
  std::vector<double> ref(params_.size(), 0.0);
  for (size_t i = 0; i < points_.size(); ++i) {
    const auto g = PerExampleGradient(params_, points_[i]);
    for (size_t k = 0; k < g.size(); ++k) ref[k] += w[i] * g[k];
  }
  for (size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(got[k], ref[k], 1e-12);
}

TEST(InitTest, GlorotBoundsAndZeroBias) {
  Rng rng(5);
  MlpSpec spec{10, {6, 3}};
  const ModelParams params = InitializeParams(spec, rng);
  for (size_t l = 0; l < spec.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (spec.fan_in(l) + spec.fan_out(l)));
    EXPECT_LE(params.weight(l).cwiseAbs().maxCoeff(), limit);
    EXPECT_GT(params.weight(l).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(params.bias(l).cwiseAbs().maxCoeff(), 0.0);
  }
  Rng rng2(5);
  EXPECT_EQ(InitializeParams(spec, rng2), params);
}

TEST(OptimizerTest, SgdStep) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerConfig::Kind::kSgd;
  cfg.learning_rate = 0.1;
  ModelParams params(MlpSpec{1, {}});  // one weight and one bias
  params.values()[0] = 1.0;
  OptimizerState state(cfg, params.size());
  const std::vector<double> g = {2.0, 0.0};
  OptimizerStep(state, params, g);
  EXPECT_DOUBLE_EQ(params.values()[0], 0.8);
  EXPECT_EQ(state.step_count, 1);
}

TEST(OptimizerTest, AdamZeroGradientLeavesParams) {
  ModelParams params(MlpSpec{2, {}});
  params.values()[0] = 0.25;
  const ModelParams before = params;
  OptimizerState state(OptimizerConfig{}, params.size());
  OptimizerStep(state, params, std::vector<double>(params.size(), 0.0));
  EXPECT_EQ(params, before);
  EXPECT_EQ(state.step_count, 1);
  EXPECT_EQ(state.first_moment.size(), params.size());
}

TEST(OptimizerTest, AdamFirstStepMagnitude) {
  ModelParams params(MlpSpec{1, {}});
  params.values()[0] = 1.0;
  OptimizerState state(OptimizerConfig{}, params.size());
  OptimizerStep(state, params, std::vector<double>{1.0, 0.0});
  const double delta = std::abs(params.values()[0] - 1.0);
  EXPECT_GT(delta, 0.0009);
  EXPECT_LE(delta, 0.001);
  EXPECT_NEAR(delta, 0.001 / (1.0 + 1e-8), 1e-15);
}

TEST(OptimizerTest, ShapeMismatchThrows) {
  ModelParams params(MlpSpec{2, {}});
  OptimizerState state(OptimizerConfig{}, params.size());
  EXPECT_THROW(OptimizerStep(state, params, std::vector<double>{1.0}), ShapeMismatch);
}

TEST(OptimizerTest, AdamDeterministicTrajectory) {
  auto run = [] {
    Rng rng(9);
    MlpSpec spec{3, {4}};
    ModelParams params = InitializeParams(spec, rng);
    OptimizerState state(OptimizerConfig{}, params.size());
    std::vector<LabeledPoint> pts;
    for (int i = 0; i < 20; ++i) pts.push_back(RandomPoint(3, rng));
    std::vector<const LabeledPoint*> ptrs;
    for (const auto& p : pts) ptrs.push_back(&p);
    for (int step = 0; step < 50; ++step) {
      BatchBackprop bp(params, ptrs);
      OptimizerStep(state, params, bp.MeanGradient());
    }
    return params;
  };
  EXPECT_EQ(run(), run());
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  Rng rng(4);
  const ModelParams params = RandomParams(MlpSpec{5, {3, 2}}, rng);
  std::stringstream buf;
  WriteCheckpoint(buf, params);
  EXPECT_EQ(ReadCheckpoint(buf), params);
}

TEST(CheckpointTest, RejectsTruncated) {
  Rng rng(4);
  const ModelParams params = RandomParams(MlpSpec{5, {3}}, rng);
  std::stringstream buf;
  WriteCheckpoint(buf, params);
  std::string data = buf.str();
  data.resize(data.size() - 5);
  std::stringstream cut(data);
  EXPECT_THROW(ReadCheckpoint(cut), FormatError);
}

}  // namespace
}  // namespace submi
