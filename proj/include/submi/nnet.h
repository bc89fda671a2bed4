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

#ifndef SUBMI_NNET_H_
#define SUBMI_NNET_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "submi/rng.h"
#include "submi/synthgen.h"

namespace submi {

// Fully connected ReLU network with a single output logit. An empty hidden
// list is logistic regression.
struct MlpSpec {
  static constexpr size_t kMaxHiddenLayers = 8;

  int input_dim = 1;
  std::vector<int> hidden;

  size_t num_layers() const { return hidden.size() + 1; }
  int fan_in(size_t layer) const;
  int fan_out(size_t layer) const;
  size_t num_params() const;
  void Validate() const;  // throws ConfigError
  bool operator==(const MlpSpec&) const = default;
};

// Parameters stored as one flat vector. Layer l owns a column-major weight
// matrix (fan_out x fan_in) followed by its bias vector.
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(MlpSpec spec);  // all zeros

  const MlpSpec& spec() const { return spec_; }
  size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  Eigen::Map<Eigen::MatrixXd> weight(size_t layer);
  Eigen::Map<const Eigen::MatrixXd> weight(size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(size_t layer) const;

  size_t weight_offset(size_t layer) const { return offsets_[layer]; }
  size_t bias_offset(size_t layer) const;

  bool AllFinite() const;
  bool operator==(const ModelParams& other) const {
    return spec_ == other.spec_ && values_ == other.values_;
  }

 private:
  MlpSpec spec_;
  std::vector<double> values_;
  std::vector<size_t> offsets_;
};

// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
ModelParams InitializeParams(const MlpSpec& spec, Rng& rng);

// Numerically stable binary cross-entropy on a logit.
double BinaryCrossEntropy(double logit, int label);

double Logit(const ModelParams& params, std::span<const double> x);
// Probability of label 1. Throws DimensionMismatch on a wrong input length.
double Forward(const ModelParams& params, std::span<const double> x);
double PerExampleLoss(const ModelParams& params, const LabeledPoint& point);
std::vector<double> PerExampleLosses(const ModelParams& params,
                                     std::span<const LabeledPoint> points);
std::vector<double> Predictions(const ModelParams& params,
                                std::span<const LabeledPoint> points);
std::vector<double> PerExampleGradient(const ModelParams& params,
                                       const LabeledPoint& point);

// One forward and backward pass over a batch, keeping the per-layer inputs
// and output deltas so that per-example gradients (and their norms) can be
// formed without materializing one full gradient per example.
//
// The gradient of example i w.r.t. layer l is delta_l[:, i] * a_l[:, i]^T
// for the weights and delta_l[:, i] for the bias.
class BatchBackprop {
 public:
  BatchBackprop(const ModelParams& params,
                std::span<const LabeledPoint* const> batch);

  size_t batch_size() const { return batch_size_; }
  std::span<const double> losses() const { return losses_; }

  // Squared L2 norm of every per-example gradient.
  std::vector<double> ExampleGradientNormsSq() const;
  // Squared L2 norm of the mean gradient over `examples`.
  double MeanGradientNormSq(std::span<const size_t> examples) const;
  // sum_i weights[i] * grad_i, as a flat parameter-shaped vector.
  std::vector<double> WeightedGradient(std::span<const double> weights) const;
  std::vector<double> MeanGradient() const;
  std::vector<double> ExampleGradient(size_t example) const;

 private:
  const ModelParams* params_;
  size_t batch_size_;
  std::vector<Eigen::MatrixXd> inputs_;  // a_l, fan_in(l) x B
  std::vector<Eigen::MatrixXd> deltas_;  // delta_l, fan_out(l) x B
  std::vector<double> losses_;
};

struct OptimizerConfig {
  enum class Kind { kSgd, kAdam };

  Kind kind = Kind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  OptimizerState(const OptimizerConfig& config, size_t num_params);

  OptimizerConfig config;
  int64_t step_count = 0;
  std::vector<double> first_moment;   // Adam only
  std::vector<double> second_moment;  // Adam only
};

// Applies one update in place. Throws ShapeMismatch when lengths differ.
void OptimizerStep(OptimizerState& state, ModelParams& params,
                   std::span<const double> grad);

// Versioned checkpoint: spec header followed by the raw parameter bits.
void WriteCheckpoint(std::ostream& out, const ModelParams& params);
ModelParams ReadCheckpoint(std::istream& in);

}  // namespace submi

#endif  // SUBMI_NNET_H_
