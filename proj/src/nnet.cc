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

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "binary_io.h"
#include "submi/errors.h"

namespace submi {

int MlpSpec::fan_in(size_t layer) const {
  return layer == 0 ? input_dim : hidden[layer - 1];
}

int MlpSpec::fan_out(size_t layer) const {
  return layer < hidden.size() ? hidden[layer] : 1;
}

size_t MlpSpec::num_params() const {
  size_t n = 0;
  for (size_t l = 0; l < num_layers(); ++l) {
    n += static_cast<size_t>(fan_out(l)) * static_cast<size_t>(fan_in(l) + 1);
  }
  return n;
}

void MlpSpec::Validate() const {
  if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
  if (hidden.size() > kMaxHiddenLayers) {
    throw ConfigError("at most " + std::to_string(kMaxHiddenLayers) +
                      " hidden layers are supported");
  }
  for (int width : hidden) {
    if (width < 1) throw ConfigError("hidden layer widths must be >= 1");
  }
}

ModelParams::ModelParams(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.Validate();
  size_t offset = 0;
  for (size_t l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(offset);
    offset += static_cast<size_t>(spec_.fan_out(l)) *
              static_cast<size_t>(spec_.fan_in(l) + 1);
  }
  values_.assign(offset, 0.0);
}

size_t ModelParams::bias_offset(size_t layer) const {
  return offsets_[layer] + static_cast<size_t>(spec_.fan_out(layer)) *
                               static_cast<size_t>(spec_.fan_in(layer));
}

Eigen::Map<Eigen::MatrixXd> ModelParams::weight(size_t layer) {
  return {values_.data() + offsets_[layer], spec_.fan_out(layer),
          spec_.fan_in(layer)};
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::weight(size_t layer) const {
  return {values_.data() + offsets_[layer], spec_.fan_out(layer),
          spec_.fan_in(layer)};
}

Eigen::Map<Eigen::VectorXd> ModelParams::bias(size_t layer) {
  return {values_.data() + bias_offset(layer), spec_.fan_out(layer)};
}

Eigen::Map<const Eigen::VectorXd> ModelParams::bias(size_t layer) const {
  return {values_.data() + bias_offset(layer), spec_.fan_out(layer)};
}

bool ModelParams::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

ModelParams InitializeParams(const MlpSpec& spec, Rng& rng) {
  ModelParams params(spec);
  for (size_t l = 0; l < spec.num_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.fan_in(l) + spec.fan_out(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto w = params.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return params;
}

double BinaryCrossEntropy(double logit, int label) {
  return std::max(logit, 0.0) - logit * label +
         std::log1p(std::exp(-std::abs(logit)));
}

namespace {

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void CheckInputDim(const ModelParams& params, size_t len) {
  if (len != static_cast<size_t>(params.spec().input_dim)) {
    throw DimensionMismatch("input has length " + std::to_string(len) +
                            ", model expects " +
                            std::to_string(params.spec().input_dim));
  }
}

// Runs the network on the columns of `x`. When `inputs` is non-null it
// receives the input of every layer (inputs[0] = x).
Eigen::RowVectorXd ForwardLogits(const ModelParams& params,
                                 Eigen::MatrixXd x,
                                 std::vector<Eigen::MatrixXd>* inputs) {
  const size_t num_layers = params.spec().num_layers();
  Eigen::MatrixXd act = std::move(x);
  for (size_t l = 0; l + 1 < num_layers; ++l) {
    Eigen::MatrixXd z = params.weight(l) * act;
    z.colwise() += params.bias(l);
    if (inputs != nullptr) inputs->push_back(std::move(act));
    act = z.cwiseMax(0.0);
  }
  const size_t last = num_layers - 1;
  Eigen::RowVectorXd logits = params.weight(last) * act;
  logits.array() += params.bias(last)(0);
  if (inputs != nullptr) inputs->push_back(std::move(act));
  return logits;
}

template <typename PointAt>
Eigen::MatrixXd GatherInputs(const ModelParams& params, size_t count,
                             PointAt point_at) {
  const int d = params.spec().input_dim;
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(count));
  for (size_t i = 0; i < count; ++i) {
    const LabeledPoint& p = point_at(i);
    CheckInputDim(params, p.x.size());
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(p.x.data(), d);
  }
  return x;
}

constexpr size_t kEvalChunk = 512;

}  // namespace

double Logit(const ModelParams& params, std::span<const double> x) {
  CheckInputDim(params, x.size());
  Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(
      x.data(), static_cast<Eigen::Index>(x.size()));
  return ForwardLogits(params, std::move(in), nullptr)(0);
}

double Forward(const ModelParams& params, std::span<const double> x) {
  return Sigmoid(Logit(params, x));
}

double PerExampleLoss(const ModelParams& params, const LabeledPoint& point) {
  return BinaryCrossEntropy(Logit(params, point.x), point.label);
}

std::vector<double> PerExampleLosses(const ModelParams& params,
                                     std::span<const LabeledPoint> points) {
  std::vector<double> losses;
  losses.reserve(points.size());
  for (size_t start = 0; start < points.size(); start += kEvalChunk) {
    const size_t count = std::min(kEvalChunk, points.size() - start);
    auto x = GatherInputs(params, count, [&](size_t i) -> const LabeledPoint& {
      return points[start + i];
    });
    const Eigen::RowVectorXd logits = ForwardLogits(params, std::move(x), nullptr);
    for (size_t i = 0; i < count; ++i) {
      losses.push_back(BinaryCrossEntropy(logits(static_cast<Eigen::Index>(i)),
                                          points[start + i].label));
    }
  }
  return losses;
}

std::vector<double> Predictions(const ModelParams& params,
                                std::span<const LabeledPoint> points) {
  std::vector<double> probs;
  probs.reserve(points.size());
  for (size_t start = 0; start < points.size(); start += kEvalChunk) {
    const size_t count = std::min(kEvalChunk, points.size() - start);
    auto x = GatherInputs(params, count, [&](size_t i) -> const LabeledPoint& {
      return points[start + i];
    });
    const Eigen::RowVectorXd logits = ForwardLogits(params, std::move(x), nullptr);
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      probs.push_back(Sigmoid(logits(i)));
    }
  }
  return probs;
}

std::vector<double> PerExampleGradient(const ModelParams& params,
                                       const LabeledPoint& point) {
  const LabeledPoint* batch[] = {&point};
  return BatchBackprop(params, batch).ExampleGradient(0);
}

BatchBackprop::BatchBackprop(const ModelParams& params,
                             std::span<const LabeledPoint* const> batch)
    : params_(&params), batch_size_(batch.size()) {
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const size_t num_layers = params.spec().num_layers();
  auto x = GatherInputs(params, batch.size(),
                        [&](size_t i) -> const LabeledPoint& { return *batch[i]; });
  inputs_.reserve(num_layers);
  const Eigen::RowVectorXd logits = ForwardLogits(params, std::move(x), &inputs_);

  const auto b = static_cast<Eigen::Index>(batch.size());
  deltas_.resize(num_layers);
  Eigen::MatrixXd top(1, b);
  losses_.resize(batch.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = batch[static_cast<size_t>(i)]->label;
    top(0, i) = Sigmoid(logits(i)) - y;
    losses_[static_cast<size_t>(i)] = BinaryCrossEntropy(logits(i), y);
  }
  deltas_[num_layers - 1] = std::move(top);
  for (size_t l = num_layers - 1; l > 0; --l) {
    deltas_[l - 1] = (params.weight(l).transpose() * deltas_[l])
                         .cwiseProduct((inputs_[l].array() > 0.0)
                                           .cast<double>()
                                           .matrix());
  }
}

std::vector<double> BatchBackprop::ExampleGradientNormsSq() const {
  Eigen::RowVectorXd norms =
      Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(batch_size_));
  for (size_t l = 0; l < deltas_.size(); ++l) {
    norms += deltas_[l].colwise().squaredNorm().cwiseProduct(
        (inputs_[l].colwise().squaredNorm().array() + 1.0).matrix());
  }
  return {norms.data(), norms.data() + norms.size()};
}

double BatchBackprop::MeanGradientNormSq(
    std::span<const size_t> examples) const {
  if (examples.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(examples.size());
  double total = 0.0;
  for (size_t l = 0; l < deltas_.size(); ++l) {
    Eigen::MatrixXd d(deltas_[l].rows(), n);
    Eigen::MatrixXd a(inputs_[l].rows(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto col = static_cast<Eigen::Index>(examples[static_cast<size_t>(k)]);
      d.col(k) = deltas_[l].col(col);
      a.col(k) = inputs_[l].col(col);
    }
    const Eigen::MatrixXd gram_d = d.transpose() * d;
    const Eigen::MatrixXd gram_a = a.transpose() * a;
    total += gram_d.cwiseProduct((gram_a.array() + 1.0).matrix()).sum();
  }
  return std::max(0.0, total / static_cast<double>(n * n));
}

std::vector<double> BatchBackprop::WeightedGradient(
    std::span<const double> weights) const {
  if (weights.size() != batch_size_) {
    throw ShapeMismatch("weight count does not match batch size");
  }
  const Eigen::Map<const Eigen::VectorXd> w(
      weights.data(), static_cast<Eigen::Index>(weights.size()));
  std::vector<double> grad(params_->size(), 0.0);
  const MlpSpec& spec = params_->spec();
  for (size_t l = 0; l < deltas_.size(); ++l) {
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + params_->weight_offset(l),
                                   spec.fan_out(l), spec.fan_in(l));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + params_->bias_offset(l),
                                   spec.fan_out(l));
    const Eigen::MatrixXd scaled = deltas_[l] * w.asDiagonal();
    gw.noalias() = scaled * inputs_[l].transpose();
    gb = scaled.rowwise().sum();
  }
  return grad;
}

std::vector<double> BatchBackprop::MeanGradient() const {
  // Sum first, then divide: the DP mechanisms follow the same order so that
  // a disabled mechanism reproduces this result bit for bit.
  const std::vector<double> ones(batch_size_, 1.0);
  std::vector<double> grad = WeightedGradient(ones);
  const auto n = static_cast<double>(batch_size_);
  for (double& g : grad) g /= n;
  return grad;
}

std::vector<double> BatchBackprop::ExampleGradient(size_t example) const {
  const auto col = static_cast<Eigen::Index>(example);
  std::vector<double> grad(params_->size(), 0.0);
  const MlpSpec& spec = params_->spec();
  for (size_t l = 0; l < deltas_.size(); ++l) {
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + params_->weight_offset(l),
                                   spec.fan_out(l), spec.fan_in(l));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + params_->bias_offset(l),
                                   spec.fan_out(l));
    gw.noalias() = deltas_[l].col(col) * inputs_[l].col(col).transpose();
    gb = deltas_[l].col(col);
  }
  return grad;
}

OptimizerState::OptimizerState(const OptimizerConfig& config,
                               size_t num_params)
    : config(config) {
  if (config.kind == OptimizerConfig::Kind::kAdam) {
    first_moment.assign(num_params, 0.0);
    second_moment.assign(num_params, 0.0);
  }
}

void OptimizerStep(OptimizerState& state, ModelParams& params,
                   std::span<const double> grad) {
  if (grad.size() != params.size()) {
    throw ShapeMismatch("gradient length " + std::to_string(grad.size()) +
                        " != parameter count " + std::to_string(params.size()));
  }
  std::span<double> theta = params.values();
  const OptimizerConfig& c = state.config;
  ++state.step_count;
  if (c.kind == OptimizerConfig::Kind::kSgd) {
    for (size_t i = 0; i < theta.size(); ++i) theta[i] -= c.learning_rate * grad[i];
    return;
  }
  if (state.first_moment.size() != theta.size()) {
    throw ShapeMismatch("optimizer state does not match parameters");
  }
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (size_t i = 0; i < theta.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    theta[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

namespace {
constexpr char kCheckpointMagic[9] = "SUBMICKP";
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

void WriteCheckpoint(std::ostream& out, const ModelParams& params) {
  io::PutMagic(out, kCheckpointMagic, kCheckpointVersion);
  const MlpSpec& spec = params.spec();
  io::Put<int32_t>(out, spec.input_dim);
  io::Put<uint32_t>(out, static_cast<uint32_t>(spec.hidden.size()));
  for (int width : spec.hidden) io::Put<int32_t>(out, width);
  io::PutDoubles(out, params.values());
  if (!out) throw FormatError("failed writing checkpoint");
}

ModelParams ReadCheckpoint(std::istream& in) {
  const uint32_t version = io::ExpectMagic(in, kCheckpointMagic);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));
  }
  MlpSpec spec;
  spec.input_dim = io::Get<int32_t>(in);
  const auto layers = io::Get<uint32_t>(in);
  if (layers > MlpSpec::kMaxHiddenLayers) throw FormatError("too many layers");
  for (uint32_t i = 0; i < layers; ++i) spec.hidden.push_back(io::Get<int32_t>(in));
  ModelParams params(spec);
  const std::vector<double> values = io::GetDoubles(in);
  if (values.size() != params.size()) {
    throw FormatError("checkpoint parameter count does not match its spec");
  }
  std::copy(values.begin(), values.end(), params.values().begin());
  return params;
}

}  // namespace submi
