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

#include "submi/dpcore.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "submi/errors.h"

namespace submi {

void DpConfig::Validate() const {
  if (!(clip_threshold > 0.0)) throw ConfigError("clip threshold must be > 0");
  if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
    throw ConfigError("noise multiplier must be finite and >= 0");
  }
  if (noise_multiplier > 0.0 && std::isinf(clip_threshold)) {
    throw ConfigError("noise requires a finite clip threshold");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
}

namespace {

double ClipFactor(double norm_sq, double c) {
  if (std::isinf(c) || norm_sq <= c * c) return 1.0;
  return c / std::sqrt(norm_sq);
}

}  // namespace

void ClipInPlace(std::span<double> v, double c) {
  if (!(c > 0.0)) throw ConfigError("clip threshold must be > 0");
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  const double factor = ClipFactor(norm_sq, c);
  if (factor == 1.0) return;
  for (double& x : v) x *= factor;
}

std::vector<double> Clip(std::span<const double> v, double c) {
  std::vector<double> out(v.begin(), v.end());
  ClipInPlace(out, c);
  return out;
}

void AddGaussianNoise(std::span<double> v, double stddev, Rng& rng) {
  if (stddev == 0.0) return;
  std::normal_distribution<double> normal(0.0, stddev);
  for (double& x : v) x += normal(rng);
}

std::vector<double> ItemDpGradient(const BatchBackprop& backprop,
                                   const DpConfig& dp, Rng& noise_rng) {
  std::vector<double> weights(backprop.batch_size(), 1.0);
  if (!std::isinf(dp.clip_threshold)) {
    const std::vector<double> norms = backprop.ExampleGradientNormsSq();
    for (size_t i = 0; i < weights.size(); ++i) {
      weights[i] = ClipFactor(norms[i], dp.clip_threshold);
    }
  }
  std::vector<double> grad = backprop.WeightedGradient(weights);
  AddGaussianNoise(grad, dp.noise_stddev(), noise_rng);
  const auto n = static_cast<double>(backprop.batch_size());
  for (double& g : grad) g /= n;
  return grad;
}

std::vector<double> ItemDpBatchGradient(
    const ModelParams& params, std::span<const LabeledPoint* const> batch,
    const DpConfig& dp, Rng& noise_rng) {
  return ItemDpGradient(BatchBackprop(params, batch), dp, noise_rng);
}

std::vector<double> SubjectClippedSum(const BatchBackprop& backprop,
                                      std::span<const SubjectId> subjects,
                                      double clip_threshold,
                                      size_t* num_subjects) {
  if (subjects.size() != backprop.batch_size()) {
    throw ShapeMismatch("one subject id per batch example is required");
  }
  std::map<SubjectId, std::vector<size_t>> groups;
  for (size_t i = 0; i < subjects.size(); ++i) groups[subjects[i]].push_back(i);

  std::vector<double> weights(subjects.size(), 0.0);
  for (const auto& [subject, members] : groups) {
    const double factor =
        std::isinf(clip_threshold)
            ? 1.0
            : ClipFactor(backprop.MeanGradientNormSq(members), clip_threshold);
    const double w = factor / static_cast<double>(members.size());
    for (size_t i : members) weights[i] = w;
  }
  if (num_subjects != nullptr) *num_subjects = groups.size();
  return backprop.WeightedGradient(weights);
}

std::vector<double> SubjectDpGradient(const BatchBackprop& backprop,
                                      std::span<const SubjectId> subjects,
                                      const DpConfig& dp, Rng& noise_rng) {
  size_t num_subjects = 0;
  std::vector<double> grad =
      SubjectClippedSum(backprop, subjects, dp.clip_threshold, &num_subjects);
  AddGaussianNoise(grad, dp.noise_stddev(), noise_rng);
  const auto n = static_cast<double>(num_subjects);
  for (double& g : grad) g /= n;
  return grad;
}

std::vector<double> SubjectDpBatchGradient(
    const ModelParams& params, std::span<const LabeledPoint* const> batch,
    const DpConfig& dp, Rng& noise_rng) {
  std::vector<const LabeledPoint*> ordered(batch.begin(), batch.end());
  std::sort(ordered.begin(), ordered.end(),
            [](const LabeledPoint* a, const LabeledPoint* b) {
              if (a->subject_id != b->subject_id) return a->subject_id < b->subject_id;
              return a->record_id < b->record_id;
            });
  std::vector<SubjectId> subjects;
  subjects.reserve(ordered.size());
  for (const LabeledPoint* p : ordered) subjects.push_back(p->subject_id);
  return SubjectDpGradient(BatchBackprop(params, ordered), subjects, dp,
                           noise_rng);
}

std::vector<double> UserDpUpdate(std::span<const double> delta,
                                 const DpConfig& dp, Rng& noise_rng) {
  std::vector<double> out(delta.begin(), delta.end());
  if (!std::isinf(dp.clip_threshold)) ClipInPlace(out, dp.clip_threshold);
  AddGaussianNoise(out, dp.noise_stddev(), noise_rng);
  return out;
}

// ---------------------------------------------------------------------------
// RDP accounting for the sampled Gaussian mechanism.

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(exp(a) - exp(b)) for a >= b.
double LogSub(double a, double b) {
  if (b == kNegInf) return a;
  if (a <= b) return kNegInf;
  return a + std::log1p(-std::exp(b - a));
}

double LogErfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  // Asymptotic expansion; erfc underflows past ~26.
  const double x2 = x * x;
  return -x2 - std::log(x) - 0.5 * std::log(std::numbers::pi) +
         std::log1p(-1.0 / (2.0 * x2) + 3.0 / (4.0 * x2 * x2));
}

double LogBinomialInt(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log A_alpha for integer alpha.
double LogAInt(double q, double sigma, int alpha) {
  double log_a = kNegInf;
  for (int i = 0; i <= alpha; ++i) {
    const double log_coef = LogBinomialInt(alpha, i) + i * std::log(q) +
                            (alpha - i) * std::log1p(-q);
    const double s = log_coef + (i * i - i) / (2.0 * sigma * sigma);
    log_a = LogAdd(log_a, s);
  }
  return log_a;
}

// log A_alpha for fractional alpha (two-sided series).
double LogAFrac(double q, double sigma, double alpha) {
  double log_a0 = kNegInf;
  double log_a1 = kNegInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  double coef = 1.0;  // generalized binomial(alpha, i)
  for (int i = 0;; ++i) {
    if (i > 0) coef *= (alpha - (i - 1)) / static_cast<double>(i);
    const double log_coef = std::log(std::abs(coef));
    const double j = alpha - i;
    const double log_t0 = log_coef + i * std::log(q) + j * std::log1p(-q);
    const double log_t1 = log_coef + j * std::log(q) + i * std::log1p(-q);
    const double log_e0 =
        std::log(0.5) + LogErfc((i - z0) / (std::numbers::sqrt2 * sigma));
    const double log_e1 =
        std::log(0.5) + LogErfc((z0 - j) / (std::numbers::sqrt2 * sigma));
    const double log_s0 = log_t0 + (i * i - i) / (2.0 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2.0 * sigma * sigma) + log_e1;
    if (coef > 0) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if ((std::max(log_s0, log_s1) < -30.0 && i > alpha) || i > 10000) break;
  }
  return LogAdd(log_a0, log_a1);
}

constexpr std::array<double, 70> MakeOrders() {
  std::array<double, 70> orders{};
  constexpr double kFractional[] = {1.5, 1.75, 2.0, 2.25, 2.5, 2.75,
                                    3.0, 3.5,  4.0, 4.5};
  size_t n = 0;
  for (double o : kFractional) orders[n++] = o;
  for (int o = 5; o <= 64; ++o) orders[n++] = o;
  return orders;
}

constexpr std::array<double, 70> kOrders = MakeOrders();

}  // namespace

std::span<const double> RdpOrders() { return kOrders; }

double SampledGaussianRdp(double sampling_rate, double noise_multiplier,
                          double order) {
  if (!(sampling_rate > 0.0 && sampling_rate <= 1.0)) {
    throw ConfigError("sampling rate must lie in (0, 1]");
  }
  if (noise_multiplier <= 0.0) throw NoiseRequired("RDP needs sigma > 0");
  if (!(order > 1.0)) throw ConfigError("RDP order must be > 1");
  if (sampling_rate == 1.0) {
    return order / (2.0 * noise_multiplier * noise_multiplier);
  }
  const double log_a =
      order == std::floor(order)
          ? LogAInt(sampling_rate, noise_multiplier, static_cast<int>(order))
          : LogAFrac(sampling_rate, noise_multiplier, order);
  return log_a / (order - 1.0);
}

double ReportEpsilon(const DpConfig& dp, double sampling_rate, int64_t steps) {
  if (dp.noise_multiplier <= 0.0) {
    throw NoiseRequired("epsilon is unbounded without noise");
  }
  if (steps < 1) throw ConfigError("steps must be >= 1");
  double best = std::numeric_limits<double>::infinity();
  for (double order : kOrders) {
    const double rdp =
        static_cast<double>(steps) *
        SampledGaussianRdp(sampling_rate, dp.noise_multiplier, order);
    const double eps = rdp + std::log(1.0 / dp.delta) / (order - 1.0);
    best = std::min(best, eps);
  }
  return best;
}

}  // namespace submi
