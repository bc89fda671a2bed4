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

#ifndef SUBMI_DPCORE_H_
#define SUBMI_DPCORE_H_

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "submi/nnet.h"
#include "submi/rng.h"
#include "submi/synthgen.h"

namespace submi {

enum class DpGranularity { kItem, kUser, kSubject };

// Gaussian mechanism settings. The noise standard deviation is
// noise_multiplier * clip_threshold. noise_multiplier = 0 together with an
// infinite clip threshold disables the mechanism.
struct DpConfig {
  static constexpr double kNoClipping = std::numeric_limits<double>::infinity();

  DpGranularity granularity = DpGranularity::kItem;
  double clip_threshold = kNoClipping;
  double noise_multiplier = 0.0;
  double delta = 1e-5;
  bool report_epsilon = false;

  double noise_stddev() const {
    return noise_multiplier == 0.0 ? 0.0 : noise_multiplier * clip_threshold;
  }
  void Validate() const;  // throws ConfigError
};

// v * min(1, c / ||v||_2). The zero vector is returned unchanged.
std::vector<double> Clip(std::span<const double> v, double c);
void ClipInPlace(std::span<double> v, double c);
void AddGaussianNoise(std::span<double> v, double stddev, Rng& rng);

// DP-SGD: (sum_j clip(g_j, C) + N(0, (sigma C)^2 I)) / |batch|.
std::vector<double> ItemDpGradient(const BatchBackprop& backprop,
                                   const DpConfig& dp, Rng& noise_rng);
std::vector<double> ItemDpBatchGradient(
    const ModelParams& params, std::span<const LabeledPoint* const> batch,
    const DpConfig& dp, Rng& noise_rng);

// Pre-noise sum of the per-subject clipped mean gradients, with subjects in
// ascending id order. `subjects[i]` is the subject of batch example i.
// Writes the number of distinct subjects to `num_subjects` when non-null.
std::vector<double> SubjectClippedSum(const BatchBackprop& backprop,
                                      std::span<const SubjectId> subjects,
                                      double clip_threshold,
                                      size_t* num_subjects = nullptr);

// Hierarchical gradient averaging: average the per-example gradients of each
// subject in the batch, clip each average to C, sum, add N(0, (sigma C)^2 I)
// and divide by the number of distinct subjects.
std::vector<double> SubjectDpGradient(const BatchBackprop& backprop,
                                      std::span<const SubjectId> subjects,
                                      const DpConfig& dp, Rng& noise_rng);
// Same, from raw points. The batch is put in (subject, record) order first,
// so the result does not depend on the order of `batch`.
std::vector<double> SubjectDpBatchGradient(
    const ModelParams& params, std::span<const LabeledPoint* const> batch,
    const DpConfig& dp, Rng& noise_rng);

// User-level local DP on a model delta: clip(delta, C) + N(0, (sigma C)^2 I).
std::vector<double> UserDpUpdate(std::span<const double> delta,
                                 const DpConfig& dp, Rng& noise_rng);

// Renyi DP of one step of the sampled Gaussian mechanism at `order`.
double SampledGaussianRdp(double sampling_rate, double noise_multiplier,
                          double order);

// The order grid the accountant minimizes over (1.5 ... 64).
std::span<const double> RdpOrders();

// Epsilon at dp.delta after `steps` compositions of the sampled Gaussian
// mechanism with rate `sampling_rate`, via the RDP-to-(eps, delta)
// conversion minimized over RdpOrders(). Throws NoiseRequired when sigma = 0.
double ReportEpsilon(const DpConfig& dp, double sampling_rate, int64_t steps);

}  // namespace submi

#endif  // SUBMI_DPCORE_H_
