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

#include "submi/fedsim.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "submi/errors.h"

namespace submi {

void RoundConfig::Validate() const {
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) {
    throw ConfigError("participation must lie in (0, 1]");
  }
  if (!(optimizer.learning_rate >= 0.0)) {
    throw ConfigError("learning rate must be >= 0");
  }
}

namespace {

bool MechanismDisabled(const DpConfig& dp) {
  return dp.noise_multiplier == 0.0 && std::isinf(dp.clip_threshold);
}

}  // namespace

ModelParams LocalTrain(const ModelParams& global, const UserShard& shard,
                       const RoundConfig& rc, const std::optional<DpConfig>& dp,
                       uint64_t client_seed) {
  if (shard.points.empty()) {
    throw EmptyShard("user " + std::to_string(shard.user_id) + " has no data");
  }
  rc.Validate();
  ModelParams params = global;
  OptimizerState optimizer(rc.optimizer, params.size());
  Rng data_rng(DeriveSeed(client_seed, {kClientStream}));

  const DpGranularity granularity =
      dp ? dp->granularity : DpGranularity::kUser;
  // A disabled mechanism means plain training at every granularity; subject
  // averaging alone would still reweight subjects.
  const bool batch_dp =
      dp && granularity != DpGranularity::kUser && !MechanismDisabled(*dp);

  std::vector<size_t> order(shard.points.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const auto batch_size = static_cast<size_t>(rc.batch_size);
  std::vector<const LabeledPoint*> batch;
  std::vector<SubjectId> subjects;
  for (int epoch = 0; epoch < rc.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), data_rng);
    uint64_t batch_index = 0;
    for (size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      subjects.clear();
      for (size_t i = start; i < end; ++i) {
        batch.push_back(&shard.points[order[i]]);
        subjects.push_back(shard.points[order[i]].subject_id);
      }
      const BatchBackprop backprop(params, batch);
      std::vector<double> grad;
      if (!batch_dp) {
        grad = backprop.MeanGradient();
      } else {
        Rng noise_rng(DeriveSeed(
            client_seed,
            {kNoiseStream, static_cast<uint64_t>(epoch), batch_index}));
        grad = granularity == DpGranularity::kItem
                   ? ItemDpGradient(backprop, *dp, noise_rng)
                   : SubjectDpGradient(backprop, subjects, *dp, noise_rng);
      }
      OptimizerStep(optimizer, params, grad);
    }
  }

  if (dp && granularity == DpGranularity::kUser && !MechanismDisabled(*dp)) {
    std::vector<double> delta(params.size());
    const auto before = global.values();
    const auto after = params.values();
    for (size_t i = 0; i < delta.size(); ++i) delta[i] = after[i] - before[i];
    Rng noise_rng(DeriveSeed(client_seed, {kNoiseStream, ~uint64_t{0}}));
    const std::vector<double> noised = UserDpUpdate(delta, *dp, noise_rng);
    auto out = params.values();
    for (size_t i = 0; i < out.size(); ++i) out[i] = before[i] + noised[i];
  }
  return params;
}

ModelParams Aggregate(
    std::span<const std::pair<const ModelParams*, double>> updates) {
  if (updates.empty()) throw ShapeMismatch("nothing to aggregate");
  const ModelParams& first = *updates.front().first;
  double total = 0.0;
  for (const auto& [params, weight] : updates) {
    if (!(params->spec() == first.spec())) {
      throw ShapeMismatch("updates have different model shapes");
    }
    if (!(weight > 0.0)) throw ConfigError("aggregation weights must be > 0");
    total += weight;
  }
  ModelParams out(first.spec());
  auto acc = out.values();
  for (const auto& [params, weight] : updates) {
    const double w = weight / total;
    const auto v = params->values();
    for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
  }
  return out;
}

std::vector<size_t> SelectClients(size_t num_users, double participation,
                                  uint64_t seed, int round) {
  std::vector<size_t> ids(num_users);
  std::iota(ids.begin(), ids.end(), size_t{0});
  const auto count = static_cast<size_t>(
      std::ceil(participation * static_cast<double>(num_users) - 1e-9));
  if (count >= num_users) return ids;
  Rng rng(DeriveSeed(seed, {kSelectStream, static_cast<uint64_t>(round)}));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::max<size_t>(count, 1));
  std::sort(ids.begin(), ids.end());
  return ids;
}

uint64_t ClientSeed(uint64_t seed, int round, UserId user) {
  return DeriveSeed(seed, {kClientStream, static_cast<uint64_t>(round), user});
}

std::vector<ModelSnapshot> TrainFederation(
    const Federation& fed, const MlpSpec& model, const RoundConfig& rc,
    int rounds, const std::optional<DpConfig>& dp, uint64_t seed,
    const SnapshotCallback& on_snapshot) {
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (fed.shards.empty()) throw EmptyShard("federation has no users");
  rc.Validate();
  if (dp) dp->Validate();

  Rng init_rng(DeriveSeed(seed, {kInitStream}));
  std::vector<ModelSnapshot> snapshots;
  snapshots.reserve(static_cast<size_t>(rounds) + 1);
  snapshots.push_back({0, InitializeParams(model, init_rng)});
  if (on_snapshot) on_snapshot(snapshots.back());

  for (int round = 1; round <= rounds; ++round) {
    const ModelParams& global = snapshots.back().params;
    const std::vector<size_t> selected =
        SelectClients(fed.shards.size(), rc.participation, seed, round);
    std::vector<ModelParams> locals;
    locals.reserve(selected.size());
    for (size_t u : selected) {
      const UserShard& shard = fed.shards[u];
      locals.push_back(
          LocalTrain(global, shard, rc, dp, ClientSeed(seed, round, shard.user_id)));
    }
    std::vector<std::pair<const ModelParams*, double>> updates;
    for (size_t k = 0; k < selected.size(); ++k) {
      updates.emplace_back(
          &locals[k], static_cast<double>(fed.shards[selected[k]].points.size()));
    }
    snapshots.push_back({round, Aggregate(updates)});
    if (on_snapshot) on_snapshot(snapshots.back());
  }
  return snapshots;
}

void SaveSnapshots(const std::filesystem::path& dir,
                   std::span<const ModelSnapshot> snapshots) {
  std::filesystem::create_directories(dir);
  for (const auto& snap : snapshots) {
    const auto path = dir / ("round_" + std::to_string(snap.round));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    WriteCheckpoint(out, snap.params);
  }
}

std::vector<ModelSnapshot> LoadSnapshots(const std::filesystem::path& dir) {
  std::vector<ModelSnapshot> snapshots;
  for (int round = 0;; ++round) {
    const auto path = dir / ("round_" + std::to_string(round));
    if (!std::filesystem::exists(path)) break;
    std::ifstream in(path, std::ios::binary);
    snapshots.push_back({round, ReadCheckpoint(in)});
  }
  if (snapshots.empty()) {
    throw FormatError("no snapshots found under " + dir.string());
  }
  return snapshots;
}

}  // namespace submi
