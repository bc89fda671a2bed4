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

#ifndef SUBMI_FEDSIM_H_
#define SUBMI_FEDSIM_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "submi/dpcore.h"
#include "submi/nnet.h"
#include "submi/synthgen.h"

namespace submi {

// Global model after `round` rounds; round 0 is the initialization.
struct ModelSnapshot {
  int round = 0;
  ModelParams params;
};

struct RoundConfig {
  int local_epochs = 1;
  int batch_size = 512;
  OptimizerConfig optimizer;
  double participation = 1.0;  // fraction of users selected per round

  void Validate() const;  // throws ConfigError
};

// Client step: copies `global`, runs `local_epochs` passes of shuffled
// mini-batch optimization over the shard and returns the new parameters.
// Item- and subject-level DP replace the batch gradient; user-level DP
// clips and noises the final delta before it leaves the client. The
// optimizer state is fresh on every call. All randomness derives from
// `client_seed`.
ModelParams LocalTrain(const ModelParams& global, const UserShard& shard,
                       const RoundConfig& rc, const std::optional<DpConfig>& dp,
                       uint64_t client_seed);

// Coordinate-wise mean weighted by the (normalized) weights, accumulated in
// list order. Throws ShapeMismatch if the parameter shapes differ.
ModelParams Aggregate(
    std::span<const std::pair<const ModelParams*, double>> updates);

// Clients selected for `round`, ascending by user id.
std::vector<size_t> SelectClients(size_t num_users, double participation,
                                  uint64_t seed, int round);

uint64_t ClientSeed(uint64_t seed, int round, UserId user);

using SnapshotCallback = std::function<void(const ModelSnapshot&)>;

// FedAvg with every round's global model recorded. Returns rounds + 1
// snapshots.
std::vector<ModelSnapshot> TrainFederation(
    const Federation& fed, const MlpSpec& model, const RoundConfig& rc,
    int rounds, const std::optional<DpConfig>& dp, uint64_t seed,
    const SnapshotCallback& on_snapshot = nullptr);

// snapshots/round_{i} files in the checkpoint format.
void SaveSnapshots(const std::filesystem::path& dir,
                   std::span<const ModelSnapshot> snapshots);
std::vector<ModelSnapshot> LoadSnapshots(const std::filesystem::path& dir);

}  // namespace submi

#endif  // SUBMI_FEDSIM_H_
