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

#ifndef SUBMI_HARNESS_H_
#define SUBMI_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "submi/attacks.h"
#include "submi/dpcore.h"
#include "submi/fedsim.h"
#include "submi/metrics.h"
#include "submi/nnet.h"
#include "submi/synthgen.h"

namespace submi {

using Json = nlohmann::json;

// One experiment. Grid fields must stay inside the studied value sets
// unless `custom` is set.
struct ExperimentConfig {
  GeneratorConfig data;
  std::vector<int> hidden = {128, 32, 8};
  int rounds = 20;
  RoundConfig training;
  std::optional<DpConfig> dp;
  int validation_subject_count = 100;  // per class
  std::vector<AttackKind> attacks = {AttackKind::kLossThreshold,
                                     AttackKind::kLossAcrossRounds};
  Objective objective = Objective::kF1;
  uint64_t seed = 0;
  bool save_snapshots = false;
  bool custom = false;

  MlpSpec model() const { return {data.d, hidden}; }
  void Validate() const;  // throws ConfigError
};

// Strict JSON mapping: unknown keys and wrong types are ConfigErrors.
// Missing keys keep their defaults.
Json ConfigToJson(const ExperimentConfig& cfg);
ExperimentConfig ConfigFromJson(const Json& j);
ExperimentConfig LoadConfig(const std::filesystem::path& path);

// FNV-1a 64 over the canonical JSON encoding (keys sorted, compact).
uint64_t ConfigHash(const ExperimentConfig& cfg);
std::string HexHash(uint64_t hash);

// The example configurations A-F (10,000 items per user). Throws
// ConfigError for an unknown name.
ExperimentConfig PresetConfig(std::string_view name);

std::string SamplingName(const SamplingMode& mode);

struct AttackSplit {
  SubjectLabels validation;
  SubjectLabels test;
};

// `per_class` members and `per_class` non-members go to validation, the
// rest to test. Throws InsufficientSubjects unless each class keeps at
// least one test subject.
AttackSplit SplitAttackSubjects(const std::set<SubjectId>& members,
                                const std::set<SubjectId>& nonmembers,
                                int per_class, Rng& rng);

// Adapts a model snapshot to the black-box loss interface.
class SnapshotLossQuery : public LossQuery {
 public:
  explicit SnapshotLossQuery(const ModelParams& params) : params_(&params) {}
  std::vector<double> Losses(std::span<const LabeledPoint> points) const override {
    return PerExampleLosses(*params_, points);
  }

 private:
  const ModelParams* params_;
};

double MeanLoss(const ModelParams& params, const Federation& fed);
double Accuracy(const ModelParams& params, std::span<const LabeledPoint> points);

struct RoundStats {
  int round = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string config_hash;
  uint64_t seed = 0;
  size_t members = 0;
  size_t nonmembers = 0;
  size_t validation_subjects = 0;
  size_t test_subjects = 0;
  std::vector<RoundStats> rounds;
  std::map<AttackKind, AttackReport> attacks;
  std::optional<double> epsilon;
  double wall_seconds = 0.0;

  double final_accuracy() const { return rounds.back().test_accuracy; }
};

Json ReportToJson(const ExperimentReport& report);

using ProgressFn = std::function<void(std::string_view)>;

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  ProgressFn progress;
};

// Builds the federation, trains it, measures the model per round, splits
// the attack subjects and runs the configured attacks.
ExperimentReport RunExperiment(const ExperimentConfig& cfg,
                               const RunOptions& options = {});

// Same, on an existing federation and snapshot sequence.
ExperimentReport EvaluateExperiment(const ExperimentConfig& cfg,
                                    const Federation& fed,
                                    std::span<const ModelSnapshot> snapshots,
                                    const RunOptions& options = {});

// Output files of one experiment: report.json (written last, atomically),
// per_round.csv and one subjects/rounds CSV pair per attack.
void WriteExperimentOutputs(const std::filesystem::path& dir,
                            const ExperimentReport& report);

// Writes `content` to a temp file next to `path` and renames it over.
void WriteFileAtomic(const std::filesystem::path& path, std::string_view content);

std::string FormatCsvDouble(double value);  // 6 significant digits

// ---------------------------------------------------------------------------
// Grid sweeps.

struct GridSpec {
  ExperimentConfig base;
  // Axis name -> values (JSON scalars or hidden-layer lists). Supported axes:
  // d, sampling, hidden, rounds, users, subjects_per_user, items_per_user,
  // access_mode, validation_subject_count.
  std::vector<std::pair<std::string, std::vector<Json>>> axes;
  uint64_t master_seed = 0;
  // Extra seeds per config (>= 1); seed index is mixed into the derived seed.
  int repeats = 1;
};

GridSpec GridFromJson(const Json& j);
// The full cross-product of the studied values (432 configs).
GridSpec TableGrid(const ExperimentConfig& base, uint64_t master_seed);

// Every config of the cross-product, each with its derived seed.
std::vector<ExperimentConfig> ExpandGrid(const GridSpec& grid);

struct GridOutcome {
  size_t executed = 0;
  size_t skipped = 0;
  size_t failed = 0;
};

// Runs every config under out_dir/runs/<hash>/, skipping ones whose
// report.json exists, then rewrites out_dir/grid.csv. Failures are appended
// to out_dir/failures.csv and never stop the sweep.
GridOutcome RunGrid(const GridSpec& grid, int parallelism,
                    const std::filesystem::path& out_dir,
                    const ProgressFn& progress = nullptr);

// Collects every runs/*/report.json under `dir` into dir/grid.csv.
// Returns the number of rows.
size_t AggregateReports(const std::filesystem::path& dir);

}  // namespace submi

#endif  // SUBMI_HARNESS_H_
