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

#ifndef SUBMI_ATTACKS_H_
#define SUBMI_ATTACKS_H_

#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "submi/metrics.h"
#include "submi/synthgen.h"

namespace submi {

// Black-box view of one global model: the adversary can only ask for the
// loss of labeled points. Attacks never see parameters.
class LossQuery {
 public:
  virtual ~LossQuery() = default;
  virtual std::vector<double> Losses(std::span<const LabeledPoint> points) const = 0;
};

// losses(i, j) = loss of the round-i model on the subject's j-th sample.
class LossTrace {
 public:
  LossTrace() = default;
  LossTrace(SubjectId subject, size_t rounds, size_t samples);
  LossTrace(SubjectId subject, std::vector<std::vector<double>> rows);

  SubjectId subject_id() const { return subject_; }
  size_t num_rounds() const { return rows_; }  // snapshots, i.e. r + 1
  size_t num_samples() const { return cols_; }
  double at(size_t round, size_t sample) const { return values_[round * cols_ + sample]; }
  double& at(size_t round, size_t sample) { return values_[round * cols_ + sample]; }
  std::span<const double> row(size_t round) const {
    return {values_.data() + round * cols_, cols_};
  }
  double RoundSum(size_t round) const;

 private:
  SubjectId subject_ = 0;
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> values_;
};

using LossTraces = std::map<SubjectId, LossTrace>;

// Queries every round's model on every subject's samples (first
// `max_samples` of each). Throws EmptySamples for a subject without samples.
LossTraces CollectLosses(std::span<const LossQuery* const> rounds,
                         const std::map<SubjectId, std::vector<LabeledPoint>>& samples,
                         size_t max_samples = 100);

enum class AttackKind { kLossThreshold, kLossAcrossRounds };
enum class Objective { kF1, kAccuracy };

std::string_view AttackKindName(AttackKind kind);

struct AttackThresholds {
  double lambda = 0.0;    // loss cutoff (loss-threshold)
  int count_cutoff = 1;   // member iff count >= count_cutoff (loss-threshold)
  int rounds_cutoff = 0;  // member iff score >= rounds_cutoff (across rounds)
};

// Number of samples whose round-`round` loss is <= lambda.
int LossThresholdScore(const LossTrace& trace, double lambda, int round);

// Number of rounds i in 1..last_round whose summed loss is strictly below
// round i-1's. The one-argument form uses every round.
int LossAcrossRoundsScore(const LossTrace& trace, int last_round);
int LossAcrossRoundsScore(const LossTrace& trace);

struct LabeledTrace {
  const LossTrace* trace;
  bool member;
};

double ObjectiveValue(Objective objective, const Metrics& m);

// Loss-threshold: every (lambda, count cutoff) pair over the distinct
// round-`round` validation losses (plus midpoints) and cutoffs 1..samples.
// Across rounds: cutoffs 0..round over the scores of rounds 0..round.
// Returns the best pair for `objective`, preferring smaller thresholds on
// ties. Throws DegenerateValidation unless both classes are present.
AttackThresholds TuneThresholds(AttackKind kind,
                                std::span<const LabeledTrace> validation,
                                Objective objective, int round);

struct SubjectVerdict {
  int score = 0;
  bool verdict = false;
  bool truth = false;
};

struct RoundResult {
  int round = 0;
  AttackThresholds thresholds;
  Metrics metrics;
};

struct AttackReport {
  AttackKind kind = AttackKind::kLossThreshold;
  AttackThresholds thresholds;
  std::map<SubjectId, SubjectVerdict> per_subject;  // test subjects
  Metrics metrics;
  std::vector<RoundResult> per_round;
};

// subject -> is member
using SubjectLabels = std::map<SubjectId, bool>;

// Tunes on `validation` and scores `test` at the last round, then repeats
// tuning and scoring at every earlier round for the per-round trace.
AttackReport RunAttack(AttackKind kind, const LossTraces& traces,
                       const SubjectLabels& validation,
                       const SubjectLabels& test,
                       Objective objective = Objective::kF1);

AttackReport RunAttack(AttackKind kind,
                       std::span<const LossQuery* const> rounds,
                       const std::map<SubjectId, std::vector<LabeledPoint>>& attack_pool,
                       const SubjectLabels& validation,
                       const SubjectLabels& test,
                       Objective objective = Objective::kF1);

}  // namespace submi

#endif  // SUBMI_ATTACKS_H_
