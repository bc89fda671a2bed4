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

#include "submi/attacks.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "submi/errors.h"

namespace submi {

LossTrace::LossTrace(SubjectId subject, size_t rounds, size_t samples)
    : subject_(subject), rows_(rounds), cols_(samples), values_(rounds * samples) {}

LossTrace::LossTrace(SubjectId subject, std::vector<std::vector<double>> rows)
    : subject_(subject), rows_(rows.size()), cols_(rows.empty() ? 0 : rows[0].size()) {
  values_.reserve(rows_ * cols_);
  for (const auto& row : rows) {
    if (row.size() != cols_) throw ShapeMismatch("ragged loss trace");
    values_.insert(values_.end(), row.begin(), row.end());
  }
}

double LossTrace::RoundSum(size_t round) const {
  double sum = 0.0;
  for (double v : row(round)) sum += v;
  return sum;
}

namespace {

LossTrace CollectOne(std::span<const LossQuery* const> rounds, SubjectId subject,
                     const std::vector<LabeledPoint>& points, size_t max_samples) {
  if (points.empty()) {
    throw EmptySamples("subject " + std::to_string(subject) + " has no samples");
  }
  const size_t n = std::min(points.size(), max_samples);
  const std::span<const LabeledPoint> used(points.data(), n);
  LossTrace trace(subject, rounds.size(), n);
  for (size_t r = 0; r < rounds.size(); ++r) {
    const std::vector<double> losses = rounds[r]->Losses(used);
    for (size_t j = 0; j < n; ++j) trace.at(r, j) = losses[j];
  }
  return trace;
}

}  // namespace

LossTraces CollectLosses(std::span<const LossQuery* const> rounds,
                         const std::map<SubjectId, std::vector<LabeledPoint>>& samples,
                         size_t max_samples) {
  if (rounds.empty()) throw ConfigError("no model snapshots to query");
  LossTraces traces;
  for (const auto& [subject, points] : samples) {
    traces.emplace(subject, CollectOne(rounds, subject, points, max_samples));
  }
  return traces;
}

std::string_view AttackKindName(AttackKind kind) {
  return kind == AttackKind::kLossThreshold ? "loss-threshold"
                                            : "loss-across-rounds";
}

int LossThresholdScore(const LossTrace& trace, double lambda, int round) {
  if (round < 0 || static_cast<size_t>(round) >= trace.num_rounds()) {
    throw RoundOutOfRange("round " + std::to_string(round) + " outside [0, " +
                          std::to_string(static_cast<int>(trace.num_rounds()) - 1) +
                          "]");
  }
  int count = 0;
  for (double loss : trace.row(static_cast<size_t>(round))) {
    if (loss <= lambda) ++count;
  }
  return count;
}

int LossAcrossRoundsScore(const LossTrace& trace, int last_round) {
  if (trace.num_rounds() < 2 || last_round < 1) {
    throw TooFewRounds("loss-across-rounds needs at least two snapshots");
  }
  if (static_cast<size_t>(last_round) >= trace.num_rounds()) {
    throw RoundOutOfRange("round " + std::to_string(last_round) +
                          " beyond the trace");
  }
  int decreases = 0;
  double previous = trace.RoundSum(0);
  for (int i = 1; i <= last_round; ++i) {
    const double current = trace.RoundSum(static_cast<size_t>(i));
    if (current < previous) ++decreases;
    previous = current;
  }
  return decreases;
}

int LossAcrossRoundsScore(const LossTrace& trace) {
  return LossAcrossRoundsScore(trace, static_cast<int>(trace.num_rounds()) - 1);
}

double ObjectiveValue(Objective objective, const Metrics& m) {
  return objective == Objective::kF1 ? m.f1 : m.accuracy;
}

namespace {

void CheckBothClasses(std::span<const LabeledTrace> validation) {
  const auto members = std::count_if(validation.begin(), validation.end(),
                                     [](const LabeledTrace& t) { return t.member; });
  if (members == 0 || members == static_cast<long>(validation.size())) {
    throw DegenerateValidation(
        "threshold tuning needs at least one member and one non-member");
  }
}

AttackThresholds TuneLossThreshold(std::span<const LabeledTrace> validation,
                                   Objective objective, int round) {
  struct Event {
    double loss;
    size_t subject;
  };
  std::vector<Event> events;
  size_t max_samples = 0;
  int64_t members = 0;
  for (size_t s = 0; s < validation.size(); ++s) {
    const LossTrace& trace = *validation[s].trace;
    if (round < 0 || static_cast<size_t>(round) >= trace.num_rounds()) {
      throw RoundOutOfRange("tuning round outside the trace");
    }
    for (double loss : trace.row(static_cast<size_t>(round))) events.push_back({loss, s});
    max_samples = std::max(max_samples, trace.num_samples());
    if (validation[s].member) ++members;
  }
  const int64_t nonmembers = static_cast<int64_t>(validation.size()) - members;
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.loss < b.loss; });

  std::vector<double> candidates;
  for (size_t i = 0; i < events.size(); ++i) {
    if (i > 0 && events[i].loss == events[i - 1].loss) continue;
    if (!candidates.empty()) {
      candidates.push_back(0.5 * (candidates.back() + events[i].loss));
    }
    candidates.push_back(events[i].loss);
  }

  // Histogram of current counts per class; counts only grow as lambda does.
  std::vector<int64_t> hist_member(max_samples + 1, 0);
  std::vector<int64_t> hist_nonmember(max_samples + 1, 0);
  hist_member[0] = members;
  hist_nonmember[0] = nonmembers;
  std::vector<size_t> count(validation.size(), 0);
  std::vector<int64_t> tp(max_samples + 2, 0);
  std::vector<int64_t> fp(max_samples + 2, 0);

  AttackThresholds best;
  double best_value = -1.0;
  size_t next = 0;
  for (double lambda : candidates) {
    while (next < events.size() && events[next].loss <= lambda) {
      const size_t s = events[next].subject;
      auto& hist = validation[s].member ? hist_member : hist_nonmember;
      --hist[count[s]];
      ++hist[++count[s]];
      ++next;
    }
    for (size_t c = max_samples + 1; c-- > 1;) {
      tp[c] = tp[c + 1] + hist_member[c];
      fp[c] = fp[c + 1] + hist_nonmember[c];
    }
    for (size_t cutoff = 1; cutoff <= max_samples; ++cutoff) {
      const Metrics m = MetricsFromCounts(tp[cutoff], fp[cutoff],
                                          nonmembers - fp[cutoff],
                                          members - tp[cutoff]);
      const double value = ObjectiveValue(objective, m);
      if (value > best_value) {
        best_value = value;
        best.lambda = lambda;
        best.count_cutoff = static_cast<int>(cutoff);
      }
    }
  }
  return best;
}

AttackThresholds TuneAcrossRounds(std::span<const LabeledTrace> validation,
                                  Objective objective, int round) {
  std::vector<int> scores;
  for (const auto& v : validation) {
    scores.push_back(LossAcrossRoundsScore(*v.trace, round));
  }
  AttackThresholds best;
  double best_value = -1.0;
  for (int cutoff = 0; cutoff <= round; ++cutoff) {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t s = 0; s < scores.size(); ++s) {
      const bool verdict = scores[s] >= cutoff;
      const bool truth = validation[s].member;
      tp += verdict && truth;
      fp += verdict && !truth;
      tn += !verdict && !truth;
      fn += !verdict && truth;
    }
    const double value = ObjectiveValue(objective, MetricsFromCounts(tp, fp, tn, fn));
    if (value > best_value) {
      best_value = value;
      best.rounds_cutoff = cutoff;
    }
  }
  return best;
}

}  // namespace

AttackThresholds TuneThresholds(AttackKind kind,
                                std::span<const LabeledTrace> validation,
                                Objective objective, int round) {
  CheckBothClasses(validation);
  return kind == AttackKind::kLossThreshold
             ? TuneLossThreshold(validation, objective, round)
             : TuneAcrossRounds(validation, objective, round);
}

namespace {

int Score(AttackKind kind, const LossTrace& trace, const AttackThresholds& t,
          int round) {
  return kind == AttackKind::kLossThreshold
             ? LossThresholdScore(trace, t.lambda, round)
             : LossAcrossRoundsScore(trace, round);
}

bool Verdict(AttackKind kind, int score, const AttackThresholds& t) {
  return kind == AttackKind::kLossThreshold ? score >= t.count_cutoff
                                            : score >= t.rounds_cutoff;
}

std::vector<LabeledTrace> Gather(const LossTraces& traces,
                                 const SubjectLabels& labels) {
  std::vector<LabeledTrace> out;
  out.reserve(labels.size());
  for (const auto& [subject, member] : labels) {
    const auto it = traces.find(subject);
    if (it == traces.end()) {
      throw EmptySamples("no loss trace for subject " + std::to_string(subject));
    }
    out.push_back({&it->second, member});
  }
  return out;
}

}  // namespace

AttackReport RunAttack(AttackKind kind, const LossTraces& traces,
                       const SubjectLabels& validation,
                       const SubjectLabels& test, Objective objective) {
  for (const auto& [subject, member] : test) {
    if (validation.contains(subject)) {
      throw ConfigError("validation and test subjects must be disjoint");
    }
  }
  if (test.empty()) throw InsufficientSubjects("no test subjects");
  const std::vector<LabeledTrace> tune_set = Gather(traces, validation);
  const std::vector<LabeledTrace> test_set = Gather(traces, test);
  const size_t rows = test_set.front().trace->num_rounds();
  for (const auto* set : {&tune_set, &test_set}) {
    for (const auto& t : *set) {
      if (t.trace->num_rounds() != rows) {
        throw ShapeMismatch("loss traces cover different numbers of rounds");
      }
    }
  }
  const int last = static_cast<int>(rows) - 1;
  const int first = kind == AttackKind::kLossThreshold ? 0 : 1;
  if (last < first) throw TooFewRounds("loss-across-rounds needs two snapshots");

  AttackReport report;
  report.kind = kind;
  std::vector<std::pair<bool, bool>> verdicts(test_set.size());
  for (int round = first; round <= last; ++round) {
    const AttackThresholds t = TuneThresholds(kind, tune_set, objective, round);
    for (size_t i = 0; i < test_set.size(); ++i) {
      const int score = Score(kind, *test_set[i].trace, t, round);
      verdicts[i] = {Verdict(kind, score, t), test_set[i].member};
      if (round == last) {
        report.per_subject[test_set[i].trace->subject_id()] = {
            score, verdicts[i].first, verdicts[i].second};
      }
    }
    report.per_round.push_back({round, t, ComputeMetrics(verdicts)});
  }
  report.thresholds = report.per_round.back().thresholds;
  report.metrics = report.per_round.back().metrics;
  return report;
}

AttackReport RunAttack(AttackKind kind,
                       std::span<const LossQuery* const> rounds,
                       const std::map<SubjectId, std::vector<LabeledPoint>>& attack_pool,
                       const SubjectLabels& validation,
                       const SubjectLabels& test, Objective objective) {
  if (rounds.empty()) throw ConfigError("no model snapshots to query");
  LossTraces traces;
  for (const auto* labels : {&validation, &test}) {
    for (const auto& [subject, member] : *labels) {
      const auto it = attack_pool.find(subject);
      if (it == attack_pool.end()) {
        throw EmptySamples("no attack samples for subject " + std::to_string(subject));
      }
      traces.emplace(subject, CollectOne(rounds, subject, it->second, 100));
    }
  }
  return RunAttack(kind, traces, validation, test, objective);
}

}  // namespace submi
