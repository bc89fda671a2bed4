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
#include <limits>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "submi/errors.h"
#include "submi/metrics.h"

namespace submi {
namespace {

LossTrace SingleRound(SubjectId id, std::vector<double> losses) {
  return LossTrace(id, std::vector<std::vector<double>>{std::move(losses)});
}

LossTrace FromRoundSums(SubjectId id, const std::vector<double>& sums) {
  std::vector<std::vector<double>> rows;
  for (double s : sums) rows.push_back({s / 2, s / 2});
  return LossTrace(id, rows);
}

TEST(LossThresholdScoreTest, Examples) {
  const LossTrace t = SingleRound(1, {0.1, 0.5, 0.9});
  EXPECT_EQ(LossThresholdScore(t, 0.5, 0), 2);
  EXPECT_EQ(LossThresholdScore(t, 0.05, 0), 0);
  EXPECT_EQ(LossThresholdScore(t, 0.9, 0), 3);
  EXPECT_THROW(LossThresholdScore(t, 0.5, 1), RoundOutOfRange);
  EXPECT_THROW(LossThresholdScore(t, 0.5, -1), RoundOutOfRange);
}

TEST(LossThresholdScoreTest, MonotoneAndScaleInvariant) {
  Rng rng(3);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> losses(50);
  for (double& l : losses) l = e(rng);
  const LossTrace t = SingleRound(1, losses);
  std::vector<double> scaled_losses = losses;
  for (double& l : scaled_losses) l *= 3.7;
  const LossTrace scaled = SingleRound(1, scaled_losses);
  int prev = 0;
  for (double lambda = 0.0; lambda < 6.0; lambda += 0.05) {
    const int c = LossThresholdScore(t, lambda, 0);
    EXPECT_GE(c, prev);
    EXPECT_LE(c, 50);
    prev = c;
    EXPECT_EQ(LossThresholdScore(scaled, lambda * 3.7, 0), c);
  }
  // Also at the observed values, where the comparison is an equality.
  for (double l : losses) {
    EXPECT_EQ(LossThresholdScore(scaled, l * 3.7, 0), LossThresholdScore(t, l, 0));
  }
}

TEST(LossAcrossRoundsScoreTest, Examples) {
  EXPECT_EQ(LossAcrossRoundsScore(FromRoundSums(1, {3.0, 2.0, 2.5, 1.0})), 2);
  std::vector<double> down(11);
  for (int i = 0; i <= 10; ++i) down[i] = 20.0 - i;
  EXPECT_EQ(LossAcrossRoundsScore(FromRoundSums(1, down)), 10);
  EXPECT_EQ(LossAcrossRoundsScore(FromRoundSums(1, std::vector<double>(11, 4.0))), 0);
  EXPECT_EQ(LossAcrossRoundsScore(FromRoundSums(1, {3.0, 2.0, 2.5, 1.0}), 2), 1);
  EXPECT_THROW(LossAcrossRoundsScore(FromRoundSums(1, {3.0})), TooFewRounds);
  EXPECT_THROW(LossAcrossRoundsScore(FromRoundSums(1, {3.0, 2.0}), 2), RoundOutOfRange);
}

TEST(LossAcrossRoundsScoreTest, ScaleInvariant) {
  Rng rng(5);
  std::exponential_distribution<double> e(1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> rows(8, std::vector<double>(5));
    for (auto& r : rows) for (double& l : r) l = e(rng);
    auto scaled = rows;
    for (auto& r : scaled) for (double& l : r) l *= 0.3;
    const int c = LossAcrossRoundsScore(LossTrace(1, rows));
    EXPECT_EQ(LossAcrossRoundsScore(LossTrace(1, scaled)), c);
    EXPECT_GE(c, 0);
    EXPECT_LE(c, 7);
  }
}

TEST(MetricsTest, F1FromPrecisionAndRecall) {
  // P = .79, R = .89.
  const double p = 0.79, r = 0.89;
  EXPECT_NEAR(2 * p * r / (p + r), 0.8370, 5e-5);
  const Metrics m = MetricsFromCounts(79, 21, 0, 0);
  EXPECT_DOUBLE_EQ(m.precision, 0.79);
}

TEST(MetricsTest, AllMemberFloor) {
  std::vector<std::pair<bool, bool>> v;
  for (int i = 0; i < 50; ++i) v.push_back({true, i % 2 == 0});
  const Metrics m = ComputeMetrics(v);
  EXPECT_DOUBLE_EQ(m.precision, 0.5);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
}

// Candidate lambdas: distinct values plus midpoints of neighbours.
std::vector<double> Candidates(std::span<const LabeledTrace> val, int round) {
  std::set<double> values;
  for (const auto& v : val) {
    for (double l : v.trace->row(round)) values.insert(l);
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::vector<double> out = sorted;
  for (size_t i = 1; i < sorted.size(); ++i) out.push_back(0.5 * (sorted[i - 1] + sorted[i]));
  std::sort(out.begin(), out.end());
  return out;
}

struct Best {
  double value = -1.0;
  double lambda = 0.0;
  int tau = 0;
};

Best BruteForceLossThreshold(std::span<const LabeledTrace> val, Objective obj, int round) {
  Best best;
  const int samples = static_cast<int>(val[0].trace->num_samples());
  for (double lambda : Candidates(val, round)) {
    for (int tau = 1; tau <= samples; ++tau) {
      std::vector<std::pair<bool, bool>> v;
      for (const auto& s : val) {
        v.push_back({LossThresholdScore(*s.trace, lambda, round) >= tau, s.member});
      }
      const double value = ObjectiveValue(obj, ComputeMetrics(v));
      if (value > best.value) best = {value, lambda, tau};
    }
  }
  return best;
}

std::vector<LossTrace> RandomTraces(Rng& rng, int n, int rounds, int samples,
                                    std::vector<bool>& member) {
  std::vector<LossTrace> out;
  member.clear();
  std::exponential_distribution<double> e(1.0);
  for (int s = 0; s < n; ++s) {
    const bool m = (rng() & 1) != 0;
    member.push_back(m);
    std::vector<std::vector<double>> rows(rounds + 1, std::vector<double>(samples));
    for (int r = 0; r <= rounds; ++r) {
      for (double& l : rows[r]) {
        // Members drift lower as rounds progress; coarse grid makes ties.
        const double raw = e(rng) * (m ? 1.0 / (1.0 + 0.3 * r) : 1.0);
        l = std::round(raw * 20.0) / 20.0;
      }
    }
    out.emplace_back(static_cast<SubjectId>(s), rows);
  }
  return out;
}

TEST(TuneThresholdsTest, MatchesBruteForceLossThreshold) {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<bool> member;
    const auto traces = RandomTraces(rng, 12, 3, 6, member);
    if (std::count(member.begin(), member.end(), true) == 0 ||
        std::count(member.begin(), member.end(), false) == 0) {
      continue;
    }
    std::vector<LabeledTrace> val;
    for (size_t i = 0; i < traces.size(); ++i) val.push_back({&traces[i], member[i]});
    for (Objective obj : {Objective::kF1, Objective::kAccuracy}) {
      for (int round = 0; round <= 3; ++round) {
        const Best oracle = BruteForceLossThreshold(val, obj, round);
        const AttackThresholds got =
            TuneThresholds(AttackKind::kLossThreshold, val, obj, round);
        std::vector<std::pair<bool, bool>> v;
        for (const auto& s : val) {
          v.push_back({LossThresholdScore(*s.trace, got.lambda, round) >= got.count_cutoff,
                       s.member});
        }
        EXPECT_DOUBLE_EQ(ObjectiveValue(obj, ComputeMetrics(v)), oracle.value);
        EXPECT_DOUBLE_EQ(got.lambda, oracle.lambda);
        EXPECT_EQ(got.count_cutoff, oracle.tau);
      }
    }
  }
}

TEST(TuneThresholdsTest, MatchesBruteForceAcrossRounds) {
  Rng rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<bool> member;
    const auto traces = RandomTraces(rng, 10, 6, 4, member);
    if (std::count(member.begin(), member.end(), true) == 0 ||
        std::count(member.begin(), member.end(), false) == 0) {
      continue;
    }
    std::vector<LabeledTrace> val;
    for (size_t i = 0; i < traces.size(); ++i) val.push_back({&traces[i], member[i]});
    for (int round = 1; round <= 6; ++round) {
      Best oracle;
      for (int tau = 0; tau <= round; ++tau) {
        std::vector<std::pair<bool, bool>> v;
        for (const auto& s : val) {
          v.push_back({LossAcrossRoundsScore(*s.trace, round) >= tau, s.member});
        }
        const double value = ComputeMetrics(v).f1;
        if (value > oracle.value) oracle = {value, 0.0, tau};
      }
      const AttackThresholds got =
          TuneThresholds(AttackKind::kLossAcrossRounds, val, Objective::kF1, round);
      EXPECT_EQ(got.rounds_cutoff, oracle.tau);
    }
  }
}

TEST(TuneThresholdsTest, SeparableGivesPerfectF1) {
  std::vector<LossTrace> traces;
  std::vector<LabeledTrace> val;
  for (int s = 0; s < 6; ++s) {
    const bool m = s < 3;
    traces.push_back(SingleRound(s, m ? std::vector<double>{0.05, 0.1, 0.02}
                                      : std::vector<double>{0.9, 1.3, 2.0}));
  }
  for (int s = 0; s < 6; ++s) val.push_back({&traces[s], s < 3});
  const AttackThresholds t = TuneThresholds(AttackKind::kLossThreshold, val, Objective::kF1, 0);
  std::vector<std::pair<bool, bool>> v;
  for (const auto& s : val) {
    v.push_back({LossThresholdScore(*s.trace, t.lambda, 0) >= t.count_cutoff, s.member});
  }
  EXPECT_DOUBLE_EQ(ComputeMetrics(v).f1, 1.0);
  // Every member has a loss of 0.02, the smallest perfect cutoff.
  EXPECT_DOUBLE_EQ(t.lambda, 0.02);
  EXPECT_EQ(t.count_cutoff, 1);
}

TEST(TuneThresholdsTest, OnePerClassIsLegal) {
  const LossTrace a = SingleRound(1, {0.3, 0.4});
  const LossTrace b = SingleRound(2, {0.35, 0.5});
  const std::vector<LabeledTrace> val = {{&a, true}, {&b, false}};
  const AttackThresholds t = TuneThresholds(AttackKind::kLossThreshold, val, Objective::kF1, 0);
  EXPECT_GE(t.count_cutoff, 1);
  EXPECT_LE(t.count_cutoff, 2);
}

TEST(TuneThresholdsTest, SingleClassIsDegenerate) {
  const LossTrace a = SingleRound(1, {0.3});
  const LossTrace b = SingleRound(2, {0.5});
  const std::vector<LabeledTrace> members = {{&a, true}, {&b, true}};
  EXPECT_THROW(TuneThresholds(AttackKind::kLossThreshold, members, Objective::kF1, 0),
               DegenerateValidation);
  const std::vector<LabeledTrace> none;
  EXPECT_THROW(TuneThresholds(AttackKind::kLossThreshold, none, Objective::kF1, 0),
               DegenerateValidation);
}

// Loss of point x at round r is |x0| / (1 + r) for "trained" subjects (ids
// below 100) and |x0| otherwise.
class FakeModel : public LossQuery {
 public:
  explicit FakeModel(int round) : round_(round) {}
  std::vector<double> Losses(std::span<const LabeledPoint> points) const override {
    std::vector<double> out;
    for (const auto& p : points) {
      const double base = std::abs(p.x[0]);
      out.push_back(p.subject_id < 100 ? base / (1.0 + round_) : base);
    }
    return out;
  }

 private:
  int round_;
};

std::map<SubjectId, std::vector<LabeledPoint>> FakePool(int members, int nonmembers) {
  std::map<SubjectId, std::vector<LabeledPoint>> pool;
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  auto add = [&](SubjectId id) {
    for (int j = 0; j < 120; ++j) {
      LabeledPoint p;
      p.subject_id = id;
      p.x = {u(rng)};
      pool[id].push_back(p);
    }
  };
  for (int i = 0; i < members; ++i) add(static_cast<SubjectId>(i));
  for (int i = 0; i < nonmembers; ++i) add(static_cast<SubjectId>(100 + i));
  return pool;
}

TEST(CollectLossesTest, ShapeAndValues) {
  const FakeModel m0(0), m1(1), m2(2);
  const std::vector<const LossQuery*> rounds = {&m0, &m1, &m2};
  const auto pool = FakePool(2, 2);
  const LossTraces traces = CollectLosses(rounds, pool, 100);
  ASSERT_EQ(traces.size(), 4u);
  const LossTrace& t = traces.at(1);
  EXPECT_EQ(t.num_rounds(), 3u);
  EXPECT_EQ(t.num_samples(), 100u);
  EXPECT_DOUBLE_EQ(t.at(2, 5), std::abs(pool.at(1)[5].x[0]) / 3.0);

  const std::vector<const LossQuery*> one = {&m0};
  std::map<SubjectId, std::vector<LabeledPoint>> single = {{7, {pool.at(0)[0]}}};
  single[7][0].subject_id = 7;
  const LossTraces tiny = CollectLosses(one, single);
  EXPECT_EQ(tiny.at(7).num_rounds(), 1u);
  EXPECT_EQ(tiny.at(7).num_samples(), 1u);

  std::map<SubjectId, std::vector<LabeledPoint>> empty = {{3, {}}};
  EXPECT_THROW(CollectLosses(one, empty), EmptySamples);
}

TEST(RunAttackTest, VerdictRuleAndMetrics) {
  const FakeModel m0(0), m1(1), m2(2), m3(3);
  const std::vector<const LossQuery*> rounds = {&m0, &m1, &m2, &m3};
  const auto pool = FakePool(8, 8);
  SubjectLabels val, test;
  for (const auto& [id, pts] : pool) {
    const bool member = id < 100;
    ((id % 2 == 0) ? val : test)[id] = member;
  }
  for (AttackKind kind : {AttackKind::kLossThreshold, AttackKind::kLossAcrossRounds}) {
    const AttackReport report = RunAttack(kind, rounds, pool, val, test);
    EXPECT_EQ(report.per_subject.size(), test.size());
    std::vector<std::pair<bool, bool>> v;
    for (const auto& [id, sv] : report.per_subject) {
      const int cutoff = kind == AttackKind::kLossThreshold ? report.thresholds.count_cutoff
                                                            : report.thresholds.rounds_cutoff;
      EXPECT_EQ(sv.verdict, sv.score >= cutoff);
      EXPECT_EQ(sv.truth, test.at(id));
      v.push_back({sv.verdict, sv.truth});
    }
    const Metrics m = ComputeMetrics(v);
    EXPECT_DOUBLE_EQ(m.f1, report.metrics.f1);
    EXPECT_DOUBLE_EQ(report.metrics.f1, 1.0);
    ASSERT_FALSE(report.per_round.empty());
    EXPECT_EQ(report.per_round.back().round, 3);
    EXPECT_DOUBLE_EQ(report.per_round.back().metrics.f1, report.metrics.f1);
  }
}

TEST(RunAttackTest, PerRoundRanges) {
  const FakeModel m0(0), m1(1), m2(2);
  const std::vector<const LossQuery*> rounds = {&m0, &m1, &m2};
  const auto pool = FakePool(4, 4);
  SubjectLabels val = {{0, true}, {100, false}}, test;
  for (const auto& [id, pts] : pool) {
    if (!val.count(id)) test[id] = id < 100;
  }
  const AttackReport lt = RunAttack(AttackKind::kLossThreshold, rounds, pool, val, test);
  ASSERT_EQ(lt.per_round.size(), 3u);
  EXPECT_EQ(lt.per_round.front().round, 0);
  // At round 0 the fake model treats everyone alike.
  EXPECT_LE(lt.per_round.front().metrics.f1, 1.0);
  const AttackReport lar = RunAttack(AttackKind::kLossAcrossRounds, rounds, pool, val, test);
  ASSERT_EQ(lar.per_round.size(), 2u);
  EXPECT_EQ(lar.per_round.front().round, 1);
}

TEST(RunAttackTest, OverlappingSplitsRejected) {
  const FakeModel m0(0), m1(1);
  const std::vector<const LossQuery*> rounds = {&m0, &m1};
  const auto pool = FakePool(2, 2);
  const SubjectLabels val = {{0, true}, {100, false}};
  const SubjectLabels test = {{0, true}, {101, false}};
  EXPECT_THROW(RunAttack(AttackKind::kLossThreshold, rounds, pool, val, test), ConfigError);
}

}  // namespace
}  // namespace submi
