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

#ifndef SUBMI_SYNTHGEN_H_
#define SUBMI_SYNTHGEN_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "submi/rng.h"

namespace submi {

using SubjectId = uint32_t;
using RecordId = uint64_t;
using UserId = uint32_t;

struct SamplingMode {
  enum class Kind { kStandard, kDirichletProcess };

  Kind kind = Kind::kStandard;
  double alpha = 1.0;  // concentration, used by kDirichletProcess only

  static SamplingMode Standard() { return {Kind::kStandard, 1.0}; }
  static SamplingMode Dirichlet(double alpha = 1.0) {
    return {Kind::kDirichletProcess, alpha};
  }
  bool is_dirichlet() const { return kind == Kind::kDirichletProcess; }
  bool operator==(const SamplingMode&) const = default;
};

// Generative distribution of one data subject: a Gaussian with diagonal
// covariance, optionally used as the base measure of a Dirichlet process.
struct SubjectSpec {
  SubjectId id = 0;
  std::vector<double> mean;
  std::vector<double> variance;  // diagonal of the covariance, all > 0
  SamplingMode mode;
};

struct LabeledPoint {
  RecordId record_id = 0;
  SubjectId subject_id = 0;
  int label = 0;  // 0 or 1
  std::vector<double> x;
};

// Parity of the non-negative coordinates: XOR_i [x_i >= 0].
int Label(std::span<const double> x);

struct SubjectGenOptions {
  double min_separation = 0.35;
  // Total number of rejected mean proposals tolerated before giving up.
  int attempt_budget = 10000;
  double variance_lo = 0.0025;
  double variance_hi = 0.0225;
};

// Half-width w of the box [-w, w]^d that subject means are drawn from.
// It is 1 unless `n_subjects` balls of diameter `min_separation` would fill
// more than a quarter of [-1, 1]^d, in which case the box grows until they
// fill exactly a quarter.
double MeanBoxHalfWidth(size_t n_subjects, int d, double min_separation);

// Draws `n_subjects` specs whose means are pairwise more than
// `options.min_separation` apart (L2). Throws SeparationInfeasible when the
// attempt budget runs out. Subject ids are 0..n_subjects-1.
std::vector<SubjectSpec> GenerateSubjects(int n_subjects, int d,
                                          SamplingMode mode, uint64_t seed,
                                          const SubjectGenOptions& options = {});

// Stateful sampler for one subject. In Dirichlet-process mode it holds the
// Chinese-restaurant state, so successive calls keep drawing from the same
// realized subject distribution.
class SubjectSampler {
 public:
  explicit SubjectSampler(const SubjectSpec& spec);

  std::vector<double> Draw(Rng& rng);

  size_t draws() const { return draws_; }
  size_t distinct_values() const;

 private:
  std::vector<double> BaseDraw(Rng& rng) const;

  const SubjectSpec* spec_;
  size_t draws_ = 0;
  std::vector<std::vector<double>> atoms_;
  std::vector<uint32_t> history_;  // atom index of every draw so far
};

// Draws `n_items` labeled points from a fresh sampler for `spec`. Record ids
// are first_record, first_record + 1, ...
std::vector<LabeledPoint> SampleSubject(const SubjectSpec& spec, int n_items,
                                        Rng& rng, RecordId first_record = 0);

enum class AccessMode { kDistributionBased, kItemBased };

struct UserShard {
  UserId user_id = 0;
  std::vector<LabeledPoint> points;
  std::set<SubjectId> subject_ids_present;
};

struct GeneratorConfig {
  int d = 2;
  SamplingMode sampling;
  int users = 10;
  int subjects_per_user = 10;
  int items_per_user = 500;
  int max_attack_samples = 100;
  int test_samples = 10000;
  AccessMode access_mode = AccessMode::kDistributionBased;
  SubjectGenOptions subject_options;
};

struct Federation {
  int d = 0;
  AccessMode access_mode = AccessMode::kDistributionBased;
  std::vector<UserShard> shards;
  std::set<SubjectId> member_subjects;
  std::set<SubjectId> nonmember_subjects;
  std::map<SubjectId, SubjectSpec> specs;
  // Samples the adversary queries the model with; never trained on unless
  // access_mode is kItemBased (member entries are then training records).
  std::map<SubjectId, std::vector<LabeledPoint>> attack_pool;
  // Labeled draws from member subjects for measuring model accuracy.
  std::vector<LabeledPoint> test_points;

  size_t num_training_points() const;
};

// Builds a federation: a pool of 2 * users * subjects_per_user subjects,
// the first half (after a seeded shuffle) eligible as members. Every user
// takes subjects_per_user distinct subjects from the member half; users draw
// independently, so subjects are shared across users with replacement.
// Members are the subjects that ended up in some shard and an equally sized
// set of non-members is taken from the other half.
Federation BuildFederation(const GeneratorConfig& cfg, uint64_t seed);

// Versioned binary dump; doubles are stored as their IEEE-754 bits.
void WriteFederation(std::ostream& out, const Federation& fed);
Federation ReadFederation(std::istream& in);

}  // namespace submi

#endif  // SUBMI_SYNTHGEN_H_
