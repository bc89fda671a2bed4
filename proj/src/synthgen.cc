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

#include "submi/synthgen.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <set>

#include "binary_io.h"
#include "submi/errors.h"

namespace submi {

int Label(std::span<const double> x) {
  int parity = 0;
  for (double v : x) parity ^= (v >= 0.0) ? 1 : 0;
  return parity;
}

double MeanBoxHalfWidth(size_t n_subjects, int d, double min_separation) {
  if (n_subjects <= 1 || d <= 0) return 1.0;
  const double r = min_separation / 2.0;
  const double log_ball = 0.5 * d * std::log(std::numbers::pi) +
                          d * std::log(r) - std::lgamma(0.5 * d + 1.0);
  // (2w)^d = 4 * n * V_ball  <=>  packing fraction of 1/4.
  const double log_side =
      (std::log(static_cast<double>(n_subjects)) + log_ball + std::log(4.0)) /
      d;
  return std::max(1.0, 0.5 * std::exp(log_side));
}

namespace {

// Squared distance with early exit once `limit` is exceeded.
bool FartherThan(std::span<const double> a, std::span<const double> b,
                 double limit_sq) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
    if (acc > limit_sq) return true;
  }
  return acc > limit_sq;
}

}  // namespace

std::vector<SubjectSpec> GenerateSubjects(int n_subjects, int d,
                                          SamplingMode mode, uint64_t seed,
                                          const SubjectGenOptions& options) {
  if (n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
  if (d < 1) throw ConfigError("d must be >= 1");
  Rng rng(DeriveSeed(seed, {kSubjectsStream}));
  const double half_width =
      MeanBoxHalfWidth(static_cast<size_t>(n_subjects), d,
                       options.min_separation);
  std::uniform_real_distribution<double> mean_dist(-half_width, half_width);
  std::uniform_real_distribution<double> var_dist(options.variance_lo,
                                                  options.variance_hi);
  const double limit_sq = options.min_separation * options.min_separation;

  std::vector<SubjectSpec> specs;
  specs.reserve(static_cast<size_t>(n_subjects));
  int rejections = 0;
  std::vector<double> proposal(static_cast<size_t>(d));
  while (specs.size() < static_cast<size_t>(n_subjects)) {
    for (double& v : proposal) v = mean_dist(rng);
    const bool separated =
        std::all_of(specs.begin(), specs.end(), [&](const SubjectSpec& s) {
          return FartherThan(s.mean, proposal, limit_sq);
        });
    if (!separated) {
      if (++rejections > options.attempt_budget) {
        throw SeparationInfeasible(
            "could not place " + std::to_string(n_subjects) +
            " subject means with separation " +
            std::to_string(options.min_separation) + " in d=" +
            std::to_string(d) + " after " + std::to_string(rejections - 1) +
            " rejected proposals (placed " + std::to_string(specs.size()) +
            ")");
      }
      continue;
    }
    SubjectSpec spec;
    spec.id = static_cast<SubjectId>(specs.size());
    spec.mean = proposal;
    spec.variance.resize(static_cast<size_t>(d));
    for (double& v : spec.variance) v = var_dist(rng);
    spec.mode = mode;
    specs.push_back(std::move(spec));
  }
  return specs;
}

SubjectSampler::SubjectSampler(const SubjectSpec& spec) : spec_(&spec) {}

std::vector<double> SubjectSampler::BaseDraw(Rng& rng) const {
  std::normal_distribution<double> normal;
  std::vector<double> x(spec_->mean.size());
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = spec_->mean[i] + std::sqrt(spec_->variance[i]) * normal(rng);
  }
  return x;
}

std::vector<double> SubjectSampler::Draw(Rng& rng) {
  if (!spec_->mode.is_dirichlet()) {
    ++draws_;
    return BaseDraw(rng);
  }
  // Chinese restaurant: the k-th draw is new with probability a / (a + k),
  // otherwise a copy of a uniformly chosen earlier draw.
  const double alpha = spec_->mode.alpha;
  const auto k = static_cast<double>(draws_);
  std::uniform_real_distribution<double> unit;
  uint32_t atom;
  if (draws_ == 0 || unit(rng) < alpha / (alpha + k)) {
    atom = static_cast<uint32_t>(atoms_.size());
    atoms_.push_back(BaseDraw(rng));
  } else {
    std::uniform_int_distribution<size_t> pick(0, draws_ - 1);
    atom = history_[pick(rng)];
  }
  history_.push_back(atom);
  ++draws_;
  return atoms_[atom];
}

size_t SubjectSampler::distinct_values() const {
  return spec_->mode.is_dirichlet() ? atoms_.size() : draws_;
}

std::vector<LabeledPoint> SampleSubject(const SubjectSpec& spec, int n_items,
                                        Rng& rng, RecordId first_record) {
  if (n_items < 1) throw ConfigError("n_items must be >= 1");
  SubjectSampler sampler(spec);
  std::vector<LabeledPoint> points;
  points.reserve(static_cast<size_t>(n_items));
  for (int i = 0; i < n_items; ++i) {
    LabeledPoint p;
    p.record_id = first_record + static_cast<RecordId>(i);
    p.subject_id = spec.id;
    p.x = sampler.Draw(rng);
    p.label = Label(p.x);
    points.push_back(std::move(p));
  }
  return points;
}

size_t Federation::num_training_points() const {
  size_t n = 0;
  for (const auto& shard : shards) n += shard.points.size();
  return n;
}

namespace {

struct SubjectStream {
  SubjectSampler sampler;
  Rng rng;
};

}  // namespace

Federation BuildFederation(const GeneratorConfig& cfg, uint64_t seed) {
  if (cfg.users < 1 || cfg.subjects_per_user < 1 || cfg.items_per_user < 1) {
    throw ConfigError("users, subjects_per_user and items_per_user must be >= 1");
  }
  if (cfg.items_per_user < cfg.subjects_per_user) {
    throw ConfigError("items_per_user must be >= subjects_per_user");
  }
  if (cfg.max_attack_samples < 1) {
    throw ConfigError("max_attack_samples must be >= 1");
  }
  const int half = cfg.users * cfg.subjects_per_user;
  std::vector<SubjectSpec> pool = GenerateSubjects(
      2 * half, cfg.d, cfg.sampling, seed, cfg.subject_options);

  Rng assign(DeriveSeed(seed, {kAssignmentStream}));
  std::vector<SubjectId> order(pool.size());
  std::iota(order.begin(), order.end(), SubjectId{0});
  std::shuffle(order.begin(), order.end(), assign);
  const std::vector<SubjectId> member_candidates(order.begin(),
                                                 order.begin() + half);
  const std::vector<SubjectId> nonmember_candidates(order.begin() + half,
                                                    order.end());

  Federation fed;
  fed.d = cfg.d;
  fed.access_mode = cfg.access_mode;

  std::map<SubjectId, SubjectStream> streams;
  auto stream_for = [&](SubjectId id) -> SubjectStream& {
    auto it = streams.find(id);
    if (it == streams.end()) {
      it = streams
               .emplace(id, SubjectStream{SubjectSampler(pool[id]),
                                          Rng(DeriveSeed(
                                              seed, {kSamplingStream, id}))})
               .first;
    }
    return it->second;
  };
  RecordId next_record = 0;
  auto draw_point = [&](SubjectId id) {
    SubjectStream& s = stream_for(id);
    LabeledPoint p;
    p.record_id = next_record++;
    p.subject_id = id;
    p.x = s.sampler.Draw(s.rng);
    p.label = Label(p.x);
    return p;
  };

  std::vector<SubjectId> scratch = member_candidates;
  for (int u = 0; u < cfg.users; ++u) {
    // Partial Fisher-Yates: distinct subjects within one user.
    for (int j = 0; j < cfg.subjects_per_user; ++j) {
      std::uniform_int_distribution<size_t> pick(static_cast<size_t>(j),
                                                 scratch.size() - 1);
      std::swap(scratch[static_cast<size_t>(j)], scratch[pick(assign)]);
    }
    std::vector<SubjectId> mine(scratch.begin(),
                                scratch.begin() + cfg.subjects_per_user);
    std::sort(mine.begin(), mine.end());

    UserShard shard;
    shard.user_id = static_cast<UserId>(u);
    shard.points.reserve(static_cast<size_t>(cfg.items_per_user));
    const int base = cfg.items_per_user / cfg.subjects_per_user;
    const int extra = cfg.items_per_user % cfg.subjects_per_user;
    for (size_t j = 0; j < mine.size(); ++j) {
      const int count = base + (static_cast<int>(j) < extra ? 1 : 0);
      for (int i = 0; i < count; ++i) shard.points.push_back(draw_point(mine[j]));
      shard.subject_ids_present.insert(mine[j]);
      fed.member_subjects.insert(mine[j]);
    }
    fed.shards.push_back(std::move(shard));
  }

  for (size_t i = 0; i < fed.member_subjects.size(); ++i) {
    fed.nonmember_subjects.insert(nonmember_candidates[i]);
  }
  for (SubjectId id : fed.member_subjects) fed.specs[id] = pool[id];
  for (SubjectId id : fed.nonmember_subjects) fed.specs[id] = pool[id];

  const auto max_samples = static_cast<size_t>(cfg.max_attack_samples);
  for (SubjectId id : fed.member_subjects) {
    std::vector<LabeledPoint>& samples = fed.attack_pool[id];
    if (cfg.access_mode == AccessMode::kItemBased) {
      for (const auto& shard : fed.shards) {
        for (const auto& p : shard.points) {
          if (p.subject_id == id) samples.push_back(p);
        }
      }
      Rng pick(DeriveSeed(seed, {kSplitStream, id}));
      std::shuffle(samples.begin(), samples.end(), pick);
      if (samples.size() > max_samples) samples.resize(max_samples);
      std::sort(samples.begin(), samples.end(),
                [](const LabeledPoint& a, const LabeledPoint& b) {
                  return a.record_id < b.record_id;
                });
    } else {
      for (size_t i = 0; i < max_samples; ++i) samples.push_back(draw_point(id));
    }
  }
  for (SubjectId id : fed.nonmember_subjects) {
    std::vector<LabeledPoint>& samples = fed.attack_pool[id];
    for (size_t i = 0; i < max_samples; ++i) samples.push_back(draw_point(id));
  }

  const std::vector<SubjectId> members(fed.member_subjects.begin(),
                                       fed.member_subjects.end());
  fed.test_points.reserve(static_cast<size_t>(std::max(cfg.test_samples, 0)));
  for (int i = 0; i < cfg.test_samples; ++i) {
    fed.test_points.push_back(
        draw_point(members[static_cast<size_t>(i) % members.size()]));
  }
  return fed;
}

namespace {

constexpr char kFederationMagic[9] = "SUBMIFED";
constexpr uint32_t kFederationVersion = 1;

void PutPoints(std::ostream& out, const std::vector<LabeledPoint>& points) {
  io::Put<uint64_t>(out, points.size());
  for (const auto& p : points) {
    io::Put<uint64_t>(out, p.record_id);
    io::Put<uint32_t>(out, p.subject_id);
    io::Put<uint8_t>(out, static_cast<uint8_t>(p.label));
    io::PutDoubles(out, p.x);
  }
}

std::vector<LabeledPoint> GetPoints(std::istream& in) {
  const auto n = io::Get<uint64_t>(in);
  std::vector<LabeledPoint> points;
  points.reserve(static_cast<size_t>(std::min<uint64_t>(n, 1u << 20)));
  for (uint64_t i = 0; i < n; ++i) {
    LabeledPoint p;
    p.record_id = io::Get<uint64_t>(in);
    p.subject_id = io::Get<uint32_t>(in);
    p.label = io::Get<uint8_t>(in);
    p.x = io::GetDoubles(in);
    points.push_back(std::move(p));
  }
  return points;
}

void PutIds(std::ostream& out, const std::set<SubjectId>& ids) {
  io::Put<uint64_t>(out, ids.size());
  for (SubjectId id : ids) io::Put<uint32_t>(out, id);
}

std::set<SubjectId> GetIds(std::istream& in) {
  const auto n = io::Get<uint64_t>(in);
  std::set<SubjectId> ids;
  for (uint64_t i = 0; i < n; ++i) ids.insert(io::Get<uint32_t>(in));
  return ids;
}

}  // namespace

void WriteFederation(std::ostream& out, const Federation& fed) {
  io::PutMagic(out, kFederationMagic, kFederationVersion);
  io::Put<int32_t>(out, fed.d);
  io::Put<uint8_t>(out, static_cast<uint8_t>(fed.access_mode));
  io::Put<uint64_t>(out, fed.specs.size());
  for (const auto& [id, spec] : fed.specs) {
    io::Put<uint32_t>(out, spec.id);
    io::Put<uint8_t>(out, static_cast<uint8_t>(spec.mode.kind));
    io::Put<double>(out, spec.mode.alpha);
    io::PutDoubles(out, spec.mean);
    io::PutDoubles(out, spec.variance);
  }
  PutIds(out, fed.member_subjects);
  PutIds(out, fed.nonmember_subjects);
  io::Put<uint64_t>(out, fed.shards.size());
  for (const auto& shard : fed.shards) {
    io::Put<uint32_t>(out, shard.user_id);
    PutIds(out, shard.subject_ids_present);
    PutPoints(out, shard.points);
  }
  io::Put<uint64_t>(out, fed.attack_pool.size());
  for (const auto& [id, points] : fed.attack_pool) {
    io::Put<uint32_t>(out, id);
    PutPoints(out, points);
  }
  PutPoints(out, fed.test_points);
  if (!out) throw FormatError("failed writing federation");
}

Federation ReadFederation(std::istream& in) {
  const uint32_t version = io::ExpectMagic(in, kFederationMagic);
  if (version != kFederationVersion) {
    throw FormatError("unsupported federation version " +
                      std::to_string(version));
  }
  Federation fed;
  fed.d = io::Get<int32_t>(in);
  fed.access_mode = static_cast<AccessMode>(io::Get<uint8_t>(in));
  const auto n_specs = io::Get<uint64_t>(in);
  for (uint64_t i = 0; i < n_specs; ++i) {
    SubjectSpec spec;
    spec.id = io::Get<uint32_t>(in);
    spec.mode.kind = static_cast<SamplingMode::Kind>(io::Get<uint8_t>(in));
    spec.mode.alpha = io::Get<double>(in);
    spec.mean = io::GetDoubles(in);
    spec.variance = io::GetDoubles(in);
    fed.specs[spec.id] = std::move(spec);
  }
  fed.member_subjects = GetIds(in);
  fed.nonmember_subjects = GetIds(in);
  const auto n_shards = io::Get<uint64_t>(in);
  for (uint64_t i = 0; i < n_shards; ++i) {
    UserShard shard;
    shard.user_id = io::Get<uint32_t>(in);
    shard.subject_ids_present = GetIds(in);
    shard.points = GetPoints(in);
    fed.shards.push_back(std::move(shard));
  }
  const auto n_pool = io::Get<uint64_t>(in);
  for (uint64_t i = 0; i < n_pool; ++i) {
    const SubjectId id = io::Get<uint32_t>(in);
    fed.attack_pool[id] = GetPoints(in);
  }
  fed.test_points = GetPoints(in);
  return fed;
}

}  // namespace submi
