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

// JSON schema of experiment configs and grid files.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "submi/errors.h"
#include "submi/harness.h"

namespace submi {

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) {
        throw ConfigError("unknown key " + path_ + "." + key);
      }
    }
  }

  const Json* Find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void Read(const std::string& key, T& out) {
    if (const Json* v = Find(key)) {
      try {
        out = v->get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError(path_ + "." + key + " has the wrong type");
      }
    }
  }

  std::string path(const std::string& key) const { return path_ + "." + key; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum>
struct EnumName {
  Enum value;
  const char* name;
};

constexpr EnumName<SamplingMode::Kind> kSamplingNames[] = {
    {SamplingMode::Kind::kStandard, "standard"},
    {SamplingMode::Kind::kDirichletProcess, "dirichlet"}};
constexpr EnumName<AccessMode> kAccessNames[] = {
    {AccessMode::kDistributionBased, "distribution"},
    {AccessMode::kItemBased, "item"}};
constexpr EnumName<OptimizerConfig::Kind> kOptimizerNames[] = {
    {OptimizerConfig::Kind::kSgd, "sgd"}, {OptimizerConfig::Kind::kAdam, "adam"}};
constexpr EnumName<DpGranularity> kGranularityNames[] = {
    {DpGranularity::kItem, "item"},
    {DpGranularity::kUser, "user"},
    {DpGranularity::kSubject, "subject"}};
constexpr EnumName<AttackKind> kAttackNames[] = {
    {AttackKind::kLossThreshold, "loss-threshold"},
    {AttackKind::kLossAcrossRounds, "loss-across-rounds"}};
constexpr EnumName<Objective> kObjectiveNames[] = {
    {Objective::kF1, "f1"}, {Objective::kAccuracy, "accuracy"}};

template <typename Enum, size_t N>
std::string ToName(const EnumName<Enum> (&table)[N], Enum value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  throw ConfigError("unnamed enum value");
}

template <typename Enum, size_t N>
Enum FromName(const EnumName<Enum> (&table)[N], const std::string& name,
              const std::string& where) {
  for (const auto& e : table) {
    if (name == e.name) return e.value;
  }
  std::string options;
  for (const auto& e : table) options += std::string(options.empty() ? "" : ", ") + e.name;
  throw ConfigError(where + ": '" + name + "' is not one of {" + options + "}");
}

template <typename Enum, size_t N>
void ReadEnum(ObjectReader& r, const std::string& key,
              const EnumName<Enum> (&table)[N], Enum& out) {
  std::string name;
  r.Read(key, name);
  if (!name.empty()) out = FromName(table, name, r.path(key));
}

Json DpToJson(const DpConfig& dp) {
  Json j;
  j["granularity"] = ToName(kGranularityNames, dp.granularity);
  j["clip"] = std::isinf(dp.clip_threshold) ? Json(nullptr) : Json(dp.clip_threshold);
  j["noise_multiplier"] = dp.noise_multiplier;
  j["delta"] = dp.delta;
  j["report_epsilon"] = dp.report_epsilon;
  return j;
}

DpConfig DpFromJson(const Json& j) {
  DpConfig dp;
  ObjectReader r(j, "dp");
  ReadEnum(r, "granularity", kGranularityNames, dp.granularity);
  if (const Json* clip = r.Find("clip"); clip != nullptr && !clip->is_null()) {
    if (!clip->is_number()) throw ConfigError("dp.clip must be a number or null");
    dp.clip_threshold = clip->get<double>();
  }
  r.Read("noise_multiplier", dp.noise_multiplier);
  r.Read("delta", dp.delta);
  r.Read("report_epsilon", dp.report_epsilon);
  return dp;
}

bool InSet(int value, std::initializer_list<int> allowed) {
  return std::find(allowed.begin(), allowed.end(), value) != allowed.end();
}

}  // namespace

std::string SamplingName(const SamplingMode& mode) {
  return ToName(kSamplingNames, mode.kind);
}

void ExperimentConfig::Validate() const {
  if (data.d < 1) throw ConfigError("data.d must be >= 1");
  if (data.users < 1 || data.subjects_per_user < 1 || data.items_per_user < 1) {
    throw ConfigError("users, subjects_per_user and items_per_user must be >= 1");
  }
  if (data.items_per_user < data.subjects_per_user) {
    throw ConfigError("items_per_user must be >= subjects_per_user");
  }
  if (data.max_attack_samples < 1) throw ConfigError("max_attack_samples must be >= 1");
  if (data.test_samples < 1) throw ConfigError("test_samples must be >= 1");
  if (!(data.sampling.alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (rounds < 0) throw ConfigError("rounds must be >= 0");
  if (!custom) {
    if (!InSet(data.d, {2, 50, 250, 1000})) {
      throw ConfigError("data.d outside {2, 50, 250, 1000}; set custom to allow");
    }
    if (!InSet(data.users, {10, 100})) {
      throw ConfigError("data.users outside {10, 100}; set custom to allow");
    }
    if (!InSet(data.subjects_per_user, {10, 100, 500})) {
      throw ConfigError("data.subjects_per_user outside {10, 100, 500}; set custom to allow");
    }
    if (!InSet(data.items_per_user, {500, 2000, 10000})) {
      throw ConfigError("data.items_per_user outside {500, 2000, 10000}; set custom to allow");
    }
    if (rounds < 1 || rounds > 50) {
      throw ConfigError("training.rounds outside [1, 50]; set custom to allow");
    }
  }
  model().Validate();
  training.Validate();
  if (dp) {
    dp->Validate();
    if (dp->report_epsilon && dp->noise_multiplier <= 0.0) {
      throw ConfigError("dp.report_epsilon requires noise_multiplier > 0");
    }
  }
  if (validation_subject_count < 1) {
    throw ConfigError("attack.validation_subjects must be >= 1 per class");
  }
  if (attacks.empty()) throw ConfigError("attack.kinds must not be empty");
}

Json ConfigToJson(const ExperimentConfig& cfg) {
  Json data;
  data["d"] = cfg.data.d;
  data["sampling"] = ToName(kSamplingNames, cfg.data.sampling.kind);
  data["alpha"] = cfg.data.sampling.alpha;
  data["users"] = cfg.data.users;
  data["subjects_per_user"] = cfg.data.subjects_per_user;
  data["items_per_user"] = cfg.data.items_per_user;
  data["max_attack_samples"] = cfg.data.max_attack_samples;
  data["test_samples"] = cfg.data.test_samples;
  data["access_mode"] = ToName(kAccessNames, cfg.data.access_mode);
  data["min_separation"] = cfg.data.subject_options.min_separation;
  data["separation_attempts"] = cfg.data.subject_options.attempt_budget;
  data["variance_range"] = {cfg.data.subject_options.variance_lo,
                            cfg.data.subject_options.variance_hi};

  Json optimizer;
  optimizer["kind"] = ToName(kOptimizerNames, cfg.training.optimizer.kind);
  optimizer["learning_rate"] = cfg.training.optimizer.learning_rate;
  optimizer["beta1"] = cfg.training.optimizer.beta1;
  optimizer["beta2"] = cfg.training.optimizer.beta2;
  optimizer["epsilon"] = cfg.training.optimizer.epsilon;

  Json training;
  training["rounds"] = cfg.rounds;
  training["local_epochs"] = cfg.training.local_epochs;
  training["batch_size"] = cfg.training.batch_size;
  training["participation"] = cfg.training.participation;
  training["optimizer"] = optimizer;

  Json attack;
  attack["kinds"] = Json::array();
  for (AttackKind kind : cfg.attacks) attack["kinds"].push_back(ToName(kAttackNames, kind));
  attack["validation_subjects"] = cfg.validation_subject_count;
  attack["objective"] = ToName(kObjectiveNames, cfg.objective);

  Json j;
  j["data"] = data;
  j["model"] = {{"hidden", cfg.hidden}};
  j["training"] = training;
  j["dp"] = cfg.dp ? DpToJson(*cfg.dp) : Json(nullptr);
  j["attack"] = attack;
  j["seed"] = cfg.seed;
  j["save_snapshots"] = cfg.save_snapshots;
  j["custom"] = cfg.custom;
  return j;
}

ExperimentConfig ConfigFromJson(const Json& j) {
  ExperimentConfig cfg;
  ObjectReader root(j, "config");
  if (const Json* data = root.Find("data")) {
    ObjectReader r(*data, "data");
    r.Read("d", cfg.data.d);
    ReadEnum(r, "sampling", kSamplingNames, cfg.data.sampling.kind);
    r.Read("alpha", cfg.data.sampling.alpha);
    r.Read("users", cfg.data.users);
    r.Read("subjects_per_user", cfg.data.subjects_per_user);
    r.Read("items_per_user", cfg.data.items_per_user);
    r.Read("max_attack_samples", cfg.data.max_attack_samples);
    r.Read("test_samples", cfg.data.test_samples);
    ReadEnum(r, "access_mode", kAccessNames, cfg.data.access_mode);
    r.Read("min_separation", cfg.data.subject_options.min_separation);
    r.Read("separation_attempts", cfg.data.subject_options.attempt_budget);
    std::vector<double> range;
    r.Read("variance_range", range);
    if (!range.empty()) {
      if (range.size() != 2 || !(range[0] > 0.0) || !(range[1] >= range[0])) {
        throw ConfigError("data.variance_range must be [lo, hi] with 0 < lo <= hi");
      }
      cfg.data.subject_options.variance_lo = range[0];
      cfg.data.subject_options.variance_hi = range[1];
    }
  }
  if (const Json* model = root.Find("model")) {
    ObjectReader r(*model, "model");
    r.Read("hidden", cfg.hidden);
  }
  if (const Json* training = root.Find("training")) {
    ObjectReader r(*training, "training");
    r.Read("rounds", cfg.rounds);
    r.Read("local_epochs", cfg.training.local_epochs);
    r.Read("batch_size", cfg.training.batch_size);
    r.Read("participation", cfg.training.participation);
    if (const Json* opt = r.Find("optimizer")) {
      ObjectReader o(*opt, "training.optimizer");
      ReadEnum(o, "kind", kOptimizerNames, cfg.training.optimizer.kind);
      o.Read("learning_rate", cfg.training.optimizer.learning_rate);
      o.Read("beta1", cfg.training.optimizer.beta1);
      o.Read("beta2", cfg.training.optimizer.beta2);
      o.Read("epsilon", cfg.training.optimizer.epsilon);
    }
  }
  if (const Json* dp = root.Find("dp"); dp != nullptr && !dp->is_null()) {
    cfg.dp = DpFromJson(*dp);
  }
  if (const Json* attack = root.Find("attack")) {
    ObjectReader r(*attack, "attack");
    std::vector<std::string> kinds;
    r.Read("kinds", kinds);
    if (r.Find("kinds") != nullptr) {
      cfg.attacks.clear();
      for (const auto& k : kinds) {
        cfg.attacks.push_back(FromName(kAttackNames, k, "attack.kinds"));
      }
    }
    r.Read("validation_subjects", cfg.validation_subject_count);
    ReadEnum(r, "objective", kObjectiveNames, cfg.objective);
  }
  root.Read("seed", cfg.seed);
  root.Read("save_snapshots", cfg.save_snapshots);
  root.Read("custom", cfg.custom);
  cfg.Validate();
  return cfg;
}

ExperimentConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ConfigFromJson(j);
}

uint64_t ConfigHash(const ExperimentConfig& cfg) {
  const std::string canonical = ConfigToJson(cfg).dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string HexHash(uint64_t hash) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << hash;
  return out.str();
}

ExperimentConfig PresetConfig(std::string_view name) {
  struct Preset {
    const char* name;
    int d;
    bool dirichlet;
    std::vector<int> hidden;
    int subjects_per_user;
    int users;
  };
  const Preset presets[] = {
      {"A", 1000, true, {256, 64, 16, 4}, 10, 10},
      {"B", 1000, true, {128, 32, 8}, 10, 10},
      {"C", 1000, false, {8}, 10, 10},
      {"D", 1000, false, {2}, 500, 100},
      {"E", 2, false, {128, 32, 8}, 100, 100},
      {"F", 2, false, {2}, 10, 10},
  };
  for (const auto& p : presets) {
    if (name != p.name) continue;
    ExperimentConfig cfg;
    cfg.data.d = p.d;
    cfg.data.sampling = p.dirichlet ? SamplingMode::Dirichlet(1.0) : SamplingMode::Standard();
    cfg.data.users = p.users;
    cfg.data.subjects_per_user = p.subjects_per_user;
    cfg.data.items_per_user = 10000;
    cfg.hidden = p.hidden;
    cfg.rounds = 50;
    // A 10 x 10 federation has about 63 distinct member subjects; 30 per
    // class keeps the validation split just under half of them.
    cfg.validation_subject_count = p.users * p.subjects_per_user <= 100 ? 30 : 100;
    return cfg;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected A-F)");
}

// ---------------------------------------------------------------------------

namespace {

void ApplyAxis(ExperimentConfig& cfg, const std::string& axis, const Json& v) {
  try {
    if (axis == "d") cfg.data.d = v.get<int>();
    else if (axis == "sampling")
      cfg.data.sampling.kind = FromName(kSamplingNames, v.get<std::string>(), "axes.sampling");
    else if (axis == "hidden") cfg.hidden = v.get<std::vector<int>>();
    else if (axis == "rounds") cfg.rounds = v.get<int>();
    else if (axis == "users") cfg.data.users = v.get<int>();
    else if (axis == "subjects_per_user") cfg.data.subjects_per_user = v.get<int>();
    else if (axis == "items_per_user") cfg.data.items_per_user = v.get<int>();
    else if (axis == "access_mode")
      cfg.data.access_mode = FromName(kAccessNames, v.get<std::string>(), "axes.access_mode");
    else if (axis == "validation_subject_count") cfg.validation_subject_count = v.get<int>();
    else throw ConfigError("unknown grid axis '" + axis + "'");
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("grid axis '" + axis + "' has a value of the wrong type");
  }
}

}  // namespace

GridSpec GridFromJson(const Json& j) {
  GridSpec grid;
  ObjectReader r(j, "grid");
  if (const Json* base = r.Find("base")) grid.base = ConfigFromJson(*base);
  r.Read("master_seed", grid.master_seed);
  r.Read("repeats", grid.repeats);
  if (grid.repeats < 1) throw ConfigError("grid.repeats must be >= 1");
  if (const Json* axes = r.Find("axes")) {
    if (!axes->is_object()) throw ConfigError("grid.axes must be an object");
    for (const auto& [name, values] : axes->items()) {
      if (!values.is_array() || values.empty()) {
        throw ConfigError("grid.axes." + name + " must be a non-empty list");
      }
      ExperimentConfig probe = grid.base;
      ApplyAxis(probe, name, values.front());
      grid.axes.emplace_back(name, std::vector<Json>(values.begin(), values.end()));
    }
  }
  return grid;
}

GridSpec TableGrid(const ExperimentConfig& base, uint64_t master_seed) {
  GridSpec grid;
  grid.base = base;
  grid.master_seed = master_seed;
  grid.axes = {
      {"sampling", {"standard", "dirichlet"}},
      {"d", {2, 50, 250, 1000}},
      {"hidden", {Json::array({128}), Json::array({128, 32}), Json::array({128, 32, 8})}},
      {"users", {10, 100}},
      {"subjects_per_user", {10, 100, 500}},
      {"items_per_user", {500, 2000, 10000}},
  };
  return grid;
}

std::vector<ExperimentConfig> ExpandGrid(const GridSpec& grid) {
  std::vector<ExperimentConfig> out;
  std::vector<size_t> index(grid.axes.size(), 0);
  while (true) {
    ExperimentConfig cfg = grid.base;
    for (size_t a = 0; a < grid.axes.size(); ++a) {
      ApplyAxis(cfg, grid.axes[a].first, grid.axes[a].second[index[a]]);
    }
    cfg.seed = 0;
    const uint64_t identity = ConfigHash(cfg);
    for (int rep = 0; rep < grid.repeats; ++rep) {
      ExperimentConfig c = cfg;
      c.seed = DeriveSeed(grid.master_seed, {identity, static_cast<uint64_t>(rep)});
      c.Validate();
      out.push_back(std::move(c));
    }
    size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++index[a] < grid.axes[a].second.size()) break;
      index[a] = 0;
      if (a == 0) return out;
    }
    if (grid.axes.empty()) return out;
  }
}

}  // namespace submi
