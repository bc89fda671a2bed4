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

#include "submi/harness.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "submi/errors.h"

namespace submi {

AttackSplit SplitAttackSubjects(const std::set<SubjectId>& members,
                                const std::set<SubjectId>& nonmembers,
                                int per_class, Rng& rng) {
  if (per_class < 1) throw InsufficientSubjects("need >= 1 validation subject per class");
  const auto k = static_cast<size_t>(per_class);
  if (k >= members.size() || k >= nonmembers.size()) {
    throw InsufficientSubjects(
        "validation takes " + std::to_string(per_class) +
        " subjects per class but only " + std::to_string(members.size()) +
        " members and " + std::to_string(nonmembers.size()) +
        " non-members exist; the test split would be empty");
  }
  AttackSplit split;
  for (const auto& [ids, truth] : {std::pair{&members, true}, std::pair{&nonmembers, false}}) {
    std::vector<SubjectId> order(ids->begin(), ids->end());
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i = 0; i < order.size(); ++i) {
      (i < k ? split.validation : split.test)[order[i]] = truth;
    }
  }
  return split;
}

double MeanLoss(const ModelParams& params, const Federation& fed) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& shard : fed.shards) {
    for (double loss : PerExampleLosses(params, shard.points)) sum += loss;
    n += shard.points.size();
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double Accuracy(const ModelParams& params, std::span<const LabeledPoint> points) {
  if (points.empty()) return 0.0;
  const std::vector<double> probs = Predictions(params, points);
  size_t correct = 0;
  for (size_t i = 0; i < points.size(); ++i) {
    correct += (probs[i] >= 0.5 ? 1 : 0) == points[i].label;
  }
  return static_cast<double>(correct) / static_cast<double>(points.size());
}

namespace {

double SecondsSince(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void Report(const RunOptions& options, const std::string& message) {
  if (options.progress) options.progress(message);
}

std::optional<double> EpsilonFor(const ExperimentConfig& cfg, const Federation& fed) {
  if (!cfg.dp || !cfg.dp->report_epsilon || cfg.rounds < 1) return std::nullopt;
  if (cfg.dp->granularity == DpGranularity::kUser) {
    return ReportEpsilon(*cfg.dp, cfg.training.participation, cfg.rounds);
  }
  const double shard = static_cast<double>(fed.num_training_points()) /
                       static_cast<double>(fed.shards.size());
  const double batch = cfg.training.batch_size;
  const double q = std::min(1.0, batch / shard);
  const auto steps = static_cast<int64_t>(cfg.rounds) * cfg.training.local_epochs *
                     static_cast<int64_t>(std::ceil(shard / batch));
  return ReportEpsilon(*cfg.dp, q, steps);
}

}  // namespace

ExperimentReport EvaluateExperiment(const ExperimentConfig& cfg,
                                    const Federation& fed,
                                    std::span<const ModelSnapshot> snapshots,
                                    const RunOptions& options) {
  ExperimentReport report;
  report.config = cfg;
  report.config_hash = HexHash(ConfigHash(cfg));
  report.seed = cfg.seed;
  report.members = fed.member_subjects.size();
  report.nonmembers = fed.nonmember_subjects.size();

  for (const auto& snap : snapshots) {
    report.rounds.push_back({snap.round, MeanLoss(snap.params, fed),
                             Accuracy(snap.params, fed.test_points)});
  }
  Report(options, "model accuracy after round " +
                      std::to_string(snapshots.back().round) + ": " +
                      std::to_string(report.rounds.back().test_accuracy));

  Rng split_rng(DeriveSeed(cfg.seed, {kAttackSplitStream}));
  const AttackSplit split = SplitAttackSubjects(
      fed.member_subjects, fed.nonmember_subjects, cfg.validation_subject_count,
      split_rng);
  report.validation_subjects = split.validation.size();
  report.test_subjects = split.test.size();

  std::vector<SnapshotLossQuery> queries;
  queries.reserve(snapshots.size());
  for (const auto& snap : snapshots) queries.emplace_back(snap.params);
  std::vector<const LossQuery*> rounds;
  for (const auto& q : queries) rounds.push_back(&q);
  const LossTraces traces = CollectLosses(
      rounds, fed.attack_pool, static_cast<size_t>(cfg.data.max_attack_samples));

  for (AttackKind kind : cfg.attacks) {
    if (kind == AttackKind::kLossAcrossRounds && snapshots.size() < 2) {
      Report(options, "skipping loss-across-rounds: no training rounds");
      continue;
    }
    AttackReport attack = RunAttack(kind, traces, split.validation, split.test,
                                    cfg.objective);
    Report(options, std::string(AttackKindName(kind)) +
                        " F1: " + std::to_string(attack.metrics.f1));
    report.attacks.emplace(kind, std::move(attack));
  }
  report.epsilon = EpsilonFor(cfg, fed);
  return report;
}

ExperimentReport RunExperiment(const ExperimentConfig& cfg,
                               const RunOptions& options) {
  cfg.Validate();
  const auto start = std::chrono::steady_clock::now();
  Report(options, "building federation");
  const Federation fed = BuildFederation(cfg.data, cfg.seed);
  Report(options, "training " + std::to_string(fed.shards.size()) + " users on " +
                      std::to_string(fed.num_training_points()) + " points");
  const std::vector<ModelSnapshot> snapshots = TrainFederation(
      fed, cfg.model(), cfg.training, cfg.rounds, cfg.dp, cfg.seed,
      [&](const ModelSnapshot& snap) {
        if (snap.round > 0) Report(options, "finished round " + std::to_string(snap.round));
      });
  ExperimentReport report = EvaluateExperiment(cfg, fed, snapshots, options);
  if (options.out_dir) {
    if (cfg.save_snapshots) SaveSnapshots(*options.out_dir / "snapshots", snapshots);
    report.wall_seconds = SecondsSince(start);
    WriteExperimentOutputs(*options.out_dir, report);
  }
  report.wall_seconds = SecondsSince(start);
  return report;
}

// ---------------------------------------------------------------------------
// Persistence.

std::string FormatCsvDouble(double value) {
  if (std::isnan(value)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

void WriteFileAtomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

Json MetricsToJson(const Metrics& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn},
          {"accuracy", m.accuracy}, {"precision", m.precision},
          {"recall", m.recall}, {"f1", m.f1}};
}

Json ThresholdsToJson(AttackKind kind, const AttackThresholds& t) {
  if (kind == AttackKind::kLossThreshold) {
    return {{"lambda", t.lambda}, {"count_cutoff", t.count_cutoff}};
  }
  return {{"rounds_cutoff", t.rounds_cutoff}};
}

}  // namespace

Json ReportToJson(const ExperimentReport& report) {
  Json j;
  j["config"] = ConfigToJson(report.config);
  j["config_hash"] = report.config_hash;
  j["seed"] = report.seed;
  j["subjects"] = {{"members", report.members},
                   {"nonmembers", report.nonmembers},
                   {"validation", report.validation_subjects},
                   {"test", report.test_subjects}};
  j["rounds"] = Json::array();
  for (const auto& r : report.rounds) {
    j["rounds"].push_back({{"round", r.round},
                           {"train_loss", r.train_loss},
                           {"test_accuracy", r.test_accuracy}});
  }
  j["attacks"] = Json::object();
  for (const auto& [kind, attack] : report.attacks) {
    Json a;
    a["thresholds"] = ThresholdsToJson(kind, attack.thresholds);
    a["metrics"] = MetricsToJson(attack.metrics);
    a["per_round"] = Json::array();
    for (const auto& r : attack.per_round) {
      Json row = MetricsToJson(r.metrics);
      row["round"] = r.round;
      row["thresholds"] = ThresholdsToJson(kind, r.thresholds);
      a["per_round"].push_back(std::move(row));
    }
    a["subjects"] = Json::array();
    for (const auto& [subject, v] : attack.per_subject) {
      a["subjects"].push_back({{"subject", subject},
                               {"score", v.score},
                               {"verdict", v.verdict},
                               {"truth", v.truth}});
    }
    j["attacks"][std::string(AttackKindName(kind))] = std::move(a);
  }
  j["epsilon"] = report.epsilon ? Json(*report.epsilon) : Json(nullptr);
  j["wall_seconds"] = report.wall_seconds;
  return j;
}

void WriteExperimentOutputs(const std::filesystem::path& dir,
                            const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  auto f1_at = [&](AttackKind kind, int round) -> std::string {
    const auto it = report.attacks.find(kind);
    if (it == report.attacks.end()) return "";
    for (const auto& r : it->second.per_round) {
      if (r.round == round) return FormatCsvDouble(r.metrics.f1);
    }
    return "";
  };
  std::ostringstream per_round;
  per_round << "round,train_loss,test_acc,f1_lt,f1_lar\n";
  for (const auto& r : report.rounds) {
    per_round << r.round << ',' << FormatCsvDouble(r.train_loss) << ','
              << FormatCsvDouble(r.test_accuracy) << ','
              << f1_at(AttackKind::kLossThreshold, r.round) << ','
              << f1_at(AttackKind::kLossAcrossRounds, r.round) << '\n';
  }
  WriteFileAtomic(dir / "per_round.csv", per_round.str());

  for (const auto& [kind, attack] : report.attacks) {
    const std::string name(AttackKindName(kind));
    std::ostringstream subjects;
    subjects << "subject_id,score,verdict,truth\n";
    for (const auto& [subject, v] : attack.per_subject) {
      subjects << subject << ',' << v.score << ',' << (v.verdict ? 1 : 0) << ','
               << (v.truth ? 1 : 0) << '\n';
    }
    WriteFileAtomic(dir / (name + "_subjects.csv"), subjects.str());
    std::ostringstream rounds;
    rounds << "round,f1,precision,recall\n";
    for (const auto& r : attack.per_round) {
      rounds << r.round << ',' << FormatCsvDouble(r.metrics.f1) << ','
             << FormatCsvDouble(r.metrics.precision) << ','
             << FormatCsvDouble(r.metrics.recall) << '\n';
    }
    WriteFileAtomic(dir / (name + "_rounds.csv"), rounds.str());
  }
  WriteFileAtomic(dir / "report.json", ReportToJson(report).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Grid.

namespace {

const char kGridHeader[] =
    "run_id,seed,sampling,d,hidden,rounds,users,subjects_per_user,"
    "items_per_user,access_mode,dp,validation_subjects,model_accuracy,"
    "lt_accuracy,lt_precision,lt_recall,lt_f1,"
    "lar_accuracy,lar_precision,lar_recall,lar_f1,epsilon,wall_seconds\n";

std::string GridRow(const Json& report) {
  const Json& cfg = report.at("config");
  const Json& data = cfg.at("data");
  std::ostringstream row;
  std::string hidden;
  for (const auto& h : cfg.at("model").at("hidden")) {
    hidden += (hidden.empty() ? "" : "-") + std::to_string(h.get<int>());
  }
  std::string dp = "none";
  if (!cfg.at("dp").is_null()) {
    dp = cfg.at("dp").at("granularity").get<std::string>();
  }
  row << report.at("config_hash").get<std::string>() << ','
      << report.at("seed").get<uint64_t>() << ','
      << data.at("sampling").get<std::string>() << ',' << data.at("d").get<int>()
      << ',' << (hidden.empty() ? "none" : hidden) << ','
      << cfg.at("training").at("rounds").get<int>() << ','
      << data.at("users").get<int>() << ','
      << data.at("subjects_per_user").get<int>() << ','
      << data.at("items_per_user").get<int>() << ','
      << data.at("access_mode").get<std::string>() << ',' << dp << ','
      << cfg.at("attack").at("validation_subjects").get<int>() << ','
      << FormatCsvDouble(report.at("rounds").back().at("test_accuracy").get<double>());
  for (const char* kind : {"loss-threshold", "loss-across-rounds"}) {
    const Json& attacks = report.at("attacks");
    if (attacks.contains(kind)) {
      const Json& m = attacks.at(kind).at("metrics");
      for (const char* key : {"accuracy", "precision", "recall", "f1"}) {
        row << ',' << FormatCsvDouble(m.at(key).get<double>());
      }
    } else {
      row << ",,,,";
    }
  }
  row << ',' << (report.at("epsilon").is_null()
                     ? std::string()
                     : FormatCsvDouble(report.at("epsilon").get<double>()));
  row << ',' << FormatCsvDouble(report.at("wall_seconds").get<double>()) << '\n';
  return row.str();
}

Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return Json::parse(in);
}

std::string CsvQuote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += (c == '\n') ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

GridOutcome RunGrid(const GridSpec& grid, int parallelism,
                    const std::filesystem::path& out_dir,
                    const ProgressFn& progress) {
  const std::vector<ExperimentConfig> configs = ExpandGrid(grid);
  std::filesystem::create_directories(out_dir / "runs");
  GridOutcome outcome;
  std::mutex mu;
  std::atomic<size_t> next{0};
  auto log = [&](const std::string& message) {
    if (progress) {
      std::lock_guard lock(mu);
      progress(message);
    }
  };
  auto worker = [&] {
    for (size_t i = next++; i < configs.size(); i = next++) {
      const ExperimentConfig& cfg = configs[i];
      const std::string id = HexHash(ConfigHash(cfg));
      const auto dir = out_dir / "runs" / id;
      if (std::filesystem::exists(dir / "report.json")) {
        std::lock_guard lock(mu);
        ++outcome.skipped;
        continue;
      }
      try {
        RunOptions options;
        options.out_dir = dir;
        RunExperiment(cfg, options);
        log("[" + std::to_string(i + 1) + "/" + std::to_string(configs.size()) +
            "] " + id + " done");
        std::lock_guard lock(mu);
        ++outcome.executed;
      } catch (const std::exception& e) {
        log("[" + std::to_string(i + 1) + "/" + std::to_string(configs.size()) +
            "] " + id + " failed: " + e.what());
        std::lock_guard lock(mu);
        ++outcome.failed;
        const auto path = out_dir / "failures.csv";
        const bool fresh = !std::filesystem::exists(path);
        std::ofstream out(path, std::ios::app);
        if (fresh) out << "run_id,reason\n";
        out << id << ',' << CsvQuote(e.what()) << '\n';
      }
    }
  };
  const int threads = std::max(1, parallelism);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string csv = kGridHeader;
  for (const auto& cfg : configs) {
    const auto path = out_dir / "runs" / HexHash(ConfigHash(cfg)) / "report.json";
    if (std::filesystem::exists(path)) csv += GridRow(ReadJsonFile(path));
  }
  WriteFileAtomic(out_dir / "grid.csv", csv);
  return outcome;
}

size_t AggregateReports(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> reports;
  const auto runs = dir / "runs";
  if (std::filesystem::exists(runs)) {
    for (const auto& entry : std::filesystem::directory_iterator(runs)) {
      const auto path = entry.path() / "report.json";
      if (std::filesystem::exists(path)) reports.push_back(path);
    }
  }
  std::sort(reports.begin(), reports.end());
  std::string csv = kGridHeader;
  for (const auto& path : reports) csv += GridRow(ReadJsonFile(path));
  WriteFileAtomic(dir / "grid.csv", csv);
  return reports.size();
}

}  // namespace submi
