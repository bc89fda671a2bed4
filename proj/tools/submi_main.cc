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

// submi: generate federations, train them and run subject membership
// inference attacks from the command line.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "submi/errors.h"
#include "submi/harness.h"

namespace fs = std::filesystem;
using namespace submi;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset;
  std::optional<uint64_t> seed;
  std::optional<int> rounds;
  std::string out = "out";
  std::string attack = "both";
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool with_attack) {
  cmd->add_option("--config", f.config_path, "experiment config (JSON)");
  cmd->add_option("--preset", f.preset, "start from example config A-F instead")
      ->check(CLI::IsMember({"A", "B", "C", "D", "E", "F"}));
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--rounds", f.rounds, "override the number of rounds");
  cmd->add_option("--out", f.out, "output directory");
  if (with_attack) {
    cmd->add_option("--attack", f.attack, "attacks to run")
        ->check(CLI::IsMember({"loss-threshold", "loss-across-rounds", "both"}));
  }
  cmd->add_flag("-q,--quiet", f.quiet, "no progress output");
}

ExperimentConfig ResolveConfig(const CommonFlags& f) {
  if (!f.config_path.empty() && !f.preset.empty()) {
    throw ConfigError("--config and --preset are mutually exclusive");
  }
  ExperimentConfig cfg = f.preset.empty()
                             ? (f.config_path.empty() ? ExperimentConfig{}
                                                      : LoadConfig(f.config_path))
                             : PresetConfig(f.preset);
  if (f.seed) cfg.seed = *f.seed;
  if (f.rounds) {
    cfg.rounds = *f.rounds;
    if (cfg.rounds < 1 || cfg.rounds > 50) cfg.custom = true;
  }
  if (f.attack == "loss-threshold") cfg.attacks = {AttackKind::kLossThreshold};
  if (f.attack == "loss-across-rounds") cfg.attacks = {AttackKind::kLossAcrossRounds};
  if (f.attack == "both") {
    cfg.attacks = {AttackKind::kLossThreshold, AttackKind::kLossAcrossRounds};
  }
  cfg.Validate();
  return cfg;
}

ProgressFn Progress(bool quiet) {
  if (quiet) return nullptr;
  const auto start = std::chrono::steady_clock::now();
  return [start](std::string_view message) {
    const double t =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::clog << "[" << std::fixed;
    std::clog.precision(1);
    std::clog << t << "s] " << message << std::endl;
  };
}

void WriteConfig(const fs::path& dir, const ExperimentConfig& cfg) {
  WriteFileAtomic(dir / "config.json", ConfigToJson(cfg).dump(2) + "\n");
}

void WriteTrainCsv(const fs::path& path, const ExperimentReport& report) {
  std::ostringstream csv;
  csv << "round,mean_train_loss,test_accuracy\n";
  for (const auto& r : report.rounds) {
    csv << r.round << ',' << FormatCsvDouble(r.train_loss) << ','
        << FormatCsvDouble(r.test_accuracy) << '\n';
  }
  WriteFileAtomic(path, csv.str());
}

Federation LoadOrBuild(const std::string& federation_path, const ExperimentConfig& cfg) {
  if (federation_path.empty()) return BuildFederation(cfg.data, cfg.seed);
  std::ifstream in(federation_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + federation_path);
  return ReadFederation(in);
}

void PrintSummary(const ExperimentReport& report) {
  std::cout << "model test accuracy: " << FormatCsvDouble(report.final_accuracy()) << "\n";
  for (const auto& [kind, attack] : report.attacks) {
    const Metrics& m = attack.metrics;
    std::cout << AttackKindName(kind) << ": accuracy " << FormatCsvDouble(m.accuracy)
              << " precision " << FormatCsvDouble(m.precision) << " recall "
              << FormatCsvDouble(m.recall) << " F1 " << FormatCsvDouble(m.f1) << "\n";
  }
  if (report.epsilon) std::cout << "epsilon: " << FormatCsvDouble(*report.epsilon) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subject membership inference in simulated cross-silo federations"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, attack_flags, run_flags;
  std::string attack_snapshots, attack_federation;
  auto* gen = app.add_subcommand("gen", "generate a federation and dump it");
  AddCommon(gen, gen_flags, false);
  auto* train = app.add_subcommand("train", "train a federation, saving every round");
  AddCommon(train, train_flags, false);
  auto* attack = app.add_subcommand("attack", "attack a directory of snapshots");
  AddCommon(attack, attack_flags, true);
  attack->add_option("--snapshots", attack_snapshots,
                     "snapshot directory (default <out>/snapshots)");
  attack->add_option("--federation", attack_federation,
                     "federation dump from `gen` (default: regenerate from config)");
  auto* run = app.add_subcommand("run", "generate, train and attack one config");
  AddCommon(run, run_flags, true);

  std::string grid_config, grid_out = "grid_out";
  int parallelism = 1;
  bool table = false, grid_quiet = false;
  uint64_t master_seed = 0;
  auto* grid = app.add_subcommand("grid", "sweep a grid of configs");
  grid->add_option("--config", grid_config, "grid file (JSON: base, axes, master_seed)");
  grid->add_flag("--table", table, "sweep the full 432-config value table");
  grid->add_option("--seed", master_seed, "master seed for --table");
  grid->add_option("--out", grid_out, "output directory");
  grid->add_option("--parallelism", parallelism, "concurrent experiments")
      ->check(CLI::PositiveNumber);
  grid->add_flag("-q,--quiet", grid_quiet, "no progress output");

  std::string report_dir = "grid_out";
  auto* report = app.add_subcommand("report", "aggregate run reports into grid.csv");
  report->add_option("--out", report_dir, "grid output directory");

  std::string preset_name;
  auto* show = app.add_subcommand("show-config", "print a resolved config");
  show->add_option("--preset", preset_name, "example config A-F")
      ->check(CLI::IsMember({"A", "B", "C", "D", "E", "F"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const ExperimentConfig cfg = ResolveConfig(gen_flags);
      const fs::path out(gen_flags.out);
      fs::create_directories(out);
      const Federation fed = BuildFederation(cfg.data, cfg.seed);
      const fs::path path = out / "federation.bin";
      {
        std::ofstream file(path.string() + ".tmp", std::ios::binary);
        WriteFederation(file, fed);
      }
      fs::rename(path.string() + ".tmp", path);
      WriteConfig(out, cfg);
      std::cout << "wrote " << path.string() << ": " << fed.shards.size() << " users, "
                << fed.num_training_points() << " training points, "
                << fed.member_subjects.size() << " members, "
                << fed.nonmember_subjects.size() << " non-members\n";
    } else if (*train) {
      const ExperimentConfig cfg = ResolveConfig(train_flags);
      const fs::path out(train_flags.out);
      const ProgressFn progress = Progress(train_flags.quiet);
      const Federation fed = BuildFederation(cfg.data, cfg.seed);
      const auto snapshots = TrainFederation(
          fed, cfg.model(), cfg.training, cfg.rounds, cfg.dp, cfg.seed,
          [&](const ModelSnapshot& s) {
            if (progress && s.round > 0) progress("finished round " + std::to_string(s.round));
          });
      SaveSnapshots(out / "snapshots", snapshots);
      ExperimentReport stats;
      for (const auto& s : snapshots) {
        stats.rounds.push_back(
            {s.round, MeanLoss(s.params, fed), Accuracy(s.params, fed.test_points)});
      }
      WriteTrainCsv(out / "train.csv", stats);
      WriteConfig(out, cfg);
      std::cout << "wrote " << snapshots.size() << " snapshots to "
                << (out / "snapshots").string() << "; final test accuracy "
                << FormatCsvDouble(stats.rounds.back().test_accuracy) << "\n";
    } else if (*attack) {
      const ExperimentConfig cfg = ResolveConfig(attack_flags);
      const fs::path out(attack_flags.out);
      const fs::path snap_dir =
          attack_snapshots.empty() ? out / "snapshots" : fs::path(attack_snapshots);
      const Federation fed = LoadOrBuild(attack_federation, cfg);
      const auto snapshots = LoadSnapshots(snap_dir);
      ExperimentConfig effective = cfg;
      effective.rounds = static_cast<int>(snapshots.size()) - 1;
      effective.custom = effective.custom || effective.rounds < 1 || effective.rounds > 50;
      RunOptions options;
      options.progress = Progress(attack_flags.quiet);
      const ExperimentReport result = EvaluateExperiment(effective, fed, snapshots, options);
      WriteExperimentOutputs(out, result);
      PrintSummary(result);
    } else if (*run) {
      const ExperimentConfig cfg = ResolveConfig(run_flags);
      RunOptions options;
      options.out_dir = fs::path(run_flags.out);
      options.progress = Progress(run_flags.quiet);
      const ExperimentReport result = RunExperiment(cfg, options);
      PrintSummary(result);
    } else if (*grid) {
      if (table == !grid_config.empty()) {
        throw ConfigError("grid needs exactly one of --config or --table");
      }
      GridSpec spec;
      if (table) {
        spec = TableGrid(ExperimentConfig{}, master_seed);
      } else {
        std::ifstream in(grid_config);
        if (!in) throw ConfigError("cannot open " + grid_config);
        spec = GridFromJson(Json::parse(in));
      }
      const GridOutcome outcome =
          RunGrid(spec, parallelism, grid_out, Progress(grid_quiet));
      std::cout << "executed " << outcome.executed << ", skipped " << outcome.skipped
                << ", failed " << outcome.failed << "; wrote "
                << (fs::path(grid_out) / "grid.csv").string() << "\n";
      return outcome.failed == 0 ? 0 : 3;
    } else if (*report) {
      const size_t rows = AggregateReports(report_dir);
      std::cout << "aggregated " << rows << " reports into "
                << (fs::path(report_dir) / "grid.csv").string() << "\n";
    } else if (*show) {
      const ExperimentConfig cfg =
          preset_name.empty() ? ExperimentConfig{} : PresetConfig(preset_name);
      std::cout << ConfigToJson(cfg).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
