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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>
#include <string>

#include "submi/errors.h"
#include "submi/harness.h"

namespace py = pybind11;

namespace submi {
namespace {

py::object ToPython(const Json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Json FromPython(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

ExperimentConfig ConfigArg(const py::handle& obj) { return ConfigFromJson(FromPython(obj)); }

py::dict FederationArrays(const py::dict& data, uint64_t seed) {
  ExperimentConfig cfg;
  cfg.data = ConfigFromJson(Json{{"data", FromPython(data)}, {"custom", true}}).data;
  Federation fed;
  {
    py::gil_scoped_release release;
    fed = BuildFederation(cfg.data, seed);
  }
  size_t n = 0;
  for (const auto& shard : fed.shards) n += shard.points.size();
  py::array_t<double> x({n, static_cast<size_t>(fed.d)});
  py::array_t<int> y(n);
  py::array_t<int64_t> subject(n), user(n);
  auto xv = x.mutable_unchecked<2>();
  auto yv = y.mutable_unchecked<1>();
  auto sv = subject.mutable_unchecked<1>();
  auto uv = user.mutable_unchecked<1>();
  size_t i = 0;
  for (const auto& shard : fed.shards) {
    for (const auto& p : shard.points) {
      for (int k = 0; k < fed.d; ++k) xv(i, k) = p.x[k];
      yv(i) = p.label;
      sv(i) = static_cast<int64_t>(p.subject_id);
      uv(i) = static_cast<int64_t>(shard.user_id);
      ++i;
    }
  }
  py::dict out;
  out["x"] = x;
  out["y"] = y;
  out["subject"] = subject;
  out["user"] = user;
  out["members"] = std::vector<SubjectId>(fed.member_subjects.begin(), fed.member_subjects.end());
  out["nonmembers"] =
      std::vector<SubjectId>(fed.nonmember_subjects.begin(), fed.nonmember_subjects.end());
  return out;
}

LossTrace TraceArg(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeMismatch("losses must be a (rounds, samples) array");
  std::vector<std::vector<double>> rows(a.shape(0), std::vector<double>(a.shape(1)));
  auto v = a.unchecked<2>();
  for (py::ssize_t r = 0; r < a.shape(0); ++r) {
    for (py::ssize_t s = 0; s < a.shape(1); ++s) rows[r][s] = v(r, s);
  }
  return LossTrace(0, std::move(rows));
}

py::dict MetricsDict(const Metrics& m) {
  py::dict d;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["tn"] = m.tn;
  d["fn"] = m.fn;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

}  // namespace
}  // namespace submi

PYBIND11_MODULE(_core, m) {
  using namespace submi;
  m.doc() = "Subject membership inference simulator";

  // Translators run newest first, so the subclass is registered last.
  auto& base = py::register_exception<Error>(m, "SubmiError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("preset_config", [](const std::string& name) {
    return ToPython(ConfigToJson(PresetConfig(name)));
  }, py::arg("name"), "Configuration dict for a named preset (A-F).");

  m.def("default_config", [] { return ToPython(ConfigToJson(ExperimentConfig{})); },
        "Configuration dict with every field at its default.");

  m.def("normalize_config", [](const py::object& cfg) {
    return ToPython(ConfigToJson(ConfigArg(cfg)));
  }, py::arg("config"), "Validate a config dict and fill in defaults.");

  m.def("config_hash", [](const py::object& cfg) {
    return HexHash(ConfigHash(ConfigArg(cfg)));
  }, py::arg("config"));

  m.def("run_experiment", [](const py::object& cfg, std::optional<std::string> out_dir) {
    const ExperimentConfig c = ConfigArg(cfg);
    RunOptions opts;
    if (out_dir) opts.out_dir = std::filesystem::path(*out_dir);
    Json report;
    {
      py::gil_scoped_release release;
      report = ReportToJson(RunExperiment(c, opts));
    }
    return ToPython(report);
  }, py::arg("config"), py::arg("out_dir") = py::none(),
     "Generate, train and attack; returns the report dict.");

  m.def("run_grid", [](const py::object& grid, const std::string& out_dir, int parallelism) {
    const GridSpec spec = GridFromJson(FromPython(grid));
    GridOutcome outcome;
    {
      py::gil_scoped_release release;
      outcome = RunGrid(spec, parallelism, out_dir);
    }
    py::dict d;
    d["executed"] = outcome.executed;
    d["skipped"] = outcome.skipped;
    d["failed"] = outcome.failed;
    return d;
  }, py::arg("grid"), py::arg("out_dir"), py::arg("parallelism") = 1);

  m.def("federation_arrays", &FederationArrays, py::arg("data"), py::arg("seed") = 0,
        "Training points of a generated federation as numpy arrays.");

  m.def("loss_threshold_score", [](const py::array_t<double, py::array::c_style |
                                                               py::array::forcecast>& losses,
                                   double lambda, int round) {
    return LossThresholdScore(TraceArg(losses), lambda, round);
  }, py::arg("losses"), py::arg("lam"), py::arg("round"));

  m.def("loss_across_rounds_score", [](const py::array_t<double, py::array::c_style |
                                                                   py::array::forcecast>& losses) {
    return LossAcrossRoundsScore(TraceArg(losses));
  }, py::arg("losses"));

  m.def("metrics_from_counts", [](int64_t tp, int64_t fp, int64_t tn, int64_t fn) {
    return MetricsDict(MetricsFromCounts(tp, fp, tn, fn));
  }, py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

  m.def("clip", [](const std::vector<double>& v, double c) { return Clip(v, c); },
        py::arg("v"), py::arg("c"));

  m.def("epsilon", [](double noise_multiplier, double sampling_rate, int64_t steps,
                      double delta) {
    DpConfig dp;
    dp.clip_threshold = 1.0;
    dp.noise_multiplier = noise_multiplier;
    dp.delta = delta;
    return ReportEpsilon(dp, sampling_rate, steps);
  }, py::arg("noise_multiplier"), py::arg("sampling_rate"), py::arg("steps"),
     py::arg("delta") = 1e-5);
}
