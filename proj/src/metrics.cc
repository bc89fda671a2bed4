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

#include "submi/metrics.h"

#include "submi/errors.h"

namespace submi {

Metrics MetricsFromCounts(int64_t tp, int64_t fp, int64_t tn, int64_t fn) {
  Metrics m{tp, fp, tn, fn};
  const int64_t total = tp + fp + tn + fn;
  m.accuracy = total > 0 ? static_cast<double>(tp + tn) / total : 0.0;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

Metrics ComputeMetrics(std::span<const std::pair<bool, bool>> verdicts) {
  if (verdicts.empty()) throw ConfigError("no verdicts to score");
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& [verdict, truth] : verdicts) {
    if (verdict && truth) ++tp;
    else if (verdict) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  return MetricsFromCounts(tp, fp, tn, fn);
}

}  // namespace submi
