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

#ifndef SUBMI_METRICS_H_
#define SUBMI_METRICS_H_

#include <cstdint>
#include <span>
#include <utility>

namespace submi {

// Binary classification metrics with "member" as the positive class.
// 0/0 ratios are reported as 0.
struct Metrics {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t tn = 0;
  int64_t fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Metrics MetricsFromCounts(int64_t tp, int64_t fp, int64_t tn, int64_t fn);

// Each entry is (verdict, truth).
Metrics ComputeMetrics(std::span<const std::pair<bool, bool>> verdicts);

}  // namespace submi

#endif  // SUBMI_METRICS_H_
