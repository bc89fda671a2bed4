# Copyright 2026 The submi Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Subject membership inference simulator for federated learning."""

from ._core import (
    ConfigError,
    SubmiError,
    clip,
    config_hash,
    default_config,
    epsilon,
    federation_arrays,
    loss_across_rounds_score,
    loss_threshold_score,
    metrics_from_counts,
    normalize_config,
    preset_config,
    run_experiment,
    run_grid,
)

__all__ = [
    "ConfigError",
    "SubmiError",
    "clip",
    "config_hash",
    "default_config",
    "epsilon",
    "federation_arrays",
    "loss_across_rounds_score",
    "loss_threshold_score",
    "metrics_from_counts",
    "normalize_config",
    "preset_config",
    "run_experiment",
    "run_grid",
]
