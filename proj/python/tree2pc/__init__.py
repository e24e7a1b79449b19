# Copyright (c) 2026, the tree2pc authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Tree-structured two-phase commit: simulator, checker, and cost sweeps."""

from ._tree2pc import (
    ScenarioParseError,
    ScenarioValidationError,
    bench_csv,
    check,
    model_config_names,
    replay,
    run,
    scenario_names,
    scenario_text,
)

__all__ = [
    "ScenarioParseError",
    "ScenarioValidationError",
    "bench_csv",
    "check",
    "model_config_names",
    "replay",
    "run",
    "scenario_names",
    "scenario_text",
]
