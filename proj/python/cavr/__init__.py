# Copyright 2026 The cavr Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Scheduling under cumulative age-violation constraints."""

from cavr._cavr import (
    ConfigError,
    Environment,
    OracleError,
    SourceState,
    SystemConfig,
    cavr_from_counts,
    config,
    config_hash,
    config_keys,
    direct_avr,
    dpp_index,
    epsilon,
    exact_cavr,
    lagrangian_reward,
    penalty_table,
    sigma_min,
    simulate,
    sweep,
    train,
    update_lambda,
    virtual_queue_update,
    weighted_cavr,
    weights,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Environment",
    "OracleError",
    "SourceState",
    "SystemConfig",
    "cavr_from_counts",
    "config",
    "config_hash",
    "config_keys",
    "direct_avr",
    "dpp_index",
    "epsilon",
    "exact_cavr",
    "lagrangian_reward",
    "penalty_table",
    "sigma_min",
    "simulate",
    "sweep",
    "train",
    "update_lambda",
    "virtual_queue_update",
    "weighted_cavr",
    "weights",
]
