/*
 * Copyright 2026 The cavr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cavr/dpp.hpp"

#include <algorithm>
#include <stdexcept>

namespace cavr {

PenaltyTable penalty_table(const WeightVector& weights) {
  PenaltyTable t;
  t.h.assign(static_cast<std::size_t>(weights.k_max()) + 1, 0.0);
  for (int n = 1; n <= weights.k_max(); ++n) {
    t.h[static_cast<std::size_t>(n)] = t.h[static_cast<std::size_t>(n - 1)] + weights[n];
  }
  return t;
}

double dpp_index(const SourceState& state, double p_succ, int zeta, int delta_max, int k_max,
                 const PenaltyTable& table) {
  const int d_fail = std::min(state.aoi_rx + 1, delta_max);
  const int d_succ = std::min(state.aoi_tx + 1, delta_max);
  const int run = std::min(state.viol_count + 1, k_max);
  const int f = d_fail > zeta ? run : 0;
  const int s = d_succ > zeta ? run : 0;
  return p_succ * (table(f) - table(s));
}

DppDecision dpp_decide(const SystemState& states, double queue_backlog, double v_dpp,
                       const SystemConfig& config, const PenaltyTable& table) {
  if (states.size() != static_cast<std::size_t>(config.num_sources)) {
    throw std::invalid_argument("state has wrong number of sources");
  }
  DppDecision d;
  d.indices.resize(states.size());
  for (std::size_t m = 0; m < states.size(); ++m) {
    d.indices[m] = dpp_index(states[m], config.sources[m].p_succ, config.zeta,
                             config.delta_max, config.k_max, table);
    if (m == 0 || d.indices[m] > d.best_index) {
      d.best_index = d.indices[m];
      d.best_source = static_cast<int>(m) + 1;
    }
  }
  d.action = v_dpp * d.best_index > queue_backlog ? d.best_source : 0;
  return d;
}

double virtual_queue_update(double backlog, int cost, double eta_max) {
  if (backlog < 0.0) throw std::invalid_argument("virtual queue backlog must be nonnegative");
  return std::max(backlog + static_cast<double>(cost) - eta_max, 0.0);
}

DppPolicy::DppPolicy(const SystemConfig& config, const WeightVector& weights, double v_dpp)
    : config_(config), table_(penalty_table(weights)), queue_{0.0, config.eta_max},
      v_dpp_(v_dpp) {
  config_.validate();
  if (weights.k_max() != config.k_max) {
    throw ConfigError("weights", "length must equal k_max");
  }
  if (!(v_dpp > 0.0)) throw ConfigError("v_dpp", "must be positive");
}

DppDecision DppPolicy::decide(const SystemState& states) const {
  return dpp_decide(states, queue_.backlog, v_dpp_, config_, table_);
}

}  // namespace cavr
