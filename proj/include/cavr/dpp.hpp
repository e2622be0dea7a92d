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

#ifndef CAVR_DPP_HPP
#define CAVR_DPP_HPP

#include <span>
#include <vector>

#include "cavr/env.hpp"
#include "cavr/metrics.hpp"

namespace cavr {

/// H(n) = sum_{k <= n} w_k for n = 0..k_max.
struct PenaltyTable {
  std::vector<double> h;

  double operator()(int n) const { return h[static_cast<std::size_t>(n)]; }
  int k_max() const { return static_cast<int>(h.size()) - 1; }
};

PenaltyTable penalty_table(const WeightVector& weights);

/// Expected reduction in next-slot persistence penalty from scheduling one
/// source: p_succ (H(F) - H(S)), where F and S are the next-slot counters
/// after a failed and a successful delivery of the current buffered packet.
double dpp_index(const SourceState& state, double p_succ, int zeta, int delta_max,
                 int k_max, const PenaltyTable& table);

struct DppDecision {
  int action = 0;
  int best_source = 0;  // 1-based argmax of the index, lowest on ties
  double best_index = 0.0;
  std::vector<double> indices;
};

/// Schedules argmax_m I_m when v_dpp * I_max > queue_backlog, else idles.
DppDecision dpp_decide(const SystemState& states, double queue_backlog, double v_dpp,
                       const SystemConfig& config, const PenaltyTable& table);

/// max(Z + cost - eta_max, 0).
double virtual_queue_update(double backlog, int cost, double eta_max);

struct VirtualQueue {
  double backlog = 0.0;
  double eta_max = 0.75;

  void update(int cost) { backlog = virtual_queue_update(backlog, cost, eta_max); }
};

/// Per-run DPP scheduler: penalty table, virtual queue and V.
class DppPolicy {
 public:
  DppPolicy(const SystemConfig& config, const WeightVector& weights, double v_dpp = 10.0);

  DppDecision decide(const SystemState& states) const;
  void observe_cost(int cost) { queue_.update(cost); }

  double backlog() const { return queue_.backlog; }
  double v_dpp() const { return v_dpp_; }
  const PenaltyTable& table() const { return table_; }
  void reset_queue() { queue_.backlog = 0.0; }

 private:
  SystemConfig config_;
  PenaltyTable table_;
  VirtualQueue queue_;
  double v_dpp_;
};

}  // namespace cavr

#endif  // CAVR_DPP_HPP
