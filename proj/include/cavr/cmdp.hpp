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

#ifndef CAVR_CMDP_HPP
#define CAVR_CMDP_HPP

#include <cstdint>
#include <span>

#include "cavr/metrics.hpp"

namespace cavr {

/// Lagrangian reward for one slot:
/// -(1/M) sum_k w_k sum_m 1[v(t+1,m) >= k] - lambda (cost - eta_max).
double lagrangian_reward(std::span<const int> next_viol_counts, int cost,
                         const WeightVector& weights, double lambda, double eta_max);

/// Incremental mean: eta + (cost - eta) / slot. `slot` is 1-based.
double update_eta(double eta_hat, std::int64_t slot, int cost);

/// Projected subgradient step: max(0, lambda + xi (eta_hat - eta_max)).
double update_lambda(double lambda, double xi, double eta_hat, double eta_max);

/// Multiplier and running cost owned by one training run. The slot counter
/// is global across episodes.
struct LagrangeState {
  double lambda = 0.0;
  double eta_hat = 0.0;
  std::int64_t slot = 0;
  double xi = 0.10;
  double eta_max = 0.75;
  double gamma = 0.98;

  /// Advances the slot counter and folds `cost` into eta_hat.
  void record_cost(int cost) {
    ++slot;
    eta_hat = update_eta(eta_hat, slot, cost);
  }
  void update_multiplier() { lambda = update_lambda(lambda, xi, eta_hat, eta_max); }
};

}  // namespace cavr

#endif  // CAVR_CMDP_HPP
