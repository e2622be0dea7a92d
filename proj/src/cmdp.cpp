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

#include "cavr/cmdp.hpp"

#include <algorithm>
#include <stdexcept>

namespace cavr {

double lagrangian_reward(std::span<const int> next_viol_counts, int cost,
                         const WeightVector& weights, double lambda, double eta_max) {
  if (next_viol_counts.empty()) throw std::invalid_argument("no sources");
  double violation = 0.0;
  const int k_max = weights.k_max();
  for (int v : next_viol_counts) {
    const int top = std::min(v, k_max);
    for (int k = 1; k <= top; ++k) violation += weights[k];
  }
  violation /= static_cast<double>(next_viol_counts.size());
  return -violation - lambda * (static_cast<double>(cost) - eta_max);
}

double update_eta(double eta_hat, std::int64_t slot, int cost) {
  if (slot < 1) throw std::invalid_argument("slot index must be at least 1");
  return eta_hat + (static_cast<double>(cost) - eta_hat) / static_cast<double>(slot);
}

double update_lambda(double lambda, double xi, double eta_hat, double eta_max) {
  return std::max(0.0, lambda + xi * (eta_hat - eta_max));
}

}  // namespace cavr
