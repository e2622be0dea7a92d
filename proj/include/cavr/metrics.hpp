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

#ifndef CAVR_METRICS_HPP
#define CAVR_METRICS_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavr/env.hpp"

namespace cavr {

enum class WeightScheme { uniform, exponential, one_hot, custom };

std::string to_string(WeightScheme scheme);
WeightScheme parse_weight_scheme(std::string_view name);

/// Convex weights over persistence scales k = 1..k_max (stored 0-based).
struct WeightVector {
  std::vector<double> weights;
  WeightScheme scheme = WeightScheme::uniform;
  double beta = 0.0;
  int k_o = 0;

  int k_max() const { return static_cast<int>(weights.size()); }
  double operator[](int k) const { return weights[static_cast<std::size_t>(k - 1)]; }

  static WeightVector uniform(int k_max);
  static WeightVector exponential(int k_max, double beta);
  static WeightVector one_hot(int k_max, int k_o);
  /// Rejects negative entries and sums that differ from 1 by more than 1e-12.
  static WeightVector custom(std::vector<double> weights);
};

/// `beta` is read for exponential weights and `k_o` for one-hot weights.
WeightVector weight_vector(WeightScheme scheme, int k_max, double beta = 2.0,
                           int k_o = 1);

/// Finite-horizon C-AVR estimate. Index 0 holds scale k = 1.
struct CavrEstimate {
  std::vector<std::int64_t> window_counts;
  std::int64_t horizon = 0;
  int num_sources = 0;
  std::vector<double> psi;

  int k_max() const { return static_cast<int>(psi.size()); }
};

/// Streaming form of the counter-based estimator.
///
/// Slot t (1-based, in arrival order) contributes to scale k iff t >= k and
/// the source's violation counter is at least k.
class CavrAccumulator {
 public:
  CavrAccumulator(int k_max, int num_sources);

  void add_slot(std::span<const int> viol_counts);
  std::int64_t slots() const { return slots_; }
  const std::vector<std::int64_t>& window_counts() const { return counts_; }

  /// Throws std::invalid_argument when fewer than k_max slots were added.
  CavrEstimate estimate() const;

 private:
  int k_max_;
  int num_sources_;
  std::int64_t slots_ = 0;
  std::vector<std::int64_t> counts_;
};

/// `viol_counts[t][m]` holds v(t+1, m+1).
CavrEstimate accumulate_cavr(const std::vector<std::vector<int>>& viol_counts,
                             int k_max);

double weighted_cavr(std::span<const double> psi, std::span<const double> weights);
double weighted_cavr(std::span<const double> psi, const WeightVector& w);

/// Smallest k with psi[k] <= eps_hat, or k_max + 1 when none qualifies.
int sigma_min(std::span<const double> psi, double eps_hat);

struct CostEstimate {
  std::int64_t transmit_slots = 0;
  std::int64_t horizon = 0;
  double eta_hat = 0.0;
};

CostEstimate avg_cost(std::span<const int> actions);

/// Fraction of (slot, source) pairs with aoi_rx > zeta.
double direct_avr(const std::vector<std::vector<int>>& aoi_rx, int zeta);

/// Recorded rollout: the state at the start of each slot and the action
/// taken in that slot.
struct Trajectory {
  int num_sources = 0;
  std::vector<SourceState> states;  // horizon * num_sources, slot-major
  std::vector<int> actions;

  std::int64_t horizon() const { return static_cast<std::int64_t>(actions.size()); }
  std::span<const SourceState> slot(std::int64_t t) const;
  void append(const SystemState& state, int action);

  std::vector<std::vector<int>> viol_counts() const;
  std::vector<std::vector<int>> aoi_rx() const;
};

CavrEstimate cavr_from_trajectory(const Trajectory& trajectory, int k_max);

/// CSV with header `t,source,aoi_tx,aoi_rx,viol_count,action,cost`, one row
/// per (slot, source); t and source are 1-based.
void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace cavr

#endif  // CAVR_METRICS_HPP
