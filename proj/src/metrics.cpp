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

#include "cavr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cavr {

std::string to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::uniform:
      return "uniform";
    case WeightScheme::exponential:
      return "exponential";
    case WeightScheme::one_hot:
      return "one_hot";
    case WeightScheme::custom:
      return "custom";
  }
  return "unknown";
}

WeightScheme parse_weight_scheme(std::string_view name) {
  if (name == "uniform") return WeightScheme::uniform;
  if (name == "exponential" || name == "exp") return WeightScheme::exponential;
  if (name == "one_hot" || name == "onehot" || name == "one-hot") {
    return WeightScheme::one_hot;
  }
  if (name == "custom") return WeightScheme::custom;
  throw ConfigError("scheme", "unknown weighting scheme '" + std::string(name) + "'");
}

WeightVector WeightVector::uniform(int k_max) {
  if (k_max < 1) throw ConfigError("k_max", "must be at least 1");
  WeightVector w;
  w.scheme = WeightScheme::uniform;
  w.weights.assign(static_cast<std::size_t>(k_max), 1.0 / k_max);
  return w;
}

WeightVector WeightVector::exponential(int k_max, double beta) {
  if (k_max < 1) throw ConfigError("k_max", "must be at least 1");
  if (!(beta > 1.0) || !std::isfinite(beta)) {
    throw ConfigError("beta", "exponential weights require beta > 1");
  }
  WeightVector w;
  w.scheme = WeightScheme::exponential;
  w.beta = beta;
  w.weights.resize(static_cast<std::size_t>(k_max));
  // Scaled by beta^-k_max; the ratio is unchanged and nothing overflows.
  double total = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    const double v = std::pow(beta, k - k_max);
    w.weights[static_cast<std::size_t>(k - 1)] = v;
    total += v;
  }
  for (double& v : w.weights) v /= total;
  return w;
}

WeightVector WeightVector::one_hot(int k_max, int k_o) {
  if (k_max < 1) throw ConfigError("k_max", "must be at least 1");
  if (k_o < 1 || k_o > k_max) {
    throw ConfigError("k_o", "must lie in [1, k_max]");
  }
  WeightVector w;
  w.scheme = WeightScheme::one_hot;
  w.k_o = k_o;
  w.weights.assign(static_cast<std::size_t>(k_max), 0.0);
  w.weights[static_cast<std::size_t>(k_o - 1)] = 1.0;
  return w;
}

WeightVector WeightVector::custom(std::vector<double> weights) {
  if (weights.empty()) throw ConfigError("weights", "must not be empty");
  double total = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ConfigError("weights", "entries must be finite and nonnegative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("weights", "entries must sum to 1");
  }
  WeightVector w;
  w.scheme = WeightScheme::custom;
  w.weights = std::move(weights);
  return w;
}

WeightVector weight_vector(WeightScheme scheme, int k_max, double beta, int k_o) {
  switch (scheme) {
    case WeightScheme::uniform:
      return WeightVector::uniform(k_max);
    case WeightScheme::exponential:
      return WeightVector::exponential(k_max, beta);
    case WeightScheme::one_hot:
      return WeightVector::one_hot(k_max, k_o);
    case WeightScheme::custom:
      break;
  }
  throw ConfigError("scheme", "custom weights must be given explicitly");
}

CavrAccumulator::CavrAccumulator(int k_max, int num_sources)
    : k_max_(k_max), num_sources_(num_sources),
      counts_(static_cast<std::size_t>(std::max(k_max, 0)), 0) {
  if (k_max < 1) throw ConfigError("k_max", "must be at least 1");
  if (num_sources < 1) throw ConfigError("num_sources", "must be positive");
}

void CavrAccumulator::add_slot(std::span<const int> viol_counts) {
  if (viol_counts.size() != static_cast<std::size_t>(num_sources_)) {
    throw std::invalid_argument("slot has wrong number of sources");
  }
  ++slots_;
  const std::int64_t reach = std::min<std::int64_t>(k_max_, slots_);
  for (int v : viol_counts) {
    const std::int64_t top = std::min<std::int64_t>(v, reach);
    for (std::int64_t k = 1; k <= top; ++k) ++counts_[static_cast<std::size_t>(k - 1)];
  }
}

CavrEstimate CavrAccumulator::estimate() const {
  if (slots_ < k_max_) {
    throw std::invalid_argument("horizon " + std::to_string(slots_) +
                                " is shorter than k_max " + std::to_string(k_max_));
  }
  CavrEstimate e;
  e.window_counts = counts_;
  e.horizon = slots_;
  e.num_sources = num_sources_;
  e.psi.resize(counts_.size());
  for (int k = 1; k <= k_max_; ++k) {
    const double denom = static_cast<double>(num_sources_) *
                         static_cast<double>(slots_ - k + 1);
    e.psi[static_cast<std::size_t>(k - 1)] =
        static_cast<double>(counts_[static_cast<std::size_t>(k - 1)]) / denom;
  }
  return e;
}

CavrEstimate accumulate_cavr(const std::vector<std::vector<int>>& viol_counts,
                             int k_max) {
  if (viol_counts.empty()) throw std::invalid_argument("empty trajectory");
  CavrAccumulator acc(k_max, static_cast<int>(viol_counts.front().size()));
  for (const auto& slot : viol_counts) acc.add_slot(slot);
  return acc.estimate();
}

double weighted_cavr(std::span<const double> psi, std::span<const double> weights) {
  if (psi.size() != weights.size()) {
    throw std::invalid_argument("psi and weights differ in length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) total += weights[k] * psi[k];
  return total;
}

double weighted_cavr(std::span<const double> psi, const WeightVector& w) {
  return weighted_cavr(psi, std::span<const double>(w.weights));
}

int sigma_min(std::span<const double> psi, double eps_hat) {
  for (std::size_t k = 0; k < psi.size(); ++k) {
    if (psi[k] <= eps_hat) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(psi.size()) + 1;
}

CostEstimate avg_cost(std::span<const int> actions) {
  if (actions.empty()) throw std::invalid_argument("empty action trajectory");
  CostEstimate c;
  c.horizon = static_cast<std::int64_t>(actions.size());
  c.transmit_slots = std::count_if(actions.begin(), actions.end(),
                                   [](int a) { return a != 0; });
  c.eta_hat = static_cast<double>(c.transmit_slots) / static_cast<double>(c.horizon);
  return c;
}

double direct_avr(const std::vector<std::vector<int>>& aoi_rx, int zeta) {
  if (aoi_rx.empty()) throw std::invalid_argument("empty trajectory");
  std::int64_t hits = 0;
  std::int64_t total = 0;
  for (const auto& slot : aoi_rx) {
    for (int d : slot) {
      hits += d > zeta ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::span<const SourceState> Trajectory::slot(std::int64_t t) const {
  return std::span<const SourceState>(states).subspan(
      static_cast<std::size_t>(t) * static_cast<std::size_t>(num_sources),
      static_cast<std::size_t>(num_sources));
}

void Trajectory::append(const SystemState& state, int action) {
  if (num_sources == 0) num_sources = static_cast<int>(state.size());
  if (state.size() != static_cast<std::size_t>(num_sources)) {
    throw std::invalid_argument("state has wrong number of sources");
  }
  states.insert(states.end(), state.begin(), state.end());
  actions.push_back(action);
}

std::vector<std::vector<int>> Trajectory::viol_counts() const {
  std::vector<std::vector<int>> out(actions.size());
  for (std::int64_t t = 0; t < horizon(); ++t) {
    for (const auto& s : slot(t)) out[static_cast<std::size_t>(t)].push_back(s.viol_count);
  }
  return out;
}

std::vector<std::vector<int>> Trajectory::aoi_rx() const {
  std::vector<std::vector<int>> out(actions.size());
  for (std::int64_t t = 0; t < horizon(); ++t) {
    for (const auto& s : slot(t)) out[static_cast<std::size_t>(t)].push_back(s.aoi_rx);
  }
  return out;
}

CavrEstimate cavr_from_trajectory(const Trajectory& trajectory, int k_max) {
  CavrAccumulator acc(k_max, trajectory.num_sources);
  std::vector<int> v(static_cast<std::size_t>(trajectory.num_sources));
  for (std::int64_t t = 0; t < trajectory.horizon(); ++t) {
    const auto states = trajectory.slot(t);
    for (std::size_t m = 0; m < v.size(); ++m) v[m] = states[m].viol_count;
    acc.add_slot(v);
  }
  return acc.estimate();
}

void write_trajectory_csv(const Trajectory& trajectory, std::ostream& out) {
  out << "t,source,aoi_tx,aoi_rx,viol_count,action,cost\n";
  for (std::int64_t t = 0; t < trajectory.horizon(); ++t) {
    const int a = trajectory.actions[static_cast<std::size_t>(t)];
    const auto states = trajectory.slot(t);
    for (std::size_t m = 0; m < states.size(); ++m) {
      out << (t + 1) << ',' << (m + 1) << ',' << states[m].aoi_tx << ','
          << states[m].aoi_rx << ',' << states[m].viol_count << ',' << a << ','
          << (a != 0 ? 1 : 0) << '\n';
    }
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trajectory CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,source,aoi_tx,aoi_rx,viol_count,action,cost") {
    throw std::runtime_error("unexpected trajectory CSV header: " + line);
  }

  Trajectory traj;
  std::vector<SourceState> pending;
  std::int64_t current_t = 0;
  int current_action = 0;
  std::size_t line_no = 1;

  auto flush = [&]() {
    if (pending.empty()) return;
    if (traj.num_sources == 0) traj.num_sources = static_cast<int>(pending.size());
    if (pending.size() != static_cast<std::size_t>(traj.num_sources)) {
      throw std::runtime_error("slot " + std::to_string(current_t) +
                               " has an inconsistent number of sources");
    }
    traj.append(pending, current_action);
    pending.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::int64_t fields[7];
    char sep = 0;
    for (int i = 0; i < 7; ++i) {
      if (!(row >> fields[i])) {
        throw std::runtime_error("malformed trajectory CSV at line " +
                                 std::to_string(line_no));
      }
      if (i < 6 && (!(row >> sep) || sep != ',')) {
        throw std::runtime_error("malformed trajectory CSV at line " +
                                 std::to_string(line_no));
      }
    }
    const std::int64_t t = fields[0];
    if (t != current_t) {
      flush();
      if (t != current_t + 1) {
        throw std::runtime_error("non-consecutive slot index at line " +
                                 std::to_string(line_no));
      }
      current_t = t;
      current_action = static_cast<int>(fields[5]);
    }
    if (fields[1] != static_cast<std::int64_t>(pending.size()) + 1) {
      throw std::runtime_error("sources out of order at line " + std::to_string(line_no));
    }
    if (fields[5] != current_action || fields[6] != (current_action != 0 ? 1 : 0)) {
      throw std::runtime_error("inconsistent action/cost at line " +
                               std::to_string(line_no));
    }
    pending.push_back(SourceState{static_cast<int>(fields[2]), static_cast<int>(fields[3]),
                                  static_cast<int>(fields[4])});
  }
  flush();
  return traj;
}

}  // namespace cavr
