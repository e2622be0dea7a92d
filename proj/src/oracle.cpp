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

#include "cavr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace cavr {

StateIndex::StateIndex(const SystemConfig& config, std::size_t ceiling)
    : delta_max_(config.delta_max), k_max_(config.k_max),
      num_sources_(config.num_sources) {
  config.validate();
  per_source_ = static_cast<std::size_t>(delta_max_ + 1) *
                static_cast<std::size_t>(delta_max_) *
                static_cast<std::size_t>(k_max_ + 1);
  size_ = 1;
  for (int m = 0; m < num_sources_; ++m) {
    if (size_ > ceiling / per_source_) {
      throw OracleError("state space exceeds the ceiling of " +
                        std::to_string(ceiling) + " states");
    }
    size_ *= per_source_;
  }
  if (size_ > ceiling) {
    throw OracleError("state space of " + std::to_string(size_) +
                      " states exceeds the ceiling of " + std::to_string(ceiling));
  }
}

std::size_t StateIndex::index(std::span<const SourceState> state) const {
  std::size_t idx = 0;
  for (const auto& s : state) {
    const std::size_t digit =
        (static_cast<std::size_t>(s.aoi_tx) * static_cast<std::size_t>(delta_max_) +
         static_cast<std::size_t>(s.aoi_rx - 1)) *
            static_cast<std::size_t>(k_max_ + 1) +
        static_cast<std::size_t>(s.viol_count);
    idx = idx * per_source_ + digit;
  }
  return idx;
}

SystemState StateIndex::state(std::size_t index) const {
  SystemState out(static_cast<std::size_t>(num_sources_));
  for (int m = num_sources_ - 1; m >= 0; --m) {
    std::size_t digit = index % per_source_;
    index /= per_source_;
    auto& s = out[static_cast<std::size_t>(m)];
    s.viol_count = static_cast<int>(digit % static_cast<std::size_t>(k_max_ + 1));
    digit /= static_cast<std::size_t>(k_max_ + 1);
    s.aoi_rx = static_cast<int>(digit % static_cast<std::size_t>(delta_max_)) + 1;
    s.aoi_tx = static_cast<int>(digit / static_cast<std::size_t>(delta_max_));
  }
  return out;
}

OraclePolicy OraclePolicy::fixed(int action, int num_actions) {
  std::vector<double> probs(static_cast<std::size_t>(num_actions), 0.0);
  probs.at(static_cast<std::size_t>(action)) = 1.0;
  return {"fixed_" + std::to_string(action),
          [probs](const SystemState&) { return probs; }};
}

OraclePolicy OraclePolicy::always_transmit() {
  auto p = fixed(1, 2);
  p.name = "always_transmit";
  p.action_probs = [](const SystemState& s) {
    std::vector<double> probs(s.size() + 1, 0.0);
    probs[1] = 1.0;
    return probs;
  };
  return p;
}

OraclePolicy OraclePolicy::idle(int num_actions) {
  auto p = fixed(0, num_actions);
  p.name = "idle";
  return p;
}

OraclePolicy OraclePolicy::uniform_random(int num_actions) {
  std::vector<double> probs(static_cast<std::size_t>(num_actions), 1.0 / num_actions);
  return {"random", [probs](const SystemState&) { return probs; }};
}

OraclePolicy OraclePolicy::deterministic(std::string name,
                                         std::function<int(const SystemState&)> rule,
                                         int num_actions) {
  return {std::move(name), [rule = std::move(rule), num_actions](const SystemState& s) {
            std::vector<double> probs(static_cast<std::size_t>(num_actions), 0.0);
            probs.at(static_cast<std::size_t>(rule(s))) = 1.0;
            return probs;
          }};
}

double SparseMatrix::row_sum(std::size_t row) const {
  double s = 0.0;
  for (std::size_t j = row_ptr[row]; j < row_ptr[row + 1]; ++j) s += vals[j];
  return s;
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
  for (std::size_t j = row_ptr[row]; j < row_ptr[row + 1]; ++j) {
    if (cols[j] == col) return vals[j];
  }
  return 0.0;
}

std::vector<double> SparseMatrix::left_multiply(std::span<const double> x) const {
  std::vector<double> y(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = row_ptr[i]; j < row_ptr[i + 1]; ++j) y[cols[j]] += xi * vals[j];
  }
  return y;
}

SparseMatrix SparseMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
  SparseMatrix P;
  P.rows = dense.size();
  for (const auto& row : dense) {
    if (row.size() != dense.size()) throw std::invalid_argument("matrix must be square");
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) {
        P.cols.push_back(static_cast<std::uint32_t>(j));
        P.vals.push_back(row[j]);
      }
    }
    P.row_ptr.push_back(P.cols.size());
  }
  return P;
}

SparseMatrix build_chain(const ChainSpec& spec) {
  const SystemConfig& cfg = spec.config;
  const StateIndex index(cfg, spec.state_ceiling);
  if (!spec.policy.action_probs) throw std::invalid_argument("policy is empty");
  const int m_count = cfg.num_sources;
  const std::size_t patterns = std::size_t{1} << m_count;

  SparseMatrix P;
  P.rows = index.size();
  P.row_ptr.reserve(P.rows + 1);
  std::vector<std::pair<std::uint32_t, double>> entries;
  SystemState next(static_cast<std::size_t>(m_count));

  for (std::size_t i = 0; i < index.size(); ++i) {
    const SystemState s = index.state(i);
    const std::vector<double> probs = spec.policy.action_probs(s);
    if (probs.size() != static_cast<std::size_t>(cfg.num_actions())) {
      throw std::invalid_argument("policy returned the wrong number of actions");
    }
    entries.clear();
    for (int a = 0; a < cfg.num_actions(); ++a) {
      const double pa = probs[static_cast<std::size_t>(a)];
      if (pa <= 0.0) continue;
      for (std::size_t pattern = 0; pattern < patterns; ++pattern) {
        double p_arr = 1.0;
        for (int m = 0; m < m_count; ++m) {
          const double g = cfg.sources[static_cast<std::size_t>(m)].p_gen;
          p_arr *= (pattern >> m) & 1U ? g : 1.0 - g;
        }
        if (p_arr <= 0.0) continue;
        for (int delivered = 0; delivered < (a == 0 ? 1 : 2); ++delivered) {
          double p = pa * p_arr;
          if (a != 0) {
            const double ps = cfg.sources[static_cast<std::size_t>(a - 1)].p_succ;
            p *= delivered ? ps : 1.0 - ps;
          }
          if (p <= 0.0) continue;
          for (int m = 0; m < m_count; ++m) {
            const std::size_t mu = static_cast<std::size_t>(m);
            next[mu] = advance_source(s[mu], ((pattern >> m) & 1U) != 0,
                                      delivered != 0 && m == a - 1, cfg);
          }
          entries.emplace_back(static_cast<std::uint32_t>(index.index(next)), p);
        }
      }
    }
    std::sort(entries.begin(), entries.end());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (!P.cols.empty() && P.row_ptr.back() < P.cols.size() &&
          P.cols.back() == entries[e].first) {
        P.vals.back() += entries[e].second;
      } else {
        P.cols.push_back(entries[e].first);
        P.vals.push_back(entries[e].second);
      }
    }
    P.row_ptr.push_back(P.cols.size());
  }
  return P;
}

namespace {

std::vector<char> reachable_from(const SparseMatrix& P, std::size_t start) {
  std::vector<char> seen(P.rows, 0);
  std::vector<std::size_t> stack{start};
  seen[start] = 1;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = P.row_ptr[i]; j < P.row_ptr[i + 1]; ++j) {
      if (P.vals[j] > 0.0 && !seen[P.cols[j]]) {
        seen[P.cols[j]] = 1;
        stack.push_back(P.cols[j]);
      }
    }
  }
  return seen;
}

// Iterative Tarjan over the states flagged in `active`; returns the number of
// strongly connected components with no edge leaving them.
std::size_t count_closed_classes(const SparseMatrix& P, const std::vector<char>& active) {
  constexpr std::size_t kUnvisited = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> order(P.rows, kUnvisited), low(P.rows, 0), comp(P.rows, kUnvisited);
  std::vector<char> on_stack(P.rows, 0);
  std::vector<std::size_t> scc_stack;
  std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge)
  std::size_t counter = 0;
  std::size_t n_comp = 0;

  for (std::size_t root = 0; root < P.rows; ++root) {
    if (!active[root] || order[root] != kUnvisited) continue;
    call.emplace_back(root, P.row_ptr[root]);
    order[root] = low[root] = counter++;
    scc_stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, e] = call.back();
      if (e < P.row_ptr[v + 1]) {
        const std::size_t w = P.cols[e++];
        if (P.vals[e - 1] <= 0.0) continue;
        if (order[w] == kUnvisited) {
          order[w] = low[w] = counter++;
          scc_stack.push_back(w);
          on_stack[w] = 1;
          call.emplace_back(w, P.row_ptr[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], order[w]);
        }
        continue;
      }
      const std::size_t node = v;
      call.pop_back();
      if (!call.empty()) {
        const std::size_t parent = call.back().first;
        low[parent] = std::min(low[parent], low[node]);
      }
      if (low[node] == order[node]) {
        std::size_t w;
        do {
          w = scc_stack.back();
          scc_stack.pop_back();
          on_stack[w] = 0;
          comp[w] = n_comp;
        } while (w != node);
        ++n_comp;
      }
    }
  }

  std::vector<char> leaves(n_comp, 0);
  for (std::size_t i = 0; i < P.rows; ++i) {
    if (!active[i]) continue;
    for (std::size_t j = P.row_ptr[i]; j < P.row_ptr[i + 1]; ++j) {
      if (P.vals[j] > 0.0 && comp[P.cols[j]] != comp[i]) leaves[comp[i]] = 1;
    }
  }
  return static_cast<std::size_t>(std::count(leaves.begin(), leaves.end(), 0));
}

}  // namespace

StationaryDist stationary_distribution(const SparseMatrix& P, std::size_t initial_state,
                                       const StationaryOptions& options) {
  if (P.rows == 0) throw OracleError("empty chain");
  if (initial_state >= P.rows) throw std::out_of_range("initial state out of range");
  for (std::size_t i = 0; i < P.rows; ++i) {
    if (std::abs(P.row_sum(i) - 1.0) > 1e-9) {
      throw OracleError("row " + std::to_string(i) + " is not stochastic");
    }
  }

  const std::vector<char> reach = reachable_from(P, initial_state);
  const std::size_t closed = count_closed_classes(P, reach);
  if (closed != 1) {
    throw OracleError("chain is reducible: " + std::to_string(closed) +
                      " closed classes reachable from the initial state");
  }

  const auto n_reach = static_cast<double>(std::count(reach.begin(), reach.end(), 1));
  std::vector<double> x(P.rows, 0.0);
  for (std::size_t i = 0; i < P.rows; ++i) x[i] = reach[i] ? 1.0 / n_reach : 0.0;

  StationaryDist out;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    std::vector<double> y = P.left_multiply(x);
    double diff = 0.0;
    for (std::size_t i = 0; i < P.rows; ++i) diff = std::max(diff, std::abs(y[i] - x[i]));
    x = std::move(y);
    if (diff < options.tolerance) {
      out.iterations = it;
      break;
    }
  }
  if (out.iterations == 0) {
    throw OracleError("power iteration did not converge within " +
                      std::to_string(options.max_iterations) + " iterations");
  }
  double total = 0.0;
  for (double v : x) total += v;
  for (double& v : x) v /= total;
  const std::vector<double> y = P.left_multiply(x);
  for (std::size_t i = 0; i < P.rows; ++i) {
    out.residual = std::max(out.residual, std::abs(y[i] - x[i]));
  }
  out.pi = std::move(x);
  return out;
}

ExactMetrics exact_cavr(const StationaryDist& dist, const StateIndex& index,
                        const ChainSpec& spec) {
  const SystemConfig& cfg = spec.config;
  if (dist.pi.size() != index.size()) {
    throw std::invalid_argument("distribution does not match the state index");
  }
  ExactMetrics out;
  out.psi.assign(static_cast<std::size_t>(cfg.k_max), 0.0);
  const double inv_m = 1.0 / cfg.num_sources;
  for (std::size_t i = 0; i < dist.pi.size(); ++i) {
    const double p = dist.pi[i];
    if (p == 0.0) continue;
    const SystemState s = index.state(i);
    for (const auto& src : s) {
      for (int k = 1; k <= src.viol_count; ++k) {
        out.psi[static_cast<std::size_t>(k - 1)] += p * inv_m;
      }
      if (src.aoi_rx > cfg.zeta) out.avr += p * inv_m;
    }
    const std::vector<double> probs = spec.policy.action_probs(s);
    out.cost += p * (1.0 - probs[0]);
  }
  return out;
}

ExactMetrics evaluate_exact(const ChainSpec& spec, const StationaryOptions& options) {
  const StateIndex index(spec.config, spec.state_ceiling);
  const SparseMatrix P = build_chain(spec);
  const SystemState start = reset(spec.config);
  const StationaryDist dist = stationary_distribution(P, index.index(start), options);
  return exact_cavr(dist, index, spec);
}

}  // namespace cavr
