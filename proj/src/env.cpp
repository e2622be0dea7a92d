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

#include "cavr/env.hpp"

#include <algorithm>
#include <cmath>

namespace cavr {

namespace {

bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

}  // namespace

SystemConfig SystemConfig::homogeneous(int num_sources, double p_gen,
                                       double p_succ) {
  SystemConfig c;
  c.num_sources = num_sources;
  c.sources.assign(static_cast<std::size_t>(std::max(num_sources, 0)),
                   SourceParams{p_gen, p_succ});
  return c;
}

void SystemConfig::validate() const {
  if (num_sources < 1) throw ConfigError("num_sources", "must be positive");
  if (sources.size() != static_cast<std::size_t>(num_sources)) {
    throw ConfigError("sources", "expected " + std::to_string(num_sources) +
                                     " entries, got " +
                                     std::to_string(sources.size()));
  }
  for (std::size_t m = 0; m < sources.size(); ++m) {
    if (!is_probability(sources[m].p_gen)) {
      throw ConfigError("sources[" + std::to_string(m) + "].p_gen",
                        "must lie in [0,1]");
    }
    if (!is_probability(sources[m].p_succ)) {
      throw ConfigError("sources[" + std::to_string(m) + "].p_succ",
                        "must lie in [0,1]");
    }
  }
  if (zeta < 1) throw ConfigError("zeta", "must be a positive integer");
  if (k_max < 1) throw ConfigError("k_max", "must be at least 1");
  if (delta_max <= zeta) throw ConfigError("delta_max", "must exceed zeta");
  if (!(eta_max > 0.0 && eta_max <= 1.0)) {
    throw ConfigError("eta_max", "must lie in (0,1]");
  }
}

SystemState reset(const SystemConfig& config) {
  config.validate();
  return SystemState(static_cast<std::size_t>(config.num_sources),
                     SourceState{0, 1, 0});
}

void check_state(const SystemState& state, const SystemConfig& config) {
  if (state.size() != static_cast<std::size_t>(config.num_sources)) {
    throw std::invalid_argument("state has wrong number of sources");
  }
  for (const auto& s : state) {
    if (s.aoi_tx < 0 || s.aoi_tx > config.delta_max) {
      throw std::invalid_argument("aoi_tx out of [0, delta_max]");
    }
    if (s.aoi_rx < 1 || s.aoi_rx > config.delta_max) {
      throw std::invalid_argument("aoi_rx out of [1, delta_max]");
    }
    if (s.viol_count < 0 || s.viol_count > config.k_max) {
      throw std::invalid_argument("viol_count out of [0, k_max]");
    }
    if (s.viol_count > 0 && s.aoi_rx <= config.zeta) {
      throw std::invalid_argument("viol_count > 0 requires aoi_rx > zeta");
    }
  }
}

SourceState advance_source(const SourceState& s, bool arrival, bool delivered,
                           const SystemConfig& config) {
  SourceState next;
  next.aoi_rx = delivered ? std::min(s.aoi_tx + 1, config.delta_max)
                          : std::min(s.aoi_rx + 1, config.delta_max);
  next.aoi_tx = arrival ? 0 : std::min(s.aoi_tx + 1, config.delta_max);
  next.viol_count =
      next.aoi_rx > config.zeta ? std::min(s.viol_count + 1, config.k_max) : 0;
  return next;
}

StepOutcome step(const SystemConfig& config, SystemState& state, int action,
                 Rng& rng) {
  if (action < 0 || action > config.num_sources) {
    throw std::out_of_range("action " + std::to_string(action) +
                            " not in {0.." +
                            std::to_string(config.num_sources) + "}");
  }
  const std::size_t m_count = state.size();

  // Arrivals that refresh the buffer for the next slot, then the channel.
  std::vector<char> arrival(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    arrival[m] = rng.bernoulli(config.sources[m].p_gen) ? 1 : 0;
  }
  StepOutcome out;
  out.scheduled = action;
  out.cost = action != 0 ? 1 : 0;
  if (action != 0) {
    out.delivered =
        rng.bernoulli(config.sources[static_cast<std::size_t>(action - 1)].p_succ);
  }

  out.next_viol_counts.resize(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const bool d = out.delivered && static_cast<int>(m) == action - 1;
    state[m] = advance_source(state[m], arrival[m] != 0, d, config);
    out.next_viol_counts[m] = state[m].viol_count;
  }
  return out;
}

std::vector<double> encode_state(const SystemState& state,
                                 const SystemConfig& config) {
  std::vector<double> out;
  out.reserve(3 * state.size());
  const double dmax = config.delta_max;
  const double kmax = config.k_max;
  for (const auto& s : state) {
    out.push_back(s.aoi_tx / dmax);
    out.push_back(s.aoi_rx / dmax);
    out.push_back(s.viol_count / kmax);
  }
  return out;
}

void encode_state(const SystemState& state, const SystemConfig& config,
                  std::span<float> out) {
  if (out.size() != 3 * state.size()) {
    throw std::invalid_argument("feature buffer must hold 3M entries");
  }
  const double dmax = config.delta_max;
  const double kmax = config.k_max;
  for (std::size_t m = 0; m < state.size(); ++m) {
    out[3 * m] = static_cast<float>(state[m].aoi_tx / dmax);
    out[3 * m + 1] = static_cast<float>(state[m].aoi_rx / dmax);
    out[3 * m + 2] = static_cast<float>(state[m].viol_count / kmax);
  }
}

Environment::Environment(SystemConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {
  config_.validate();
  state_ = cavr::reset(config_);
}

const SystemState& Environment::reset() {
  state_ = cavr::reset(config_);
  return state_;
}

StepOutcome Environment::step(int action) {
  return cavr::step(config_, state_, action, rng_);
}

}  // namespace cavr
