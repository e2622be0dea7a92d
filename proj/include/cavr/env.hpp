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

#ifndef CAVR_ENV_HPP
#define CAVR_ENV_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavr/rng.hpp"

namespace cavr {

/// Thrown for invalid configuration; `field()` names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct SourceParams {
  double p_gen = 0.7;   // per-slot packet generation probability
  double p_succ = 0.7;  // per-slot delivery success probability
};

struct SystemConfig {
  int num_sources = 10;
  std::vector<SourceParams> sources;
  int zeta = 15;        // AoI violation threshold (slots)
  int k_max = 9;        // violation counter truncation
  int delta_max = 100;  // AoI truncation
  double eta_max = 0.75;

  /// M identical sources.
  static SystemConfig homogeneous(int num_sources, double p_gen, double p_succ);

  int num_actions() const { return num_sources + 1; }

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

/// Per-source slice of the decision state at the start of a slot.
///
/// `aoi_tx` is the transmitter-side age after this slot's arrivals have been
/// applied, i.e. the age of the packet a transmission in this slot carries.
struct SourceState {
  int aoi_tx = 0;
  int aoi_rx = 1;
  int viol_count = 0;

  friend bool operator==(const SourceState&, const SourceState&) = default;
};

using SystemState = std::vector<SourceState>;

struct StepOutcome {
  int scheduled = 0;
  bool delivered = false;
  int cost = 0;
  std::vector<int> next_viol_counts;
};

SystemState reset(const SystemConfig& config);

/// Checks the SourceState invariants against `config`; throws
/// std::invalid_argument on the first violation.
void check_state(const SystemState& state, const SystemConfig& config);

/// Deterministic single-source update given the realized arrival (for the
/// next slot) and delivery outcome of the current slot.
SourceState advance_source(const SourceState& s, bool arrival, bool delivered,
                           const SystemConfig& config);

/// Advances `state` by one slot in place.
///
/// Draw order on `rng`: one arrival draw per source in source order, then one
/// channel draw when a source is scheduled. Throws std::out_of_range when
/// `action` is not in {0..M}.
StepOutcome step(const SystemConfig& config, SystemState& state, int action,
                 Rng& rng);

/// Normalized network input: per source (aoi_tx/delta_max, aoi_rx/delta_max,
/// viol_count/k_max), concatenated in source order.
std::vector<double> encode_state(const SystemState& state,
                                 const SystemConfig& config);
void encode_state(const SystemState& state, const SystemConfig& config,
                  std::span<float> out);

/// One simulation run: a validated config, its state, and its RNG stream.
class Environment {
 public:
  Environment(SystemConfig config, std::uint64_t seed);

  const SystemState& reset();
  StepOutcome step(int action);

  const SystemState& state() const { return state_; }
  const SystemConfig& config() const { return config_; }
  Rng& rng() { return rng_; }

 private:
  SystemConfig config_;
  SystemState state_;
  Rng rng_;
};

}  // namespace cavr

#endif  // CAVR_ENV_HPP
