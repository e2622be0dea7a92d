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

#ifndef CAVR_ORACLE_HPP
#define CAVR_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavr/env.hpp"

namespace cavr {

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mixed-radix bijection between joint source states and {0..S-1}.
///
/// Per source the digit is ((aoi_tx * delta_max) + aoi_rx - 1) * (k_max + 1)
/// + viol_count; source 0 is the most significant digit.
class StateIndex {
 public:
  StateIndex(const SystemConfig& config, std::size_t ceiling);

  std::size_t size() const { return size_; }
  std::size_t per_source() const { return per_source_; }
  std::size_t index(std::span<const SourceState> state) const;
  SystemState state(std::size_t index) const;

 private:
  int delta_max_;
  int k_max_;
  int num_sources_;
  std::size_t per_source_;
  std::size_t size_;
};

/// Stationary (possibly randomized) policy: action probabilities over {0..M}.
struct OraclePolicy {
  std::string name;
  std::function<std::vector<double>(const SystemState&)> action_probs;

  static OraclePolicy fixed(int action, int num_actions);
  static OraclePolicy always_transmit();  // source 1 every slot
  static OraclePolicy idle(int num_actions);
  static OraclePolicy uniform_random(int num_actions);
  static OraclePolicy deterministic(std::string name,
                                    std::function<int(const SystemState&)> rule,
                                    int num_actions);
};

struct ChainSpec {
  SystemConfig config;
  OraclePolicy policy;
  std::size_t state_ceiling = 100000;
};

/// Compressed-row sparse matrix.
struct SparseMatrix {
  std::size_t rows = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;

  std::size_t nonzeros(std::size_t row) const { return row_ptr[row + 1] - row_ptr[row]; }
  double row_sum(std::size_t row) const;
  double at(std::size_t row, std::size_t col) const;
  /// Returns x P.
  std::vector<double> left_multiply(std::span<const double> x) const;

  static SparseMatrix from_dense(const std::vector<std::vector<double>>& dense);
};

/// One-step transition matrix of the chain induced by `spec.policy`.
/// Throws OracleError when the state space exceeds `spec.state_ceiling`.
SparseMatrix build_chain(const ChainSpec& spec);

struct StationaryOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 1000000;
};

struct StationaryDist {
  std::vector<double> pi;
  std::size_t iterations = 0;
  double residual = 0.0;  // max |pi P - pi|
};

/// Power iteration from the uniform vector over the states reachable from
/// `initial_state`. Throws OracleError when that set holds more than one
/// closed class or the iteration does not converge.
StationaryDist stationary_distribution(const SparseMatrix& P,
                                       std::size_t initial_state = 0,
                                       const StationaryOptions& options = {});

struct ExactMetrics {
  std::vector<double> psi;  // index 0 holds k = 1
  double avr = 0.0;
  double cost = 0.0;
};

ExactMetrics exact_cavr(const StationaryDist& dist, const StateIndex& index,
                        const ChainSpec& spec);

/// build_chain + stationary_distribution + exact_cavr, starting from reset.
ExactMetrics evaluate_exact(const ChainSpec& spec,
                            const StationaryOptions& options = {});

}  // namespace cavr

#endif  // CAVR_ORACLE_HPP
