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

#ifndef CAVR_HARNESS_HPP
#define CAVR_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cavr/agents.hpp"
#include "cavr/dpp.hpp"
#include "cavr/env.hpp"
#include "cavr/metrics.hpp"

namespace cavr {

enum class PolicyKind { dqn, d3qn, qr_dqn, qr_d3qn, dpp, always_transmit, round_robin, random };

std::string to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view name);
bool is_learning(PolicyKind p);
Variant to_variant(PolicyKind p);

/// Everything needed to reproduce one experiment cell except the seed.
struct ExperimentConfig {
  int num_sources = 10;
  double p_gen = 0.7;
  double p_succ = 0.7;
  int zeta = 15;
  int k_max = 9;
  int delta_max = 100;
  double eta_max = 0.75;
  WeightScheme scheme = WeightScheme::exponential;
  double beta = 2.0;
  int k_o = 1;
  PolicyKind policy = PolicyKind::qr_d3qn;
  AgentConfig agent;
  std::vector<std::uint64_t> seeds{1};
  std::int64_t eval_horizon = 100000;
  bool heterogeneous = false;
  double het_low = 0.6;
  double het_high = 0.8;
  double eps_hat = 0.05;
  double v_dpp = 10.0;
  std::string output_dir = "runs";
  bool write_trajectory = false;
  int series_stride = 100;

  /// All recognized keys, in canonical order.
  static const std::vector<std::string>& keys();

  /// Throws ConfigError for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Canonical key=value pairs for every key.
  std::vector<std::pair<std::string, std::string>> entries() const;

  /// 16 hex digits; FNV-1a over the canonical entries minus seeds and
  /// output_dir.
  std::string hash() const;

  /// System parameters for one seed. Heterogeneous (p_gen, p_succ) pairs
  /// are drawn per source from [het_low, het_high] on a seed-derived stream.
  SystemConfig system_config(std::uint64_t seed) const;
  WeightVector weights() const;
  void validate() const;
};

/// Flat `key = value` text; `#` starts a comment. Applied on top of `base`.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  ExperimentConfig base = {});

/// Decision rule used during rollouts.
class SchedulingPolicy {
 public:
  virtual ~SchedulingPolicy() = default;
  virtual int act(const SystemState& state, std::span<const float> features) = 0;
  virtual void observe(const StepOutcome&) {}
  /// Called before an evaluation rollout.
  virtual void reset() {}
};

/// Greedy (epsilon = 0) rollout of a trained network.
class GreedyNetworkPolicy : public SchedulingPolicy {
 public:
  explicit GreedyNetworkPolicy(const Agent& agent) : agent_(agent) {}
  int act(const SystemState&, std::span<const float> features) override {
    return agent_.greedy_action(features);
  }

 private:
  const Agent& agent_;
};

class DppRolloutPolicy : public SchedulingPolicy {
 public:
  DppRolloutPolicy(const SystemConfig& config, const WeightVector& weights, double v_dpp)
      : dpp_(config, weights, v_dpp) {}
  int act(const SystemState& state, std::span<const float>) override {
    last_ = dpp_.decide(state);
    return last_.action;
  }
  void observe(const StepOutcome& out) override { dpp_.observe_cost(out.cost); }
  void reset() override { dpp_.reset_queue(); }
  double backlog() const { return dpp_.backlog(); }
  const DppDecision& last_decision() const { return last_; }

 private:
  DppPolicy dpp_;
  DppDecision last_;
};

/// Schedules the source with the largest receiver age every slot (source 1
/// when M = 1); lowest index on ties.
class AlwaysTransmitPolicy : public SchedulingPolicy {
 public:
  int act(const SystemState& state, std::span<const float>) override;
};

class RoundRobinPolicy : public SchedulingPolicy {
 public:
  explicit RoundRobinPolicy(int num_sources) : num_sources_(num_sources) {}
  int act(const SystemState&, std::span<const float>) override;
  void reset() override { next_ = 0; }

 private:
  int num_sources_;
  int next_ = 0;
};

/// Uniform over {0..M}.
class RandomPolicy : public SchedulingPolicy {
 public:
  RandomPolicy(int num_actions, std::uint64_t seed) : num_actions_(num_actions), seed_(seed), rng_(seed) {}
  int act(const SystemState&, std::span<const float>) override {
    return static_cast<int>(rng_.below(static_cast<std::uint64_t>(num_actions_)));
  }
  void reset() override { rng_ = Rng(seed_); }

 private:
  int num_actions_;
  std::uint64_t seed_;
  Rng rng_;
};

struct EvaluationOptions {
  std::int64_t horizon = 100000;
  double eps_hat = 0.05;
  int series_stride = 100;
  bool record_trajectory = false;
};

struct EvaluationResult {
  CavrEstimate cavr;
  double weighted_cavr = 0.0;
  int sigma_min = 0;
  CostEstimate cost;
  std::vector<std::pair<std::int64_t, double>> cost_series;  // (slot, running eta)
  std::optional<Trajectory> trajectory;
  /// Virtual-queue backlog after the last slot (DPP rollouts only).
  std::optional<double> final_backlog;
};

/// Fresh environment from `reset`, `options.horizon` slots, metrics over the
/// states observed at the start of each slot.
EvaluationResult evaluate(SchedulingPolicy& policy, const SystemConfig& system,
                          const WeightVector& weights, std::uint64_t seed,
                          const EvaluationOptions& options);

struct EpisodeLog {
  int episode = 0;
  std::int64_t slot = 0;
  double epsilon = 0.0;
  double lambda = 0.0;
  double eta_hat = 0.0;
  std::optional<double> loss;
  double episodic_reward = 0.0;
};

struct RunRecord {
  PolicyKind policy = PolicyKind::qr_d3qn;
  std::uint64_t seed = 0;
  SystemConfig system;
  std::vector<EpisodeLog> learning_curve;
  EvaluationResult evaluation;
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> checkpoint;
  double final_lambda = 0.0;
  double train_eta_hat = 0.0;
  std::int64_t train_slots = 0;
  /// DPP training rollout: total cost and final backlog Z(T+1).
  std::int64_t dpp_train_cost = 0;
  double dpp_train_backlog = 0.0;
};

struct RunOptions {
  bool write_files = true;
  std::ostream* progress = nullptr;
};

std::filesystem::path run_directory(const ExperimentConfig& config, std::uint64_t seed);

/// Trains `config.policy` for one seed (learning variants follow the
/// replay/target/Lagrangian loop; baselines are rolled out over the same
/// slots), then evaluates greedily. Deterministic given the seed.
RunRecord train(const ExperimentConfig& config, std::uint64_t seed,
                const RunOptions& options = {});

/// Re-evaluates a finished run from its directory (checkpoint for learned
/// policies). Throws std::runtime_error when the checkpoint is missing.
EvaluationResult evaluate_run(const ExperimentConfig& config, std::uint64_t seed,
                              const RunOptions& options = {});

/// Sweep axes: k_max, k_o, p_gen, p_succ, zeta, M, beta, scheme.
bool is_sweep_axis(std::string_view axis);
ExperimentConfig apply_axis(const ExperimentConfig& base, std::string_view axis,
                            std::string_view value);

struct SweepRow {
  std::string axis;
  std::string value;
  PolicyKind policy = PolicyKind::qr_d3qn;
  std::uint64_t seed = 0;
  int k_max = 0;
  std::vector<double> psi;
  double weighted_cavr = 0.0;
  int sigma_min = 0;
  double eta_hat = 0.0;
};

struct SweepSummaryRow {
  std::string axis;
  std::string value;
  PolicyKind policy = PolicyKind::qr_d3qn;
  std::size_t runs = 0;
  double median_weighted_cavr = 0.0;
  double mean_weighted_cavr = 0.0;
  double median_sigma_min = 0.0;
  double mean_sigma_min = 0.0;
  double median_eta_hat = 0.0;
  double mean_eta_hat = 0.0;
  /// (D3QN - QR-D3QN) / D3QN on medians and means; set on qr_d3qn rows
  /// when d3qn ran at the same value.
  std::optional<double> rel_reduction_median;
  std::optional<double> rel_reduction_mean;
};

/// Cross product values x policies x seeds. Throws ConfigError for an
/// unknown axis or an empty value list.
std::vector<SweepRow> sweep(const ExperimentConfig& base, std::string_view axis,
                            const std::vector<std::string>& values,
                            const std::vector<PolicyKind>& policies,
                            const RunOptions& options = {});

std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows);

double median(std::vector<double> values);

// CSV writers; schemas are documented in the README.
void write_metrics_csv(std::ostream& out, PolicyKind policy, std::uint64_t seed,
                       const EvaluationResult& eval, bool header = true);
void write_learning_curve_csv(std::ostream& out, const std::vector<EpisodeLog>& curve);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows);

/// Shortest round-trip text for a double.
std::string format_double(double v);

}  // namespace cavr

#endif  // CAVR_HARNESS_HPP
