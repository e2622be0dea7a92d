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

#ifndef CAVR_AGENTS_HPP
#define CAVR_AGENTS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavr/rng.hpp"
#include "cavr/valuenet.hpp"

namespace cavr {

enum class Variant { dqn, d3qn, qr_dqn, qr_d3qn };

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct VariantTraits {
  bool dueling;
  bool double_q;
  bool distributional;
};

constexpr VariantTraits traits(Variant v) {
  switch (v) {
    case Variant::dqn:
      return {false, false, false};
    case Variant::d3qn:
      return {true, true, false};
    case Variant::qr_dqn:
      return {false, false, true};
    case Variant::qr_d3qn:
      return {true, true, true};
  }
  return {false, false, false};
}

/// Training hyperparameters; defaults follow the reference training table.
struct AgentConfig {
  Variant variant = Variant::qr_d3qn;
  double gamma = 0.98;
  double alpha = 2e-3;
  int batch_size = 256;
  int num_quantiles = 64;  // used by the distributional variants only
  int target_period = 3;   // global slots between hard target syncs
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_decay_episodes = 1000;
  int episodes = 3000;
  int slots_per_episode = 100;
  double kappa = 1.0;
  std::size_t replay_capacity = 1000000;
  std::size_t min_replay = 1000;
  int hidden = 128;
  double xi = 0.10;
  double lambda_init = 0.0;

  int quantiles() const { return traits(variant).distributional ? num_quantiles : 1; }
  void validate() const;
};

/// Linear decay from eps_start (episode 1) to eps_end (episode E_decay),
/// constant afterwards. Episodes are 1-based.
double epsilon(int episode, double eps_start, double eps_end, int decay_episodes);

struct EpsilonSchedule {
  double eps_start = 1.0;
  double eps_end = 0.05;
  int decay_episodes = 1000;

  double operator()(int episode) const {
    return epsilon(episode, eps_start, eps_end, decay_episodes);
  }
};

/// Ring buffer of transitions in flat float storage.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int feature_dim);

  void push(std::span<const float> features, int action, double reward,
            std::span<const float> next_features);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  int feature_dim() const { return dim_; }

  /// `batch` indices drawn uniformly with replacement from [0, size()).
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

  std::span<const float> features(std::size_t i) const;
  std::span<const float> next_features(std::size_t i) const;
  int action(std::size_t i) const { return actions_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }

 private:
  std::size_t capacity_;
  int dim_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;
  std::vector<float> features_;
  std::vector<float> next_features_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
};

/// Index of the largest value; ties go to the lowest index.
int argmax_lowest(std::span<const double> values);

/// Scalar TD target. dqn: r + gamma max_a Q_target(s', a);
/// d3qn: r + gamma Q_target(s', argmax_a Q_online(s', a)).
double td_target(Variant variant, double reward, std::span<const double> q_online_next,
                 std::span<const double> q_target_next, double gamma);

/// Target quantiles r + gamma theta_j(s', a*; target). With `double_q` the
/// online network selects a*, otherwise the target network does.
std::vector<double> distributional_target(double reward, const QuantileValue& online_next,
                                          const QuantileValue& target_next, double gamma,
                                          bool double_q);

/// One learning scheduler: online and target networks plus optimizer.
class Agent {
 public:
  Agent(const AgentConfig& config, int input_dim, int num_actions, std::uint64_t seed);

  /// epsilon-greedy over mean quantile values.
  int select_action(std::span<const double> features, double eps, Rng& rng) const;
  int greedy_action(std::span<const float> features) const;

  /// One gradient step on a uniform minibatch. Returns std::nullopt (no-op)
  /// while the buffer holds fewer than min_replay transitions. Hard-copies
  /// online into target when `global_slot` is a multiple of target_period.
  /// Throws NonFiniteGradient when the loss or gradient is not finite.
  std::optional<double> train_step(const ReplayBuffer& buffer, Rng& rng,
                                   std::int64_t global_slot);

  void sync_target() { target_ = online_; }

  const AgentConfig& config() const { return config_; }
  const NetParams<float>& online() const { return online_; }
  const NetParams<float>& target() const { return target_; }
  NetParams<float>& mutable_online() { return online_; }
  void load(const NetParams<float>& params);

 private:
  AgentConfig config_;
  VariantTraits traits_;
  NetParams<float> online_;
  NetParams<float> target_;
  Adam<float> optimizer_;
  std::vector<float> tau_;
  Matrix<float> batch_next_;
  Matrix<float> batch_now_;
};

}  // namespace cavr

#endif  // CAVR_AGENTS_HPP
