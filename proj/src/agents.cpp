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

#include "cavr/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cavr/env.hpp"

namespace cavr {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::dqn:
      return "dqn";
    case Variant::d3qn:
      return "d3qn";
    case Variant::qr_dqn:
      return "qr_dqn";
    case Variant::qr_d3qn:
      return "qr_d3qn";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "dqn") return Variant::dqn;
  if (name == "d3qn") return Variant::d3qn;
  if (name == "qr_dqn" || name == "qr-dqn") return Variant::qr_dqn;
  if (name == "qr_d3qn" || name == "qr-d3qn") return Variant::qr_d3qn;
  throw ConfigError("variant", "unknown learning variant '" + std::string(name) + "'");
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0,1]");
  if (!(alpha > 0.0)) throw ConfigError("alpha", "must be positive");
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (num_quantiles < 1) throw ConfigError("num_quantiles", "must be positive");
  if (target_period < 1) throw ConfigError("target_period", "must be positive");
  if (!(eps_end >= 0.0 && eps_end <= eps_start && eps_start <= 1.0)) {
    throw ConfigError("eps_start", "need 0 <= eps_end <= eps_start <= 1");
  }
  if (eps_decay_episodes < 1) throw ConfigError("eps_decay_episodes", "must be positive");
  if (episodes < 1) throw ConfigError("episodes", "must be positive");
  if (slots_per_episode < 1) throw ConfigError("slots_per_episode", "must be positive");
  if (!(kappa > 0.0)) throw ConfigError("kappa", "must be positive");
  if (replay_capacity < 1) throw ConfigError("replay_capacity", "must be positive");
  if (min_replay < 1 || min_replay > replay_capacity) {
    throw ConfigError("min_replay", "must lie in [1, replay_capacity]");
  }
  if (hidden < 1) throw ConfigError("hidden", "must be positive");
  if (!(xi > 0.0)) throw ConfigError("xi", "must be positive");
  if (!(lambda_init >= 0.0)) throw ConfigError("lambda_init", "must be nonnegative");
}

double epsilon(int episode, double eps_start, double eps_end, int decay_episodes) {
  if (episode < 1) throw std::invalid_argument("episodes are 1-based");
  if (episode > decay_episodes) return eps_end;
  if (decay_episodes == 1) return eps_start;
  const double frac = static_cast<double>(episode - 1) / static_cast<double>(decay_episodes - 1);
  return eps_start - frac * (eps_start - eps_end);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int feature_dim)
    : capacity_(capacity), dim_(feature_dim) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  if (feature_dim < 1) throw std::invalid_argument("feature dimension must be positive");
}

void ReplayBuffer::push(std::span<const float> features, int action, double reward,
                        std::span<const float> next_features) {
  const auto d = static_cast<std::size_t>(dim_);
  if (features.size() != d || next_features.size() != d) {
    throw std::invalid_argument("transition has wrong feature length");
  }
  if (!std::isfinite(reward)) throw std::invalid_argument("transition reward is not finite");
  if (size_ < capacity_) {
    // Grow lazily so small runs do not reserve the full capacity.
    features_.insert(features_.end(), features.begin(), features.end());
    next_features_.insert(next_features_.end(), next_features.begin(), next_features.end());
    actions_.push_back(action);
    rewards_.push_back(reward);
    ++size_;
    head_ = size_ % capacity_;
    return;
  }
  std::copy(features.begin(), features.end(), features_.begin() + static_cast<std::ptrdiff_t>(head_ * d));
  std::copy(next_features.begin(), next_features.end(),
            next_features_.begin() + static_cast<std::ptrdiff_t>(head_ * d));
  actions_[head_] = action;
  rewards_[head_] = reward;
  head_ = (head_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("cannot sample from an empty buffer");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(size_));
  return idx;
}

std::span<const float> ReplayBuffer::features(std::size_t i) const {
  return std::span<const float>(features_).subspan(i * static_cast<std::size_t>(dim_),
                                                   static_cast<std::size_t>(dim_));
}

std::span<const float> ReplayBuffer::next_features(std::size_t i) const {
  return std::span<const float>(next_features_).subspan(i * static_cast<std::size_t>(dim_),
                                                        static_cast<std::size_t>(dim_));
}

int argmax_lowest(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

double td_target(Variant variant, double reward, std::span<const double> q_online_next,
                 std::span<const double> q_target_next, double gamma) {
  const VariantTraits t = traits(variant);
  if (t.distributional) throw std::invalid_argument("td_target is for scalar variants");
  const int a_star = t.double_q ? argmax_lowest(q_online_next) : argmax_lowest(q_target_next);
  return reward + gamma * q_target_next[static_cast<std::size_t>(a_star)];
}

std::vector<double> distributional_target(double reward, const QuantileValue& online_next,
                                          const QuantileValue& target_next, double gamma,
                                          bool double_q) {
  const std::vector<double> q = mean_q(double_q ? online_next : target_next);
  const int a_star = argmax_lowest(q);
  std::vector<double> out(static_cast<std::size_t>(target_next.num_quantiles()));
  for (int j = 0; j < target_next.num_quantiles(); ++j) {
    out[static_cast<std::size_t>(j)] = reward + gamma * target_next.theta(a_star, j);
  }
  return out;
}

Agent::Agent(const AgentConfig& config, int input_dim, int num_actions, std::uint64_t seed)
    : config_(config),
      traits_(traits(config.variant)),
      online_(),
      target_(),
      optimizer_(NetShape{input_dim, config.hidden, num_actions, config.quantiles(),
                          traits(config.variant).dueling},
                 AdamOptions{config.alpha, 0.9, 0.999, 1e-8}) {
  config_.validate();
  const NetShape shape{input_dim, config.hidden, num_actions, config.quantiles(), traits_.dueling};
  Rng init(seed);
  online_ = NetParams<float>::initialized(shape, init);
  target_ = online_;
  for (double t : tau_hat(shape.num_quantiles)) tau_.push_back(static_cast<float>(t));
}

void Agent::load(const NetParams<float>& params) {
  if (!(params.shape == online_.shape)) throw std::invalid_argument("checkpoint shape mismatch");
  online_ = params;
  target_ = params;
}

namespace {

// Mean over quantiles of column b, per action; lowest index wins ties.
int greedy_column(const Matrix<float>& theta, Eigen::Index b, int num_actions, int n) {
  int best = 0;
  double best_q = 0.0;
  const float* col = theta.data() + b * theta.rows();
  for (int a = 0; a < num_actions; ++a) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += col[a * n + i];
    const double q = s / n;
    if (a == 0 || q > best_q) {
      best = a;
      best_q = q;
    }
  }
  return best;
}

}  // namespace

int Agent::greedy_action(std::span<const float> features) const {
  Matrix<float> x(static_cast<Eigen::Index>(features.size()), 1);
  std::copy(features.begin(), features.end(), x.data());
  const Matrix<float> theta = forward(online_, x);
  return greedy_column(theta, 0, online_.shape.num_actions, online_.shape.num_quantiles);
}

int Agent::select_action(std::span<const double> features, double eps, Rng& rng) const {
  const double u = rng.uniform();
  if (u < eps) return static_cast<int>(rng.below(static_cast<std::uint64_t>(online_.shape.num_actions)));
  std::vector<float> f(features.begin(), features.end());
  return greedy_action(f);
}

std::optional<double> Agent::train_step(const ReplayBuffer& buffer, Rng& rng,
                                        std::int64_t global_slot) {
  if (buffer.size() < config_.min_replay) return std::nullopt;
  const int dim = online_.shape.input_dim;
  const int a_count = online_.shape.num_actions;
  const int n = online_.shape.num_quantiles;
  const auto batch = static_cast<Eigen::Index>(config_.batch_size);
  const std::vector<std::size_t> idx = buffer.sample_indices(static_cast<std::size_t>(batch), rng);

  batch_now_.resize(dim, batch);
  batch_next_.resize(dim, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto f = buffer.features(idx[static_cast<std::size_t>(b)]);
    const auto g = buffer.next_features(idx[static_cast<std::size_t>(b)]);
    std::copy(f.begin(), f.end(), batch_now_.data() + b * dim);
    std::copy(g.begin(), g.end(), batch_next_.data() + b * dim);
  }

  // Targets from the frozen network; selection by online net when double_q.
  const Matrix<float> theta_target_next = forward(target_, batch_next_);
  Matrix<float> theta_online_next;
  if (traits_.double_q) theta_online_next = forward(online_, batch_next_);
  const Matrix<float>& selector = traits_.double_q ? theta_online_next : theta_target_next;
  const auto gamma = static_cast<float>(config_.gamma);
  Matrix<float> targets(n, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a_star = greedy_column(selector, b, a_count, n);
    const auto r = static_cast<float>(buffer.reward(idx[static_cast<std::size_t>(b)]));
    for (int j = 0; j < n; ++j) targets(j, b) = r + gamma * theta_target_next(a_star * n + j, b);
  }

  ForwardCache<float> cache;
  const Matrix<float> theta = forward(online_, batch_now_, &cache);
  Matrix<float> dtheta = Matrix<float>::Zero(theta.rows(), batch);
  const float inv_batch = 1.0f / static_cast<float>(batch);
  const auto kappa = static_cast<float>(config_.kappa);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = buffer.action(idx[static_cast<std::size_t>(b)]);
    const float* pred = theta.data() + b * theta.rows() + a * n;
    float* dpred = dtheta.data() + b * dtheta.rows() + a * n;
    if (n == 1) {
      const float e = targets(0, b) - pred[0];
      loss += static_cast<double>(e) * e;
      dpred[0] = -2.0f * e * inv_batch;
    } else {
      loss += quantile_huber_sample(pred, targets.data() + b * n, tau_.data(), n, kappa, dpred);
      for (int i = 0; i < n; ++i) dpred[i] *= inv_batch;
    }
  }
  loss /= static_cast<double>(batch);
  if (!std::isfinite(loss)) throw NonFiniteGradient("non-finite loss; step aborted");

  const NetParams<float> grads = backward(online_, cache, dtheta);
  optimizer_.step(online_, grads);
  if (global_slot % config_.target_period == 0) sync_target();
  return loss;
}

}  // namespace cavr
