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


#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cavr/agents.hpp"
#include "cavr/env.hpp"

using namespace cavr;

namespace {

AgentConfig small_config(Variant v) {
  AgentConfig c;
  c.variant = v;
  c.hidden = 16;
  c.batch_size = 32;
  c.num_quantiles = 8;
  c.min_replay = 1;
  c.replay_capacity = 1000;
  return c;
}

QuantileValue quantiles(std::vector<std::vector<double>> rows) {
  QuantileValue q;
  q.theta.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t i = 0; i < rows[a].size(); ++i) {
      q.theta(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)) = rows[a][i];
    }
  }
  q.tau_hat = tau_hat(static_cast<int>(rows[0].size()));
  return q;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  CHECK(epsilon(1, 1.0, 0.05, 1000) == 1.0);
  CHECK(epsilon(1000, 1.0, 0.05, 1000) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(std::abs(epsilon(1000, 1.0, 0.05, 1000) - 0.05) <= 1e-9);
  CHECK(epsilon(500, 1.0, 0.05, 1000) == doctest::Approx(1.0 - 499.0 / 999.0 * 0.95));
  CHECK(epsilon(500, 1.0, 0.05, 1000) == doctest::Approx(0.52548).epsilon(1e-5));
  CHECK(epsilon(5000, 1.0, 0.05, 1000) == 0.05);
  double prev = 1.0;
  for (int e = 1; e <= 3000; ++e) {
    const double x = epsilon(e, 1.0, 0.05, 1000);
    CHECK(x <= prev);
    CHECK(x >= 0.05);
    CHECK(x <= 1.0);
    prev = x;
  }
  CHECK_THROWS_AS(epsilon(0, 1.0, 0.05, 1000), std::invalid_argument);
}

TEST_CASE("configuration defaults and validation") {
  AgentConfig c;
  CHECK(c.gamma == 0.98);
  CHECK(c.alpha == 2e-3);
  CHECK(c.batch_size == 256);
  CHECK(c.quantiles() == 64);
  c.variant = Variant::d3qn;
  CHECK(c.quantiles() == 1);
  CHECK(c.target_period == 3);
  CHECK(c.replay_capacity == 1000000u);
  CHECK(c.min_replay == 1000u);
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_variant("qr-d3qn") == Variant::qr_d3qn);
  CHECK_THROWS_AS(parse_variant("c51"), ConfigError);
  CHECK(traits(Variant::dqn).dueling == false);
  CHECK(traits(Variant::qr_dqn).double_q == false);
  CHECK(traits(Variant::d3qn).double_q == true);
  CHECK(traits(Variant::qr_d3qn).distributional == true);
}

TEST_CASE("greedy and exploratory selection") {
  AgentConfig c = small_config(Variant::dqn);
  Agent agent(c, 3, 3, 1);
  auto& p = agent.mutable_online();
  p.trunk1.weight.setZero();
  p.trunk2.weight.setZero();
  p.advantage.weight.setZero();
  p.advantage.bias << 0.1f, 0.9f, 0.3f;
  Rng rng(2);
  const std::vector<double> f{0.1, 0.2, 0.3};
  CHECK(agent.select_action(f, 0.0, rng) == 1);
  p.advantage.bias << 0.5f, 0.5f, 0.2f;
  CHECK(agent.select_action(f, 0.0, rng) == 0);

  std::vector<int> hits(3, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++hits[static_cast<std::size_t>(agent.select_action(f, 1.0, rng))];
  const double expect = draws / 3.0;
  const double sd = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  for (int h : hits) CHECK(std::abs(h - expect) <= 3 * sd);

  CHECK(argmax_lowest(std::vector<double>{1, 3, 3}) == 1);
  CHECK_THROWS(argmax_lowest(std::vector<double>{}));
}

TEST_CASE("scalar targets") {
  CHECK(td_target(Variant::dqn, 1.0, std::vector<double>{9, 9}, std::vector<double>{2, 3}, 0.9) ==
        doctest::Approx(3.7));
  CHECK(td_target(Variant::d3qn, 1.0, std::vector<double>{2, 3}, std::vector<double>{4, 1.5}, 0.9) ==
        doctest::Approx(2.35));
  const std::vector<double> q{0.4, -1.0, 2.0};
  CHECK(td_target(Variant::d3qn, 0.5, q, q, 0.9) == td_target(Variant::dqn, 0.5, q, q, 0.9));
  CHECK_THROWS(td_target(Variant::qr_dqn, 0.5, q, q, 0.9));
}

TEST_CASE("distributional targets") {
  const auto online = quantiles({{0, 0}, {5, 5}});
  const auto target = quantiles({{9, 9}, {1, 2}});
  const auto y = distributional_target(0.5, online, target, 0.9, true);
  CHECK(y[0] == doctest::Approx(1.4));
  CHECK(y[1] == doctest::Approx(2.3));
  const auto y0 = distributional_target(0.5, online, target, 0.0, true);
  CHECK(y0 == std::vector<double>{0.5, 0.5});
  const auto c = quantiles({{3, 3, 3}, {1, 1, 1}});
  for (double v : distributional_target(1.0, c, c, 0.5, false)) CHECK(v == doctest::Approx(2.5));
  // Without double selection the target network picks a*.
  const auto yt = distributional_target(0.5, online, target, 0.9, false);
  CHECK(yt[0] == doctest::Approx(0.5 + 0.9 * 9));

  // N = 1 reduces to the scalar targets.
  const auto on1 = quantiles({{2}, {3}});
  const auto tg1 = quantiles({{4}, {1.5}});
  CHECK(distributional_target(1.0, on1, tg1, 0.9, true)[0] ==
        doctest::Approx(td_target(Variant::d3qn, 1.0, std::vector<double>{2, 3}, std::vector<double>{4, 1.5}, 0.9)));
  CHECK(distributional_target(1.0, on1, tg1, 0.9, false)[0] ==
        doctest::Approx(td_target(Variant::dqn, 1.0, std::vector<double>{2, 3}, std::vector<double>{4, 1.5}, 0.9)));
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(5, 2);
  for (int i = 0; i < 12; ++i) {
    const std::vector<float> f{static_cast<float>(i), 0.0f};
    buf.push(f, i % 3, i, f);
    CHECK(buf.size() == std::min<std::size_t>(static_cast<std::size_t>(i) + 1, 5));
  }
  std::vector<double> rewards;
  for (std::size_t i = 0; i < buf.size(); ++i) rewards.push_back(buf.reward(i));
  std::sort(rewards.begin(), rewards.end());
  CHECK(rewards == std::vector<double>{7, 8, 9, 10, 11});
  const std::vector<float> bad{1.0f};
  CHECK_THROWS(buf.push(bad, 0, 0.0, bad));
  const std::vector<float> ok{1.0f, 2.0f};
  CHECK_THROWS(buf.push(ok, 0, std::numeric_limits<double>::infinity(), ok));

  Rng rng(3);
  std::vector<int> hits(5, 0);
  const int draws = 100000;
  for (int i = 0; i < draws / 100; ++i) {
    for (auto j : buf.sample_indices(100, rng)) ++hits[j];
  }
  const double sd = std::sqrt(draws * 0.2 * 0.8);
  for (int h : hits) CHECK(std::abs(h - draws * 0.2) <= 3 * sd);
  ReplayBuffer empty(3, 1);
  CHECK_THROWS(empty.sample_indices(1, rng));
}

TEST_CASE("train_step is a no-op below the minimum fill") {
  AgentConfig c = small_config(Variant::qr_d3qn);
  c.min_replay = 10;
  Agent agent(c, 2, 2, 4);
  ReplayBuffer buf(100, 2);
  const std::vector<float> f{0.1f, 0.2f};
  for (int i = 0; i < 9; ++i) buf.push(f, 0, 1.0, f);
  Rng rng(5);
  const auto before = agent.online();
  CHECK_FALSE(agent.train_step(buf, rng, 1).has_value());
  CHECK(agent.online().trunk1.weight == before.trunk1.weight);
  buf.push(f, 0, 1.0, f);
  CHECK(agent.train_step(buf, rng, 1).has_value());
}

TEST_CASE("regression to a constant reward") {
  for (Variant v : {Variant::dqn, Variant::d3qn, Variant::qr_dqn, Variant::qr_d3qn}) {
    AgentConfig c = small_config(v);
    c.gamma = 0.0;
    Agent agent(c, 3, 3, 6);
    ReplayBuffer buf(10, 3);
    const std::vector<float> f{0.3f, 0.5f, 0.1f};
    buf.push(f, 2, 0.7, f);
    Rng rng(7);
    int steps = 0;
    double q = 0.0;
    for (; steps < 2000; ++steps) {
      agent.train_step(buf, rng, steps + 1);
      const auto val = evaluate(agent.online(), std::vector<double>{0.3, 0.5, 0.1});
      q = mean_q(val)[2];
      if (std::abs(q - 0.7) < 1e-2 && steps > 10) break;
    }
    CHECK(std::abs(q - 0.7) < 1e-2);
    CHECK(steps < 2000);
  }
}

TEST_CASE("loss decreases on a frozen batch") {
  Rng rng(8);
  const NetShape shape{4, 32, 3, 8, true};
  auto p = NetParams<float>::initialized(shape, rng);
  Adam<float> opt(shape, AdamOptions{});
  const Matrix<float> x = Matrix<float>::Random(4, 64);
  Matrix<float> y(8, 64);
  std::vector<int> act(64);
  for (Eigen::Index b = 0; b < 64; ++b) {
    act[static_cast<std::size_t>(b)] = static_cast<int>(rng.below(3));
    for (int j = 0; j < 8; ++j) y(j, b) = static_cast<float>(rng.uniform() - 0.5);
  }
  std::vector<float> tau;
  for (double t : tau_hat(8)) tau.push_back(static_cast<float>(t));
  double prev = 1e300;
  int up = 0;
  for (int it = 0; it < 50; ++it) {
    ForwardCache<float> cache;
    const Matrix<float> theta = forward(p, x, &cache);
    Matrix<float> d = Matrix<float>::Zero(theta.rows(), 64);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < 64; ++b) {
      const int a = act[static_cast<std::size_t>(b)];
      loss += quantile_huber_sample(theta.data() + b * theta.rows() + a * 8, y.data() + b * 8,
                                    tau.data(), 8, 1.0f, d.data() + b * d.rows() + a * 8);
    }
    d /= 64.0f;
    loss /= 64.0;
    if (loss > prev) ++up;
    prev = loss;
    opt.step(p, backward(p, cache, d));
  }
  CHECK(up <= 5);
}

TEST_CASE("target network syncs every G global slots") {
  AgentConfig c = small_config(Variant::qr_d3qn);
  c.target_period = 3;
  Agent agent(c, 2, 2, 9);
  ReplayBuffer buf(100, 2);
  Rng fill(10);
  for (int i = 0; i < 50; ++i) {
    const std::vector<float> f{static_cast<float>(fill.uniform()), static_cast<float>(fill.uniform())};
    buf.push(f, static_cast<int>(fill.below(2)), fill.uniform(), f);
  }
  Rng rng(11);
  const auto initial_target = agent.target();
  agent.train_step(buf, rng, 1);
  agent.train_step(buf, rng, 2);
  CHECK(agent.target().advantage.weight == initial_target.advantage.weight);
  CHECK_FALSE(agent.online().advantage.weight == initial_target.advantage.weight);
  agent.train_step(buf, rng, 3);
  CHECK(agent.target().advantage.weight == agent.online().advantage.weight);
  CHECK(agent.target().trunk1.bias == agent.online().trunk1.bias);
  const auto snap = agent.target();
  agent.train_step(buf, rng, 4);
  agent.train_step(buf, rng, 5);
  CHECK(agent.target().trunk2.weight == snap.trunk2.weight);
}

TEST_CASE("non-finite parameters abort the step") {
  AgentConfig c = small_config(Variant::dqn);
  Agent agent(c, 2, 2, 12);
  agent.mutable_online().advantage.bias(0) = std::numeric_limits<float>::quiet_NaN();
  ReplayBuffer buf(10, 2);
  const std::vector<float> f{0.1f, 0.2f};
  buf.push(f, 0, 1.0, f);
  Rng rng(13);
  CHECK_THROWS_AS(agent.train_step(buf, rng, 1), NonFiniteGradient);
}

TEST_CASE("training is deterministic given the seeds") {
  AgentConfig c = small_config(Variant::qr_d3qn);
  auto run = [&] {
    Agent agent(c, 2, 3, 14);
    ReplayBuffer buf(100, 2);
    Rng fill(15), rng(16);
    for (int i = 0; i < 60; ++i) {
      const std::vector<float> f{static_cast<float>(fill.uniform()), static_cast<float>(fill.uniform())};
      buf.push(f, static_cast<int>(fill.below(3)), fill.uniform(), f);
      agent.train_step(buf, rng, i + 1);
    }
    return agent.online();
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.advantage.weight == b.advantage.weight);
  CHECK(a.trunk1.weight == b.trunk1.weight);
}
