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

#include <vector>

#include "cavr/cmdp.hpp"
#include "cavr/rng.hpp"

using namespace cavr;

TEST_CASE("lagrangian reward") {
  const WeightVector w = WeightVector::custom({0.5, 0.5});
  const std::vector<int> v{2, 0};
  CHECK(lagrangian_reward(v, 1, w, 0.5, 0.75) == doctest::Approx(-0.625).epsilon(1e-12));
  const std::vector<int> none{0, 0};
  CHECK(lagrangian_reward(none, 0, w, 0.4, 0.75) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(lagrangian_reward(none, 0, w, 0.0, 0.75) == 0.0);
}

TEST_CASE("reward stays within its bounds") {
  Rng rng(3);
  for (int trial = 0; trial < 5000; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(6));
    const int k = 1 + static_cast<int>(rng.below(9));
    const WeightVector w = WeightVector::exponential(k, 1.5 + rng.uniform());
    std::vector<int> v(static_cast<std::size_t>(m));
    for (auto& x : v) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(k + 1)));
    const double lambda = 3.0 * rng.uniform();
    const double eta_max = 0.05 + 0.95 * rng.uniform();
    const int cost = rng.bernoulli(0.5) ? 1 : 0;
    const double r = lagrangian_reward(v, cost, w, lambda, eta_max);
    CHECK(r >= -1.0 - lambda * (1.0 - eta_max) - 1e-12);
    CHECK(r <= lambda * eta_max + 1e-12);
  }
}

TEST_CASE("running cost mean") {
  CHECK(update_eta(0.5, 4, 1) == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(update_eta(0.0, 1, 1) == 1.0);
  CHECK_THROWS_AS(update_eta(0.0, 0, 1), std::invalid_argument);

  Rng rng(9);
  LagrangeState s;
  long total = 0;
  for (int t = 1; t <= 100000; ++t) {
    const int c = rng.bernoulli(0.37) ? 1 : 0;
    total += c;
    s.record_cost(c);
    if (t % 997 == 0) REQUIRE(std::abs(s.eta_hat - static_cast<double>(total) / t) <= 1e-12);
  }
  CHECK(s.slot == 100000);
}

TEST_CASE("multiplier update is a projected step") {
  CHECK(update_lambda(0.2, 0.1, 0.9, 0.75) == doctest::Approx(0.215).epsilon(1e-12));
  CHECK(update_lambda(0.01, 0.1, 0.0, 0.75) == 0.0);
  Rng rng(4);
  double lambda = 0.0;
  for (int t = 0; t < 10000; ++t) {
    lambda = update_lambda(lambda, 0.5 * rng.uniform(), rng.uniform(), rng.uniform());
    REQUIRE(lambda >= 0.0);
  }
}

TEST_CASE("lagrange state persists across calls") {
  LagrangeState s{0.0, 0.0, 0, 0.1, 0.5, 0.98};
  for (int i = 0; i < 4; ++i) {
    s.record_cost(1);
    s.update_multiplier();
  }
  CHECK(s.eta_hat == 1.0);
  CHECK(s.lambda == doctest::Approx(0.2).epsilon(1e-12));
}
