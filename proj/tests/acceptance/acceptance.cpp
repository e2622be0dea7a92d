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


// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status
// is nonzero when any criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cavr/agents.hpp"
#include "cavr/cmdp.hpp"
#include "cavr/dpp.hpp"
#include "cavr/env.hpp"
#include "cavr/harness.hpp"
#include "cavr/metrics.hpp"
#include "cavr/oracle.hpp"
#include "cavr/valuenet.hpp"
#include "support/reference.hpp"

using namespace cavr;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Trajectory>& recorded() {
  static std::vector<Trajectory> t;
  return t;
}

Verdict oracle_equivalence() {
  Verdict v;
  const auto t0 = Clock::now();
  SystemConfig c = SystemConfig::homogeneous(1, 0.7, 0.7);
  c.zeta = 5;
  c.delta_max = 20;
  c.k_max = 4;
  const ExactMetrics exact = evaluate_exact({c, OraclePolicy::always_transmit(), 100000});

  Environment env(c, 20260101);
  const std::int64_t T = 1000000;
  Trajectory traj;
  traj.num_sources = 1;
  std::vector<std::vector<double>> ind(4, std::vector<double>(static_cast<std::size_t>(T)));
  for (std::int64_t t = 0; t < T; ++t) {
    const int vc = env.state()[0].viol_count;
    for (int k = 1; k <= 4; ++k) ind[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(t)] = vc >= k ? 1.0 : 0.0;
    traj.append(env.state(), 1);
    env.step(1);
  }
  const CavrEstimate mc = cavr_from_trajectory(traj, 4);
  for (int k = 1; k <= 4; ++k) {
    const std::size_t i = static_cast<std::size_t>(k - 1);
    const double se = ref::batch_means_se(ind[i]);
    const double tol = std::max(3.0 * se, 0.005);
    const double gap = std::abs(mc.psi[i] - exact.psi[i]);
    v.detail << "k=" << k << " mc=" << mc.psi[i] << " exact=" << exact.psi[i] << " tol=" << tol << "; ";
    v.require(gap <= tol, "psi_" + std::to_string(k));
  }
  const double secs = seconds_since(t0);
  v.detail << "runtime=" << secs << "s";
  v.require(secs < 60.0, "runtime");
  recorded().push_back(std::move(traj));
  return v;
}

Trajectory random_trajectory(Rng& rng, std::uint64_t seed, SystemConfig& c) {
  const int m = 1 + static_cast<int>(rng.below(5));
  c = SystemConfig::homogeneous(m, 0.2 + 0.8 * rng.uniform(), 0.2 + 0.8 * rng.uniform());
  c.zeta = 1 + static_cast<int>(rng.below(8));
  c.delta_max = c.zeta + 1 + static_cast<int>(rng.below(20));
  c.k_max = 1 + static_cast<int>(rng.below(9));
  Environment env(c, seed);
  Rng act(seed ^ 0x5a5a5a5aULL);
  Trajectory traj;
  traj.num_sources = m;
  const std::int64_t T = 200 + static_cast<std::int64_t>(rng.below(2000));
  const double idle = rng.uniform();
  for (std::int64_t t = 0; t < T; ++t) {
    const int a = act.uniform() < idle ? 0 : 1 + static_cast<int>(act.below(static_cast<std::uint64_t>(m)));
    traj.append(env.state(), a);
    env.step(a);
  }
  return traj;
}

std::vector<std::pair<SystemConfig, Trajectory>>& random_set() {
  static std::vector<std::pair<SystemConfig, Trajectory>> set = [] {
    std::vector<std::pair<SystemConfig, Trajectory>> s;
    Rng rng(77);
    for (std::uint64_t i = 1; i <= 100; ++i) {
      SystemConfig c;
      Trajectory t = random_trajectory(rng, 1000 + i, c);
      s.emplace_back(c, std::move(t));
    }
    return s;
  }();
  return set;
}

Verdict avr_reduction() {
  Verdict v;
  std::size_t n = 0;
  for (const auto& [c, t] : random_set()) {
    const CavrEstimate e = cavr_from_trajectory(t, c.k_max);
    v.require(e.psi[0] == direct_avr(t.aoi_rx(), c.zeta), "random trajectory " + std::to_string(n));
    ++n;
  }
  for (const auto& t : recorded()) {
    const CavrEstimate e = cavr_from_trajectory(t, 4);
    v.require(e.psi[0] == direct_avr(t.aoi_rx(), 5), "oracle trajectory");
    ++n;
  }
  v.detail << n << " trajectories compared bitwise";
  return v;
}

Verdict monotonicity() {
  Verdict v;
  int violations = 0;
  int mismatched = 0;
  for (const auto& [c, t] : random_set()) {
    const CavrEstimate e = cavr_from_trajectory(t, c.k_max);
    for (std::size_t k = 1; k < e.window_counts.size(); ++k) {
      violations += e.window_counts[k] > e.window_counts[k - 1] ? 1 : 0;
    }
    mismatched += e.window_counts == ref::window_counts_by_scan(t.aoi_rx(), c.zeta, c.k_max) ? 0 : 1;
  }
  v.require(violations == 0, "monotonicity");
  v.require(mismatched == 0, "window recount");
  v.detail << random_set().size() << " trajectories, " << violations << " violations, " << mismatched
           << " recount mismatches";
  return v;
}

Verdict gradient_check() {
  Verdict v;
  Rng rng(404);
  int points = 0;
  double worst = 0.0;
  while (points < 100) {
    const int n = 1 + static_cast<int>(rng.below(16));
    const double kappa = 0.5 + rng.uniform();
    const auto tau = tau_hat(n);
    std::vector<double> pred(static_cast<std::size_t>(n)), target(static_cast<std::size_t>(n));
    for (auto& x : pred) x = 8 * rng.uniform() - 4;
    for (auto& x : target) x = 8 * rng.uniform() - 4;
    bool near_kink = false;
    for (double p : pred) {
      for (double t : target) {
        const double u = std::abs(t - p);
        near_kink = near_kink || u < 1e-3 || std::abs(u - kappa) < 1e-3;
      }
    }
    if (near_kink) continue;
    const auto qh = quantile_huber_loss(pred, target, tau, kappa);
    const auto ms = mse_td_loss(pred, target);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double fq = ref::central_difference(
          [&](const std::vector<double>& x) { return quantile_huber_loss(x, target, tau, kappa).loss; },
          pred, i, 1e-5);
      const double fm = ref::central_difference(
          [&](const std::vector<double>& x) { return mse_td_loss(x, target).loss; }, pred, i, 1e-5);
      worst = std::max({worst, ref::relative_error(qh.grad[i], fq), ref::relative_error(ms.grad[i], fm)});
    }
    ++points;
  }
  v.require(worst < 1e-4, "relative error");
  v.detail << points << " points, worst relative error " << worst;
  return v;
}

Verdict dueling_identity() {
  Verdict v;
  Rng rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int in = 1 + static_cast<int>(rng.below(12));
    const int hidden = 1 + static_cast<int>(rng.below(32));
    const int actions = 2 + static_cast<int>(rng.below(10));
    const int n = 1 + static_cast<int>(rng.below(64));
    const NetShape shape{in, hidden, actions, n, true};
    const auto p = NetParams<double>::initialized(shape, rng);
    Matrix<double> x(in, 1);
    for (int i = 0; i < in; ++i) x(i, 0) = 2 * rng.uniform() - 1;
    const auto parts = dueling_parts(p, x);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int a = 0; a < actions; ++a) s += parts.centered_advantage(a * n + i, 0);
      worst = std::max(worst, std::abs(s));
    }
  }
  v.require(worst <= 1e-9, "advantage sum");
  v.detail << "1000 pairs, max |sum_a A| = " << worst;
  return v;
}

Verdict unit_numbers() {
  Verdict v;
  const double tol = 1e-9;
  auto near = [&](double got, double want, const std::string& what) {
    v.require(std::abs(got - want) <= tol, what);
    v.detail << what << "=" << got << " ";
  };
  near(epsilon(1, 1.0, 0.05, 1000), 1.0, "eps(1)");
  near(epsilon(1000, 1.0, 0.05, 1000), 0.05, "eps(1000)");
  near(quantile_huber(0.5, 0.75, 1.0).rho, 0.09375, "huber_quadratic");
  near(quantile_huber(-2.0, 0.25, 1.0).rho, 1.125, "huber_linear");
  const std::vector<int> counts{2, 0};
  near(lagrangian_reward(counts, 1, WeightVector::custom({0.5, 0.5}), 0.5, 0.75), -0.625, "reward");
  near(update_lambda(0.2, 0.1, 0.9, 0.75), 0.215, "lambda");
  const PenaltyTable h = penalty_table(WeightVector::custom({0.5, 0.3, 0.2}));
  v.require(h.h.size() == 4, "H size");
  near(h(0), 0.0, "H0");
  near(h(1), 0.5, "H1");
  near(h(2), 0.8, "H2");
  near(h(3), 1.0, "H3");
  // 0.3889 is 0.7 * 5/9 rounded to four places.
  const double idx = dpp_index({2, 20, 4}, 0.7, 15, 100, 9, penalty_table(WeightVector::uniform(9)));
  near(idx, 0.7 * 5.0 / 9.0, "dpp_index");
  v.require(std::abs(idx - 0.3889) < 5e-5, "dpp_index to four places");
  near(virtual_queue_update(0.3, 1, 0.75), 0.55, "queue");
  return v;
}

struct DeskRuns {
  std::map<PolicyKind, std::vector<RunRecord>> runs;
  double seconds = 0.0;
};

ExperimentConfig desk_config(const fs::path& workdir) {
  ExperimentConfig c;
  c.num_sources = 5;
  c.k_max = 5;
  c.scheme = WeightScheme::exponential;
  c.beta = 2.0;
  c.agent.episodes = 1000;
  c.agent.slots_per_episode = 100;
  c.eval_horizon = 100000;
  c.output_dir = workdir.string();
  return c;
}

// Reuses a finished run directory when present; training is deterministic
// given the configuration and seed, so only the evaluation is repeated.
RunRecord run_or_reuse(const ExperimentConfig& c, std::uint64_t seed, bool reuse) {
  const fs::path dir = run_directory(c, seed);
  if (reuse && is_learning(c.policy) && fs::exists(dir / "checkpoint.txt") &&
      fs::exists(dir / "metrics.csv")) {
    RunRecord r;
    r.policy = c.policy;
    r.seed = seed;
    r.run_dir = dir;
    r.checkpoint = dir / "checkpoint.txt";
    r.evaluation = evaluate_run(c, seed, {false, nullptr});
    return r;
  }
  return train(c, seed);
}

const DeskRuns& desk_runs(const fs::path& workdir, int seeds, bool reuse, bool verbose) {
  static DeskRuns d;
  static bool done = false;
  if (done) return d;
  const auto t0 = Clock::now();
  const ExperimentConfig base = desk_config(workdir);
  const std::vector<std::pair<PolicyKind, int>> plan{
      {PolicyKind::qr_d3qn, seeds}, {PolicyKind::dqn, seeds}, {PolicyKind::d3qn, 1},
      {PolicyKind::qr_dqn, 1},      {PolicyKind::dpp, seeds}};
  for (const auto& [policy, n] : plan) {
    ExperimentConfig c = base;
    c.policy = policy;
    for (int s = 1; s <= n; ++s) {
      const auto ts = Clock::now();
      d.runs[policy].push_back(run_or_reuse(c, static_cast<std::uint64_t>(s), reuse));
      if (verbose) {
        const auto& r = d.runs[policy].back();
        std::cerr << to_string(policy) << " seed=" << s << " weighted_cavr=" << r.evaluation.weighted_cavr
                  << " eta_hat=" << r.evaluation.cost.eta_hat << " (" << seconds_since(ts) << "s)\n";
      }
    }
  }
  d.seconds = seconds_since(t0);
  done = true;
  return d;
}

Verdict constraint_satisfaction(const DeskRuns& d) {
  Verdict v;
  for (const auto& [policy, runs] : d.runs) {
    if (policy != PolicyKind::dpp && !is_learning(policy)) continue;
    v.detail << to_string(policy) << "=[";
    for (const auto& r : runs) {
      v.detail << r.evaluation.cost.eta_hat << (&r == &runs.back() ? "" : " ");
      v.require(r.evaluation.cost.horizon == 100000, "evaluation horizon");
      v.require(r.evaluation.cost.eta_hat <= 0.77, to_string(policy) + " seed " + std::to_string(r.seed));
    }
    v.detail << "] ";
  }
  return v;
}

Verdict trend(const DeskRuns& d) {
  Verdict v;
  auto med = [&](PolicyKind p) {
    std::vector<double> x;
    for (const auto& r : d.runs.at(p)) x.push_back(r.evaluation.weighted_cavr);
    return x;
  };
  const auto qr = med(PolicyKind::qr_d3qn);
  const auto dq = med(PolicyKind::dqn);
  v.require(qr.size() >= 5 && dq.size() >= 5, "at least five seeds");
  const double mq = median(qr);
  const double md = median(dq);
  v.require(mq <= md, "median ordering");
  v.require(d.seconds <= 7200.0, "runtime budget");
  v.detail << "median qr_d3qn=" << mq << " median dqn=" << md << " seeds=" << qr.size()
           << " desk runtime=" << d.seconds << "s";
  return v;
}

Verdict dpp_bound(const DeskRuns& d) {
  Verdict v;
  int paths = 0;
  auto check = [&](double total, double T, double eta_max, double backlog, const std::string& what) {
    v.require(total / T <= eta_max + backlog / T + 1e-12, what);
    ++paths;
  };
  for (const auto& r : d.runs.at(PolicyKind::dpp)) {
    check(static_cast<double>(r.dpp_train_cost), static_cast<double>(r.train_slots), 0.75, r.dpp_train_backlog,
          "desk training seed " + std::to_string(r.seed));
    v.require(r.evaluation.final_backlog.has_value(), "evaluation backlog");
    check(static_cast<double>(r.evaluation.cost.transmit_slots), static_cast<double>(r.evaluation.cost.horizon),
          0.75, r.evaluation.final_backlog.value_or(0.0), "desk evaluation seed " + std::to_string(r.seed));
  }
  Rng rng(909);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 1 + static_cast<int>(rng.below(6));
    SystemConfig c = SystemConfig::homogeneous(m, 0.3 + 0.7 * rng.uniform(), 0.3 + 0.7 * rng.uniform());
    c.k_max = 1 + static_cast<int>(rng.below(9));
    c.zeta = 2 + static_cast<int>(rng.below(10));
    c.delta_max = c.zeta + 5 + static_cast<int>(rng.below(40));
    c.eta_max = 0.05 + 0.9 * rng.uniform();
    DppRolloutPolicy policy(c, WeightVector::exponential(c.k_max, 2.0), 0.5 + 20 * rng.uniform());
    const std::int64_t T = 1000 + static_cast<std::int64_t>(rng.below(20000));
    const EvaluationResult r = evaluate(policy, c, WeightVector::exponential(c.k_max, 2.0), 3000 + static_cast<std::uint64_t>(trial), {T, 0.05, 1000, false});
    check(static_cast<double>(r.cost.transmit_slots), static_cast<double>(T), c.eta_max,
          r.final_backlog.value_or(-1.0), "random path " + std::to_string(trial));
  }
  v.detail << paths << " sample paths";
  return v;
}

Verdict sigma_exactness() {
  Verdict v;
  Rng rng(1010);
  int sentinels = 0;
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(12));
    const double eps = 0.01 + 0.1 * rng.uniform();
    std::vector<double> psi(static_cast<std::size_t>(k));
    const int mode = trial % 4;
    for (auto& p : psi) {
      p = mode == 0 ? eps + (1.0 - eps) * rng.uniform()  // every scale above eps
          : mode == 1 ? 0.3 * rng.uniform()
                      : rng.uniform() * 2 * eps;
    }
    if (mode != 2) std::sort(psi.rbegin(), psi.rend());
    if (mode == 3) psi[rng.below(psi.size())] = eps;
    const int got = sigma_min(psi, eps);
    const int want = ref::sigma_scan(psi, eps);
    sentinels += want == k + 1 ? 1 : 0;
    mismatches += got == want ? 0 : 1;
  }
  v.require(mismatches == 0, "scan agreement");
  v.require(sentinels > 0, "sentinel coverage");
  v.detail << "1000 vectors, " << sentinels << " sentinel cases, " << mismatches << " mismatches";
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  int seeds = 5;
  bool fresh = false;
  bool verbose = false;
  app.add_option("--workdir", workdir, "directory for desk-scale runs");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--seeds", seeds, "seeds per compared variant")->check(CLI::PositiveNumber);
  app.add_flag("--fresh", fresh, "retrain even when finished runs exist");
  app.add_flag("-v,--verbose", verbose, "per-run progress on stderr");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto desk = [&]() -> const DeskRuns& { return desk_runs(workdir, seeds, !fresh, verbose); };
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"avr reduction", avr_reduction},
      {"count monotonicity", monotonicity},
      {"gradient check", gradient_check},
      {"dueling identity", dueling_identity},
      {"exact unit numbers", unit_numbers},
      {"constraint satisfaction", [&] { return constraint_satisfaction(desk()); }},
      {"trend reproduction", [&] { return trend(desk()); }},
      {"dpp cost bound", [&] { return dpp_bound(desk()); }},
      {"sigma_min exactness", sigma_exactness},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": "
              << v.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
