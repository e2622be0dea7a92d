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

#include "cavr/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "cavr/cmdp.hpp"
#include "cavr/valuenet.hpp"

namespace cavr {

std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::dqn:
      return "dqn";
    case PolicyKind::d3qn:
      return "d3qn";
    case PolicyKind::qr_dqn:
      return "qr_dqn";
    case PolicyKind::qr_d3qn:
      return "qr_d3qn";
    case PolicyKind::dpp:
      return "dpp";
    case PolicyKind::always_transmit:
      return "always_transmit";
    case PolicyKind::round_robin:
      return "round_robin";
    case PolicyKind::random:
      return "random";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  for (PolicyKind p : {PolicyKind::dqn, PolicyKind::d3qn, PolicyKind::qr_dqn, PolicyKind::qr_d3qn,
                       PolicyKind::dpp, PolicyKind::always_transmit, PolicyKind::round_robin,
                       PolicyKind::random}) {
    if (name == to_string(p)) return p;
  }
  if (name == "qr-dqn") return PolicyKind::qr_dqn;
  if (name == "qr-d3qn") return PolicyKind::qr_d3qn;
  throw ConfigError("policy", "unknown policy '" + std::string(name) + "'");
}

bool is_learning(PolicyKind p) {
  return p == PolicyKind::dqn || p == PolicyKind::d3qn || p == PolicyKind::qr_dqn ||
         p == PolicyKind::qr_d3qn;
}

Variant to_variant(PolicyKind p) {
  switch (p) {
    case PolicyKind::dqn:
      return Variant::dqn;
    case PolicyKind::d3qn:
      return Variant::d3qn;
    case PolicyKind::qr_dqn:
      return Variant::qr_dqn;
    case PolicyKind::qr_d3qn:
      return Variant::qr_d3qn;
    default:
      throw std::invalid_argument(to_string(p) + " is not a learning policy");
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T value{};
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ConfigError(std::string(key), "cannot parse '" + t + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(std::string(key), "expected a boolean, got '" + t + "'");
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::string t = trim(text);
  std::size_t start = 0;
  while (start <= t.size()) {
    const auto comma = t.find(',', start);
    const std::string item = trim(std::string_view(t).substr(start, comma - start));
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = parse_number<std::uint64_t>("seeds", item.substr(0, dash));
      const auto hi = parse_number<std::uint64_t>("seeds", item.substr(dash + 1));
      if (hi < lo) throw ConfigError("seeds", "empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_number<std::uint64_t>("seeds", item));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("seeds", "no seeds given");
  return seeds;
}

struct KeyOps {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define CAVR_INT_KEY(name, member)                                                      \
  {name, {[](ExperimentConfig& c, std::string_view v) {                                 \
            c.member = parse_number<decltype(c.member)>(name, v);                       \
          },                                                                            \
          [](const ExperimentConfig& c) { return std::to_string(c.member); }}}
#define CAVR_REAL_KEY(name, member)                                                     \
  {name, {[](ExperimentConfig& c, std::string_view v) {                                 \
            c.member = parse_number<double>(name, v);                                   \
          },                                                                            \
          [](const ExperimentConfig& c) { return format_double(c.member); }}}
#define CAVR_BOOL_KEY(name, member)                                                     \
  {name, {[](ExperimentConfig& c, std::string_view v) { c.member = parse_bool(name, v); }, \
          [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}}

const std::vector<std::pair<std::string, KeyOps>>& key_table() {
  static const std::vector<std::pair<std::string, KeyOps>> table = {
      CAVR_INT_KEY("num_sources", num_sources),
      CAVR_REAL_KEY("p_gen", p_gen),
      CAVR_REAL_KEY("p_succ", p_succ),
      CAVR_INT_KEY("zeta", zeta),
      CAVR_INT_KEY("k_max", k_max),
      CAVR_INT_KEY("delta_max", delta_max),
      CAVR_REAL_KEY("eta_max", eta_max),
      {"scheme", {[](ExperimentConfig& c, std::string_view v) {
                    c.scheme = parse_weight_scheme(trim(v));
                  },
                  [](const ExperimentConfig& c) { return to_string(c.scheme); }}},
      CAVR_REAL_KEY("beta", beta),
      CAVR_INT_KEY("k_o", k_o),
      {"policy", {[](ExperimentConfig& c, std::string_view v) { c.policy = parse_policy(trim(v)); },
                  [](const ExperimentConfig& c) { return to_string(c.policy); }}},
      CAVR_REAL_KEY("gamma", agent.gamma),
      CAVR_REAL_KEY("alpha", agent.alpha),
      CAVR_INT_KEY("batch_size", agent.batch_size),
      CAVR_INT_KEY("num_quantiles", agent.num_quantiles),
      CAVR_INT_KEY("target_period", agent.target_period),
      CAVR_REAL_KEY("eps_start", agent.eps_start),
      CAVR_REAL_KEY("eps_end", agent.eps_end),
      CAVR_INT_KEY("eps_decay_episodes", agent.eps_decay_episodes),
      CAVR_INT_KEY("episodes", agent.episodes),
      CAVR_INT_KEY("slots_per_episode", agent.slots_per_episode),
      CAVR_REAL_KEY("kappa", agent.kappa),
      CAVR_INT_KEY("replay_capacity", agent.replay_capacity),
      CAVR_INT_KEY("min_replay", agent.min_replay),
      CAVR_INT_KEY("hidden", agent.hidden),
      CAVR_REAL_KEY("xi", agent.xi),
      CAVR_REAL_KEY("lambda_init", agent.lambda_init),
      {"seeds", {[](ExperimentConfig& c, std::string_view v) { c.seeds = parse_seeds(v); },
                 [](const ExperimentConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                     if (i) s += ',';
                     s += std::to_string(c.seeds[i]);
                   }
                   return s;
                 }}},
      CAVR_INT_KEY("eval_horizon", eval_horizon),
      CAVR_BOOL_KEY("heterogeneous", heterogeneous),
      CAVR_REAL_KEY("het_low", het_low),
      CAVR_REAL_KEY("het_high", het_high),
      CAVR_REAL_KEY("eps_hat", eps_hat),
      CAVR_REAL_KEY("v_dpp", v_dpp),
      {"output_dir", {[](ExperimentConfig& c, std::string_view v) { c.output_dir = trim(v); },
                      [](const ExperimentConfig& c) { return c.output_dir; }}},
      CAVR_BOOL_KEY("write_trajectory", write_trajectory),
      CAVR_INT_KEY("series_stride", series_stride),
  };
  return table;
}

#undef CAVR_INT_KEY
#undef CAVR_REAL_KEY
#undef CAVR_BOOL_KEY

const KeyOps& find_key(std::string_view key) {
  for (const auto& [name, ops] : key_table()) {
    if (name == key) return ops;
  }
  throw ConfigError(std::string(key), "unknown configuration key");
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& kv : key_table()) out.push_back(kv.first);
    return out;
  }();
  return names;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  find_key(trim(key)).set(*this, value);
}

std::string ExperimentConfig::get(std::string_view key) const { return find_key(key).get(*this); }

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, ops] : key_table()) out.emplace_back(name, ops.get(*this));
  return out;
}

std::string ExperimentConfig::hash() const {
  std::string text;
  for (const auto& [k, v] : entries()) {
    if (k == "seeds" || k == "output_dir") continue;
    text += k;
    text += '=';
    text += v;
    text += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

SystemConfig ExperimentConfig::system_config(std::uint64_t seed) const {
  SystemConfig s = SystemConfig::homogeneous(num_sources, p_gen, p_succ);
  s.zeta = zeta;
  s.k_max = k_max;
  s.delta_max = delta_max;
  s.eta_max = eta_max;
  if (heterogeneous) {
    Rng rng(derive_seed(seed, 7));
    for (auto& src : s.sources) {
      src.p_gen = het_low + (het_high - het_low) * rng.uniform();
      src.p_succ = het_low + (het_high - het_low) * rng.uniform();
    }
  }
  s.validate();
  return s;
}

WeightVector ExperimentConfig::weights() const {
  if (scheme == WeightScheme::custom) {
    throw ConfigError("scheme", "custom weights are only available through the library API");
  }
  return weight_vector(scheme, k_max, beta, k_o);
}

void ExperimentConfig::validate() const {
  if (num_sources < 1) throw ConfigError("num_sources", "must be positive");
  if (heterogeneous) {
    if (!(het_low > 0.0 && het_low <= het_high && het_high <= 1.0)) {
      throw ConfigError("het_low", "need 0 < het_low <= het_high <= 1");
    }
  }
  system_config(seeds.empty() ? 0 : seeds.front());
  weights();
  if (is_learning(policy)) {
    AgentConfig a = agent;
    a.variant = to_variant(policy);
    a.validate();
  } else {
    if (agent.episodes < 1) throw ConfigError("episodes", "must be positive");
    if (agent.slots_per_episode < 1) throw ConfigError("slots_per_episode", "must be positive");
  }
  if (seeds.empty()) throw ConfigError("seeds", "no seeds given");
  if (eval_horizon < k_max) throw ConfigError("eval_horizon", "must be at least k_max");
  if (!(eps_hat > 0.0 && eps_hat < 1.0)) throw ConfigError("eps_hat", "must lie in (0,1)");
  if (!(v_dpp > 0.0)) throw ConfigError("v_dpp", "must be positive");
  if (series_stride < 1) throw ConfigError("series_stride", "must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
}

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    }
    base.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_config(in, std::move(base));
}

int AlwaysTransmitPolicy::act(const SystemState& state, std::span<const float>) {
  std::size_t best = 0;
  for (std::size_t m = 1; m < state.size(); ++m) {
    if (state[m].aoi_rx > state[best].aoi_rx) best = m;
  }
  return static_cast<int>(best) + 1;
}

int RoundRobinPolicy::act(const SystemState&, std::span<const float>) {
  const int a = next_ + 1;
  next_ = (next_ + 1) % num_sources_;
  return a;
}

EvaluationResult evaluate(SchedulingPolicy& policy, const SystemConfig& system,
                          const WeightVector& weights, std::uint64_t seed,
                          const EvaluationOptions& options) {
  if (options.horizon < system.k_max) {
    throw std::invalid_argument("evaluation horizon must be at least k_max");
  }
  if (weights.k_max() != system.k_max) throw ConfigError("weights", "length must equal k_max");
  policy.reset();
  Environment env(system, seed);
  env.reset();
  const auto m = static_cast<std::size_t>(system.num_sources);
  std::vector<float> features(3 * m);
  std::vector<int> counts(m);
  CavrAccumulator acc(system.k_max, system.num_sources);
  EvaluationResult result;
  if (options.record_trajectory) {
    result.trajectory.emplace();
    result.trajectory->num_sources = system.num_sources;
  }
  std::int64_t transmits = 0;
  for (std::int64_t t = 1; t <= options.horizon; ++t) {
    const SystemState& s = env.state();
    for (std::size_t i = 0; i < m; ++i) counts[i] = s[i].viol_count;
    acc.add_slot(counts);
    encode_state(s, system, features);
    const int action = policy.act(s, features);
    if (result.trajectory) result.trajectory->append(s, action);
    const StepOutcome out = env.step(action);
    policy.observe(out);
    transmits += out.cost;
    if (t % options.series_stride == 0 || t == options.horizon) {
      result.cost_series.emplace_back(t, static_cast<double>(transmits) / static_cast<double>(t));
    }
  }
  result.cavr = acc.estimate();
  result.weighted_cavr = weighted_cavr(result.cavr.psi, weights);
  result.sigma_min = sigma_min(result.cavr.psi, options.eps_hat);
  result.cost = CostEstimate{transmits, options.horizon,
                             static_cast<double>(transmits) / static_cast<double>(options.horizon)};
  if (auto* dpp = dynamic_cast<DppRolloutPolicy*>(&policy)) result.final_backlog = dpp->backlog();
  return result;
}

std::filesystem::path run_directory(const ExperimentConfig& config, std::uint64_t seed) {
  return std::filesystem::path(config.output_dir) /
         (config.hash() + "-seed" + std::to_string(seed));
}

namespace {

std::unique_ptr<SchedulingPolicy> make_baseline(PolicyKind kind, const SystemConfig& system,
                                                const WeightVector& w, double v_dpp,
                                                std::uint64_t seed) {
  switch (kind) {
    case PolicyKind::dpp:
      return std::make_unique<DppRolloutPolicy>(system, w, v_dpp);
    case PolicyKind::always_transmit:
      return std::make_unique<AlwaysTransmitPolicy>();
    case PolicyKind::round_robin:
      return std::make_unique<RoundRobinPolicy>(system.num_sources);
    case PolicyKind::random:
      return std::make_unique<RandomPolicy>(system.num_actions(), seed);
    default:
      throw std::invalid_argument(to_string(kind) + " is a learning policy");
  }
}

AgentConfig agent_config(const ExperimentConfig& config) {
  AgentConfig a = config.agent;
  a.variant = to_variant(config.policy);
  return a;
}

void write_config_file(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& [k, v] : config.entries()) out << k << " = " << v << '\n';
}

void write_system_csv(const SystemConfig& system, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "source,p_gen,p_succ\n";
  for (std::size_t m = 0; m < system.sources.size(); ++m) {
    out << m + 1 << ',' << format_double(system.sources[m].p_gen) << ','
        << format_double(system.sources[m].p_succ) << '\n';
  }
}

void write_cost_series(const EvaluationResult& eval, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "slot,eta_hat\n";
  for (const auto& [t, eta] : eval.cost_series) out << t << ',' << format_double(eta) << '\n';
}

EvaluationOptions eval_options(const ExperimentConfig& config) {
  return EvaluationOptions{config.eval_horizon, config.eps_hat, config.series_stride,
                           config.write_trajectory};
}

void write_evaluation_files(const ExperimentConfig& config, std::uint64_t seed,
                            const EvaluationResult& eval, const std::filesystem::path& dir) {
  {
    std::ofstream out(dir / "metrics.csv");
    write_metrics_csv(out, config.policy, seed, eval);
  }
  write_cost_series(eval, dir / "cost_series.csv");
  if (eval.trajectory) {
    std::ofstream out(dir / "trajectory.csv");
    write_trajectory_csv(*eval.trajectory, out);
  }
}

constexpr std::uint64_t kEnvStream = 1;
constexpr std::uint64_t kExploreStream = 2;
constexpr std::uint64_t kReplayStream = 3;
constexpr std::uint64_t kInitStream = 4;
constexpr std::uint64_t kBaselineStream = 5;
constexpr std::uint64_t kEvalStream = 100;
constexpr std::uint64_t kEvalPolicyStream = 101;

}  // namespace

RunRecord train(const ExperimentConfig& config, std::uint64_t seed, const RunOptions& options) {
  config.validate();
#if defined(__GLIBC__)
  // Minibatch temporaries are a few hundred KiB; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  RunRecord rec;
  rec.policy = config.policy;
  rec.seed = seed;
  rec.system = config.system_config(seed);
  const SystemConfig& system = rec.system;
  const WeightVector w = config.weights();
  const int dim = 3 * system.num_sources;
  const int episodes = config.agent.episodes;
  const int slots = config.agent.slots_per_episode;

  rec.run_dir = run_directory(config, seed);
  std::ofstream constraint_out;
  std::ofstream queue_out;
  if (options.write_files) {
    std::filesystem::create_directories(rec.run_dir);
    write_config_file(config, rec.run_dir / "config.txt");
    write_system_csv(system, rec.run_dir / "system.csv");
    constraint_out.open(rec.run_dir / "constraint.csv");
    constraint_out << "slot,lambda,eta_hat\n";
    if (config.policy == PolicyKind::dpp) {
      queue_out.open(rec.run_dir / "dpp_queue.csv");
      queue_out << "slot,backlog,action,best_index\n";
    }
  }

  Environment env(system, derive_seed(seed, kEnvStream));
  LagrangeState lag{config.agent.lambda_init, 0.0, 0, config.agent.xi, system.eta_max,
                    config.agent.gamma};
  std::vector<float> feat(static_cast<std::size_t>(dim));
  std::vector<float> next_feat(static_cast<std::size_t>(dim));

  std::unique_ptr<Agent> agent;
  std::unique_ptr<ReplayBuffer> buffer;
  std::unique_ptr<SchedulingPolicy> baseline;
  Rng explore(derive_seed(seed, kExploreStream));
  Rng replay_rng(derive_seed(seed, kReplayStream));
  const EpsilonSchedule schedule{config.agent.eps_start, config.agent.eps_end,
                                 config.agent.eps_decay_episodes};
  if (is_learning(config.policy)) {
    agent = std::make_unique<Agent>(agent_config(config), dim, system.num_actions(),
                                    derive_seed(seed, kInitStream));
    const std::size_t total = static_cast<std::size_t>(episodes) * static_cast<std::size_t>(slots);
    buffer = std::make_unique<ReplayBuffer>(std::min(config.agent.replay_capacity, total), dim);
  } else {
    baseline = make_baseline(config.policy, system, w, config.v_dpp,
                             derive_seed(seed, kBaselineStream));
  }
  auto* dpp = dynamic_cast<DppRolloutPolicy*>(baseline.get());

  for (int e = 1; e <= episodes; ++e) {
    env.reset();
    const double eps = agent ? schedule(e) : 0.0;
    double reward_sum = 0.0;
    double loss_sum = 0.0;
    int loss_n = 0;
    for (int n = 0; n < slots; ++n) {
      encode_state(env.state(), system, feat);
      int action;
      if (agent) {
        if (explore.uniform() < eps) {
          action = static_cast<int>(explore.below(static_cast<std::uint64_t>(system.num_actions())));
        } else {
          action = agent->greedy_action(feat);
        }
      } else {
        action = baseline->act(env.state(), feat);
      }
      const StepOutcome out = env.step(action);
      const double r = lagrangian_reward(out.next_viol_counts, out.cost, w, lag.lambda,
                                         system.eta_max);
      reward_sum += r;
      lag.record_cost(out.cost);
      if (agent) {
        encode_state(env.state(), system, next_feat);
        buffer->push(feat, action, r, next_feat);
        if (auto loss = agent->train_step(*buffer, replay_rng, lag.slot)) {
          loss_sum += *loss;
          ++loss_n;
        }
      } else {
        baseline->observe(out);
        rec.dpp_train_cost += out.cost;
      }
      lag.update_multiplier();
      if (constraint_out.is_open()) {
        constraint_out << lag.slot << ',' << format_double(lag.lambda) << ','
                       << format_double(lag.eta_hat) << '\n';
      }
      if (queue_out.is_open()) {
        queue_out << lag.slot << ',' << format_double(dpp->backlog()) << ',' << action << ','
                  << format_double(dpp->last_decision().best_index) << '\n';
      }
    }
    EpisodeLog log{e, lag.slot, eps, lag.lambda, lag.eta_hat, std::nullopt, reward_sum};
    if (loss_n > 0) log.loss = loss_sum / loss_n;
    rec.learning_curve.push_back(log);
    if (options.progress && (e % 100 == 0 || e == episodes)) {
      *options.progress << to_string(config.policy) << " seed " << seed << " episode " << e << '/'
                        << episodes << " reward " << format_double(reward_sum) << " lambda "
                        << format_double(lag.lambda) << " eta " << format_double(lag.eta_hat)
                        << '\n';
    }
  }
  rec.final_lambda = lag.lambda;
  rec.train_eta_hat = lag.eta_hat;
  rec.train_slots = lag.slot;
  if (dpp) rec.dpp_train_backlog = dpp->backlog();

  std::unique_ptr<SchedulingPolicy> eval_policy;
  if (agent) {
    eval_policy = std::make_unique<GreedyNetworkPolicy>(*agent);
  } else {
    eval_policy = make_baseline(config.policy, system, w, config.v_dpp,
                                derive_seed(seed, kEvalPolicyStream));
  }
  rec.evaluation = evaluate(*eval_policy, system, w, derive_seed(seed, kEvalStream),
                            eval_options(config));

  if (options.write_files) {
    {
      std::ofstream out(rec.run_dir / "learning_curve.csv");
      write_learning_curve_csv(out, rec.learning_curve);
    }
    if (agent) {
      rec.checkpoint = rec.run_dir / "checkpoint.txt";
      std::ofstream out(*rec.checkpoint);
      save_checkpoint(agent->online(), out);
    }
    write_evaluation_files(config, seed, rec.evaluation, rec.run_dir);
  }
  return rec;
}

EvaluationResult evaluate_run(const ExperimentConfig& config, std::uint64_t seed,
                              const RunOptions& options) {
  config.validate();
  const SystemConfig system = config.system_config(seed);
  const WeightVector w = config.weights();
  const auto dir = run_directory(config, seed);
  EvaluationResult eval;
  if (is_learning(config.policy)) {
    std::ifstream in(dir / "checkpoint.txt");
    if (!in) throw std::runtime_error("no checkpoint in " + dir.string());
    Agent agent(agent_config(config), 3 * system.num_sources, system.num_actions(), 0);
    agent.load(load_checkpoint<float>(in));
    GreedyNetworkPolicy policy(agent);
    eval = evaluate(policy, system, w, derive_seed(seed, kEvalStream), eval_options(config));
  } else {
    auto policy = make_baseline(config.policy, system, w, config.v_dpp,
                                derive_seed(seed, kEvalPolicyStream));
    eval = evaluate(*policy, system, w, derive_seed(seed, kEvalStream), eval_options(config));
  }
  if (options.write_files) {
    std::filesystem::create_directories(dir);
    write_evaluation_files(config, seed, eval, dir);
  }
  return eval;
}

bool is_sweep_axis(std::string_view axis) {
  for (std::string_view a : {"k_max", "k_o", "p_gen", "p_succ", "zeta", "M", "beta", "scheme"}) {
    if (axis == a) return true;
  }
  return false;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, std::string_view axis,
                            std::string_view value) {
  ExperimentConfig c = base;
  if (!is_sweep_axis(axis)) throw ConfigError(std::string(axis), "unknown sweep axis");
  if (axis == "M") {
    c.set("num_sources", value);
  } else if (axis == "k_o") {
    c.scheme = WeightScheme::one_hot;
    c.set("k_o", value);
    c.k_max = c.k_o;
  } else {
    c.set(axis, value);
    if (axis == "k_max" && c.scheme == WeightScheme::one_hot) c.k_o = std::min(c.k_o, c.k_max);
  }
  return c;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, std::string_view axis,
                            const std::vector<std::string>& values,
                            const std::vector<PolicyKind>& policies, const RunOptions& options) {
  if (!is_sweep_axis(axis)) throw ConfigError(std::string(axis), "unknown sweep axis");
  if (values.empty()) throw ConfigError("values", "sweep needs at least one value");
  if (policies.empty()) throw ConfigError("policies", "sweep needs at least one policy");
  std::vector<SweepRow> rows;
  for (const auto& value : values) {
    for (PolicyKind p : policies) {
      ExperimentConfig c = apply_axis(base, axis, value);
      c.policy = p;
      c.validate();
      for (std::uint64_t seed : c.seeds) {
        const RunRecord rec = train(c, seed, options);
        SweepRow row;
        row.axis = std::string(axis);
        row.value = value;
        row.policy = p;
        row.seed = seed;
        row.k_max = c.k_max;
        row.psi = rec.evaluation.cavr.psi;
        row.weighted_cavr = rec.evaluation.weighted_cavr;
        row.sigma_min = rec.evaluation.sigma_min;
        row.eta_hat = rec.evaluation.cost.eta_hat;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SweepSummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummaryRow> out;
  // Preserve first-appearance order of (value, policy).
  std::vector<std::pair<std::string, PolicyKind>> order;
  std::map<std::pair<std::string, int>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.value, static_cast<int>(r.policy));
    if (!groups.count(key)) order.emplace_back(r.value, r.policy);
    groups[key].push_back(&r);
  }
  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const auto& [value, policy] : order) {
    const auto& g = groups[{value, static_cast<int>(policy)}];
    std::vector<double> w, s, e;
    for (const auto* r : g) {
      w.push_back(r->weighted_cavr);
      s.push_back(r->sigma_min);
      e.push_back(r->eta_hat);
    }
    SweepSummaryRow row;
    row.axis = g.front()->axis;
    row.value = value;
    row.policy = policy;
    row.runs = g.size();
    row.median_weighted_cavr = median(w);
    row.mean_weighted_cavr = mean(w);
    row.median_sigma_min = median(s);
    row.mean_sigma_min = mean(s);
    row.median_eta_hat = median(e);
    row.mean_eta_hat = mean(e);
    out.push_back(row);
  }
  for (auto& row : out) {
    if (row.policy != PolicyKind::qr_d3qn) continue;
    for (const auto& ref : out) {
      if (ref.policy != PolicyKind::d3qn || ref.value != row.value) continue;
      if (ref.median_weighted_cavr > 0.0) {
        row.rel_reduction_median =
            (ref.median_weighted_cavr - row.median_weighted_cavr) / ref.median_weighted_cavr;
      }
      if (ref.mean_weighted_cavr > 0.0) {
        row.rel_reduction_mean =
            (ref.mean_weighted_cavr - row.mean_weighted_cavr) / ref.mean_weighted_cavr;
      }
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, PolicyKind policy, std::uint64_t seed,
                       const EvaluationResult& eval, bool header) {
  if (header) out << "policy,seed,k,psi_k,weighted_cavr,sigma_min,eta_hat,horizon\n";
  for (int k = 1; k <= eval.cavr.k_max(); ++k) {
    out << to_string(policy) << ',' << seed << ',' << k << ','
        << format_double(eval.cavr.psi[static_cast<std::size_t>(k - 1)]) << ','
        << format_double(eval.weighted_cavr) << ',' << eval.sigma_min << ','
        << format_double(eval.cost.eta_hat) << ',' << eval.cavr.horizon << '\n';
  }
}

void write_learning_curve_csv(std::ostream& out, const std::vector<EpisodeLog>& curve) {
  out << "episode,slot,epsilon,lambda,eta_hat,loss,episodic_reward\n";
  for (const auto& e : curve) {
    out << e.episode << ',' << e.slot << ',' << format_double(e.epsilon) << ','
        << format_double(e.lambda) << ',' << format_double(e.eta_hat) << ','
        << (e.loss ? format_double(*e.loss) : std::string()) << ','
        << format_double(e.episodic_reward) << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "axis,value,policy,seed,k_max,weighted_cavr,sigma_min,eta_hat,psi\n";
  for (const auto& r : rows) {
    out << r.axis << ',' << r.value << ',' << to_string(r.policy) << ',' << r.seed << ','
        << r.k_max << ',' << format_double(r.weighted_cavr) << ',' << r.sigma_min << ','
        << format_double(r.eta_hat) << ',';
    for (std::size_t k = 0; k < r.psi.size(); ++k) {
      if (k) out << ';';
      out << format_double(r.psi[k]);
    }
    out << '\n';
  }
}

void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummaryRow>& rows) {
  out << "axis,value,policy,runs,median_weighted_cavr,mean_weighted_cavr,median_sigma_min,"
         "mean_sigma_min,median_eta_hat,mean_eta_hat,rel_reduction_median,rel_reduction_mean\n";
  for (const auto& r : rows) {
    out << r.axis << ',' << r.value << ',' << to_string(r.policy) << ',' << r.runs << ','
        << format_double(r.median_weighted_cavr) << ',' << format_double(r.mean_weighted_cavr)
        << ',' << format_double(r.median_sigma_min) << ',' << format_double(r.mean_sigma_min)
        << ',' << format_double(r.median_eta_hat) << ',' << format_double(r.mean_eta_hat) << ','
        << (r.rel_reduction_median ? format_double(*r.rel_reduction_median) : std::string())
        << ','
        << (r.rel_reduction_mean ? format_double(*r.rel_reduction_mean) : std::string())
        << '\n';
  }
}

}  // namespace cavr
