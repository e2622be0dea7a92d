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


#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavr/cmdp.hpp"
#include "cavr/dpp.hpp"
#include "cavr/harness.hpp"
#include "cavr/oracle.hpp"
#include "cavr/valuenet.hpp"

namespace {

using cavr::ExperimentConfig;

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> flags;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "key = value configuration file");
  cmd->add_option("-s,--set", opts.assignments, "Override as key=value (repeatable)");
  for (const auto& key : ExperimentConfig::keys()) {
    cmd->add_option("--" + key, opts.flags[key], "Override " + key);
  }
}

// File first, then --set, then dedicated flags.
ExperimentConfig resolve(const ConfigOptions& opts) {
  ExperimentConfig c;
  if (!opts.config_file.empty()) c = cavr::load_config_file(opts.config_file, c);
  for (const auto& a : opts.assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw cavr::ConfigError(a, "expected key=value");
    c.set(a.substr(0, eq), a.substr(eq + 1));
  }
  for (const auto& [key, value] : opts.flags) {
    if (!value.empty()) c.set(key, value);
  }
  c.validate();
  return c;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_summary(const ExperimentConfig& c, std::uint64_t seed,
                   const cavr::EvaluationResult& eval) {
  std::cout << cavr::to_string(c.policy) << " seed=" << seed
            << " weighted_cavr=" << cavr::format_double(eval.weighted_cavr)
            << " sigma_min=" << eval.sigma_min
            << " eta_hat=" << cavr::format_double(eval.cost.eta_hat) << '\n';
}

int run_oracle(const ExperimentConfig& c, const std::string& policy_name, int action) {
  cavr::SystemConfig sys = c.system_config(c.seeds.front());
  cavr::ChainSpec spec{sys, cavr::OraclePolicy::idle(sys.num_actions())};
  if (policy_name == "always_transmit") {
    spec.policy = cavr::OraclePolicy::always_transmit();
  } else if (policy_name == "idle") {
    spec.policy = cavr::OraclePolicy::idle(sys.num_actions());
  } else if (policy_name == "random") {
    spec.policy = cavr::OraclePolicy::uniform_random(sys.num_actions());
  } else if (policy_name == "fixed") {
    spec.policy = cavr::OraclePolicy::fixed(action, sys.num_actions());
  } else {
    throw cavr::ConfigError("oracle_policy", "unknown oracle policy '" + policy_name + "'");
  }
  const cavr::ExactMetrics m = cavr::evaluate_exact(spec);
  const cavr::WeightVector w = c.weights();
  std::cout << "quantity,k,value\n";
  for (std::size_t k = 0; k < m.psi.size(); ++k) {
    std::cout << "psi," << k + 1 << ',' << cavr::format_double(m.psi[k]) << '\n';
  }
  std::cout << "avr,," << cavr::format_double(m.avr) << '\n';
  std::cout << "cost,," << cavr::format_double(m.cost) << '\n';
  std::cout << "weighted_cavr,," << cavr::format_double(cavr::weighted_cavr(m.psi, w)) << '\n';
  return 0;
}

int run_selftest() {
  int failures = 0;
  auto check = [&](const char* name, bool ok) {
    std::cout << (ok ? "ok   " : "FAIL ") << name << '\n';
    if (!ok) ++failures;
  };
  auto near = [](double a, double b, double tol) { return std::abs(a - b) <= tol; };

  const cavr::WeightVector w = cavr::WeightVector::exponential(3, 2.0);
  check("exponential weights", near(w[1], 1.0 / 7, 1e-15) && near(w[3], 4.0 / 7, 1e-15));
  check("epsilon schedule", near(cavr::epsilon(500, 1.0, 0.05, 1000), 0.52548, 1e-5));
  const cavr::WeightVector u = cavr::WeightVector::uniform(4);
  const std::vector<int> v{2, 0};
  check("lagrangian reward",
        near(cavr::lagrangian_reward(v, 1, u, 0.5, 0.75), -0.25 * 2 / 2 - 0.125, 1e-12));
  check("virtual queue", near(cavr::virtual_queue_update(0.3, 1, 0.75), 0.55, 1e-12));
  const auto h = cavr::quantile_huber(-0.5, 0.25, 1.0);
  check("quantile huber", near(h.rho, 0.09375, 1e-15));

  cavr::SystemConfig sys = cavr::SystemConfig::homogeneous(1, 0.7, 0.7);
  sys.zeta = 3;
  sys.k_max = 3;
  sys.delta_max = 8;
  const cavr::ExactMetrics m =
      cavr::evaluate_exact({sys, cavr::OraclePolicy::always_transmit(), 100000});
  check("oracle psi is nonincreasing", m.psi[0] >= m.psi[1] && m.psi[1] >= m.psi[2]);
  check("oracle cost", near(m.cost, 1.0, 1e-12));
  std::cout << (failures == 0 ? "selftest passed" : "selftest failed") << '\n';
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persistence-aware AoI scheduling: training, evaluation and exact analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  ConfigOptions train_opts, eval_opts, sweep_opts, oracle_opts;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* train = app.add_subcommand("train", "Train a policy for every configured seed");
  add_config_options(train, train_opts);

  auto* evaluate = app.add_subcommand("evaluate", "Re-evaluate finished runs");
  add_config_options(evaluate, eval_opts);

  auto* sweep = app.add_subcommand("sweep", "Sweep one axis over policies and seeds");
  add_config_options(sweep, sweep_opts);
  std::string axis, values, policies = "qr_d3qn,d3qn";
  sweep->add_option("--axis", axis, "k_max, k_o, p_gen, p_succ, zeta, M, beta or scheme")
      ->required();
  sweep->add_option("--values", values, "Comma-separated axis values")->required();
  sweep->add_option("--policies", policies, "Comma-separated policies");

  auto* oracle = app.add_subcommand("oracle", "Exact C-AVR of a fixed policy on a small chain");
  add_config_options(oracle, oracle_opts);
  std::string oracle_policy = "always_transmit";
  int oracle_action = 0;
  oracle->add_option("--oracle-policy", oracle_policy, "always_transmit, idle, random or fixed");
  oracle->add_option("--action", oracle_action, "Action for the fixed policy");

  auto* selftest = app.add_subcommand("selftest", "Run built-in sanity checks");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ostream* progress = quiet ? nullptr : &std::cerr;
    if (*train) {
      const ExperimentConfig c = resolve(train_opts);
      for (std::uint64_t seed : c.seeds) {
        const cavr::RunRecord rec = cavr::train(c, seed, {true, progress});
        print_summary(c, seed, rec.evaluation);
        std::cout << "run_dir=" << rec.run_dir.string() << '\n';
      }
    } else if (*evaluate) {
      const ExperimentConfig c = resolve(eval_opts);
      for (std::uint64_t seed : c.seeds) {
        print_summary(c, seed, cavr::evaluate_run(c, seed, {true, progress}));
      }
    } else if (*sweep) {
      const ExperimentConfig c = resolve(sweep_opts);
      std::vector<cavr::PolicyKind> kinds;
      for (const auto& p : split(policies)) kinds.push_back(cavr::parse_policy(p));
      const auto rows = cavr::sweep(c, axis, split(values), kinds, {true, progress});
      std::filesystem::create_directories(c.output_dir);
      {
        std::ofstream out(std::filesystem::path(c.output_dir) / "sweep.csv");
        cavr::write_sweep_csv(out, rows);
      }
      std::ofstream out(std::filesystem::path(c.output_dir) / "summary.csv");
      cavr::write_sweep_summary_csv(out, cavr::summarize(rows));
      cavr::write_sweep_summary_csv(std::cout, cavr::summarize(rows));
    } else if (*oracle) {
      return run_oracle(resolve(oracle_opts), oracle_policy, oracle_action);
    } else if (*selftest) {
      return run_selftest();
    }
  } catch (const cavr::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
