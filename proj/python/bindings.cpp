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


#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cavr/agents.hpp"
#include "cavr/cmdp.hpp"
#include "cavr/dpp.hpp"
#include "cavr/env.hpp"
#include "cavr/harness.hpp"
#include "cavr/metrics.hpp"
#include "cavr/oracle.hpp"

namespace py = pybind11;
using namespace cavr;

namespace {

ExperimentConfig to_config(const py::dict& overrides) {
  ExperimentConfig c;
  for (const auto& [k, v] : overrides) {
    const std::string key = py::str(k);
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& item : v) value += (value.empty() ? "" : ",") + std::string(py::str(item));
    } else if (py::isinstance<py::float_>(v)) {
      value = format_double(v.cast<double>());
    } else {
      value = py::str(v);
    }
    c.set(key, value);
  }
  c.validate();
  return c;
}

py::dict config_dict(const ExperimentConfig& c) {
  py::dict d;
  for (const auto& [k, v] : c.entries()) d[py::str(k)] = v;
  return d;
}

py::dict evaluation_dict(const EvaluationResult& r) {
  py::dict d;
  d["psi"] = r.cavr.psi;
  d["window_counts"] = r.cavr.window_counts;
  d["weighted_cavr"] = r.weighted_cavr;
  d["sigma_min"] = r.sigma_min;
  d["eta_hat"] = r.cost.eta_hat;
  d["horizon"] = r.cost.horizon;
  d["transmit_slots"] = r.cost.transmit_slots;
  d["cost_series"] = r.cost_series;
  if (r.final_backlog) d["final_backlog"] = *r.final_backlog;
  return d;
}

std::unique_ptr<SchedulingPolicy> baseline(const std::string& name, const SystemConfig& system,
                                           const WeightVector& weights, double v_dpp,
                                           std::uint64_t seed) {
  switch (parse_policy(name)) {
    case PolicyKind::dpp: return std::make_unique<DppRolloutPolicy>(system, weights, v_dpp);
    case PolicyKind::always_transmit: return std::make_unique<AlwaysTransmitPolicy>();
    case PolicyKind::round_robin: return std::make_unique<RoundRobinPolicy>(system.num_sources);
    case PolicyKind::random: return std::make_unique<RandomPolicy>(system.num_actions(), seed);
    default: throw ConfigError("policy", "simulate takes an analytic policy; use train for " + name);
  }
}

SystemConfig make_system(int num_sources, double p_gen, double p_succ, int zeta, int k_max,
                         int delta_max, double eta_max) {
  SystemConfig c = SystemConfig::homogeneous(num_sources, p_gen, p_succ);
  c.zeta = zeta;
  c.k_max = k_max;
  c.delta_max = delta_max;
  c.eta_max = eta_max;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_cavr, m) {
  m.doc() = "Cumulative age-violation scheduling: simulator, estimators, oracle and agents.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<OracleError>(m, "OracleError", PyExc_RuntimeError);

  py::class_<SourceState>(m, "SourceState")
      .def(py::init<int, int, int>(), py::arg("aoi_tx") = 0, py::arg("aoi_rx") = 1,
           py::arg("viol_count") = 0)
      .def_readwrite("aoi_tx", &SourceState::aoi_tx)
      .def_readwrite("aoi_rx", &SourceState::aoi_rx)
      .def_readwrite("viol_count", &SourceState::viol_count)
      .def("__eq__", [](const SourceState& a, const SourceState& b) { return a == b; })
      .def("__repr__", [](const SourceState& s) {
        std::ostringstream o;
        o << "SourceState(aoi_tx=" << s.aoi_tx << ", aoi_rx=" << s.aoi_rx
          << ", viol_count=" << s.viol_count << ")";
        return o.str();
      });

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init(&make_system), py::arg("num_sources") = 10, py::arg("p_gen") = 0.7,
           py::arg("p_succ") = 0.7, py::arg("zeta") = 15, py::arg("k_max") = 9,
           py::arg("delta_max") = 100, py::arg("eta_max") = 0.75)
      .def_readonly("num_sources", &SystemConfig::num_sources)
      .def_readwrite("zeta", &SystemConfig::zeta)
      .def_readwrite("k_max", &SystemConfig::k_max)
      .def_readwrite("delta_max", &SystemConfig::delta_max)
      .def_readwrite("eta_max", &SystemConfig::eta_max)
      .def_property_readonly("p_gen", [](const SystemConfig& c) {
        std::vector<double> v;
        for (const auto& s : c.sources) v.push_back(s.p_gen);
        return v;
      })
      .def_property_readonly("p_succ", [](const SystemConfig& c) {
        std::vector<double> v;
        for (const auto& s : c.sources) v.push_back(s.p_succ);
        return v;
      })
      .def("validate", &SystemConfig::validate);

  py::class_<Environment>(m, "Environment")
      .def(py::init<SystemConfig, std::uint64_t>(), py::arg("config"), py::arg("seed"))
      .def("reset", &Environment::reset, py::return_value_policy::copy)
      .def("step", [](Environment& env, int action) {
        const StepOutcome o = env.step(action);
        py::dict d;
        d["scheduled"] = o.scheduled;
        d["delivered"] = o.delivered;
        d["cost"] = o.cost;
        d["next_viol_counts"] = o.next_viol_counts;
        return d;
      }, py::arg("action"))
      .def_property_readonly("state", [](const Environment& e) { return e.state(); })
      .def("features", [](const Environment& e) { return encode_state(e.state(), e.config()); });

  m.def("weights", [](const std::string& scheme, int k_max, double beta, int k_o) {
    return weight_vector(parse_weight_scheme(scheme), k_max, beta, k_o).weights;
  }, py::arg("scheme"), py::arg("k_max"), py::arg("beta") = 2.0, py::arg("k_o") = 1);

  m.def("cavr_from_counts", [](const std::vector<std::vector<int>>& viol_counts, int k_max) {
    const CavrEstimate e = accumulate_cavr(viol_counts, k_max);
    py::dict d;
    d["psi"] = e.psi;
    d["window_counts"] = e.window_counts;
    d["horizon"] = e.horizon;
    return d;
  }, py::arg("viol_counts"), py::arg("k_max"),
        "Empirical C-AVR from per-slot violation counters, shape [T][M].");
  m.def("direct_avr", &direct_avr, py::arg("aoi_rx"), py::arg("zeta"));
  m.def("weighted_cavr", [](const std::vector<double>& psi, const std::vector<double>& w) {
    return weighted_cavr(psi, w);
  }, py::arg("psi"), py::arg("weights"));
  m.def("sigma_min", [](const std::vector<double>& psi, double eps_hat) {
    return sigma_min(psi, eps_hat);
  }, py::arg("psi"), py::arg("eps_hat") = 0.05);

  m.def("exact_cavr", [](const SystemConfig& c, const std::string& policy, int action,
                         std::size_t state_ceiling) {
    OraclePolicy p = policy == "always_transmit" ? OraclePolicy::always_transmit()
                     : policy == "idle"          ? OraclePolicy::idle(c.num_actions())
                     : policy == "random"        ? OraclePolicy::uniform_random(c.num_actions())
                     : policy == "fixed"         ? OraclePolicy::fixed(action, c.num_actions())
                                                 : throw ConfigError("policy", "unknown oracle policy " + policy);
    const ExactMetrics e = evaluate_exact({c, std::move(p), state_ceiling});
    py::dict d;
    d["psi"] = e.psi;
    d["avr"] = e.avr;
    d["cost"] = e.cost;
    return d;
  }, py::arg("config"), py::arg("policy") = "always_transmit", py::arg("action") = 1,
        py::arg("state_ceiling") = 100000);

  m.def("epsilon", &epsilon, py::arg("episode"), py::arg("eps_start") = 1.0,
        py::arg("eps_end") = 0.05, py::arg("decay_episodes") = 1000);
  m.def("lagrangian_reward", [](const std::vector<int>& next_viol_counts, int cost,
                                const std::vector<double>& w, double lambda, double eta_max) {
    return lagrangian_reward(next_viol_counts, cost, WeightVector::custom(w), lambda, eta_max);
  }, py::arg("next_viol_counts"), py::arg("cost"), py::arg("weights"), py::arg("lam"),
        py::arg("eta_max"));
  m.def("update_lambda", &update_lambda, py::arg("lam"), py::arg("xi"), py::arg("eta_hat"),
        py::arg("eta_max"));
  m.def("penalty_table", [](const std::vector<double>& w) {
    return penalty_table(WeightVector::custom(w)).h;
  }, py::arg("weights"));
  m.def("dpp_index", [](const SourceState& s, double p_succ, int zeta, int delta_max,
                        const std::vector<double>& w) {
    return dpp_index(s, p_succ, zeta, delta_max, static_cast<int>(w.size()),
                     penalty_table(WeightVector::custom(w)));
  }, py::arg("state"), py::arg("p_succ"), py::arg("zeta"), py::arg("delta_max"),
        py::arg("weights"));
  m.def("virtual_queue_update", &virtual_queue_update, py::arg("backlog"), py::arg("cost"),
        py::arg("eta_max"));

  m.def("config_keys", &ExperimentConfig::keys);
  m.def("config", [](const py::dict& overrides) { return config_dict(to_config(overrides)); },
        py::arg("overrides") = py::dict(),
        "Canonical configuration after applying overrides; raises ConfigError on bad keys.");
  m.def("config_hash", [](const py::dict& overrides) { return to_config(overrides).hash(); },
        py::arg("overrides") = py::dict());

  m.def("simulate", [](const py::dict& overrides, const std::string& policy, std::uint64_t seed,
                       std::int64_t horizon) {
    const ExperimentConfig c = to_config(overrides);
    const SystemConfig system = c.system_config(seed);
    const WeightVector w = c.weights();
    auto p = baseline(policy, system, w, c.v_dpp, seed);
    py::gil_scoped_release release;
    EvaluationResult r = evaluate(*p, system, w, seed, {horizon, c.eps_hat, c.series_stride, false});
    py::gil_scoped_acquire acquire;
    return evaluation_dict(r);
  }, py::arg("config"), py::arg("policy"), py::arg("seed") = 1, py::arg("horizon") = 100000);

  m.def("train", [](const py::dict& overrides, std::uint64_t seed, bool write_files) {
    const ExperimentConfig c = to_config(overrides);
    RunRecord r;
    {
      py::gil_scoped_release release;
      r = train(c, seed, {write_files, nullptr});
    }
    py::dict d;
    d["policy"] = to_string(r.policy);
    d["seed"] = r.seed;
    d["evaluation"] = evaluation_dict(r.evaluation);
    d["final_lambda"] = r.final_lambda;
    d["train_eta_hat"] = r.train_eta_hat;
    d["train_slots"] = r.train_slots;
    d["run_dir"] = write_files ? py::cast(r.run_dir) : py::none();
    d["checkpoint"] = r.checkpoint ? py::cast(*r.checkpoint) : py::none();
    py::list curve;
    for (const auto& e : r.learning_curve) {
      py::dict row;
      row["episode"] = e.episode;
      row["slot"] = e.slot;
      row["epsilon"] = e.epsilon;
      row["lambda"] = e.lambda;
      row["eta_hat"] = e.eta_hat;
      row["loss"] = e.loss ? py::cast(*e.loss) : py::none();
      row["episodic_reward"] = e.episodic_reward;
      curve.append(row);
    }
    d["learning_curve"] = curve;
    return d;
  }, py::arg("config"), py::arg("seed") = 1, py::arg("write_files") = true);

  m.def("sweep", [](const py::dict& overrides, const std::string& axis,
                    const std::vector<std::string>& values, const std::vector<std::string>& policies) {
    const ExperimentConfig c = to_config(overrides);
    std::vector<PolicyKind> kinds;
    for (const auto& p : policies) kinds.push_back(parse_policy(p));
    std::vector<SweepRow> rows;
    {
      py::gil_scoped_release release;
      rows = sweep(c, axis, values, kinds);
    }
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["axis"] = r.axis;
      d["value"] = r.value;
      d["policy"] = to_string(r.policy);
      d["seed"] = r.seed;
      d["k_max"] = r.k_max;
      d["psi"] = r.psi;
      d["weighted_cavr"] = r.weighted_cavr;
      d["sigma_min"] = r.sigma_min;
      d["eta_hat"] = r.eta_hat;
      out.append(d);
    }
    return out;
  }, py::arg("config"), py::arg("axis"), py::arg("values"),
        py::arg("policies") = std::vector<std::string>{"qr_d3qn", "d3qn"});
}
