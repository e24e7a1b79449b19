/*
 * Copyright (c) 2026, the tree2pc authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Python bindings mirroring the command-line surface: run a scenario,
// explore a model configuration, replay a recorded trace, and produce the
// cost-sweep CSV. Results cross the boundary as plain dicts/strings so the
// Python side needs no wrapper classes.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "tree2pc/cost_metrics.hpp"
#include "tree2pc/model_checker.hpp"
#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"

namespace py = pybind11;

namespace {

tree2pc::Scenario resolve_scenario(const std::string& ref) {
  for (const auto& sc : tree2pc::bundled_scenarios()) {
    if (sc.name == ref) return sc;
  }
  if (ref.find('\n') != std::string::npos) {
    return tree2pc::Scenario::parse_text(ref);
  }
  throw py::value_error("unknown scenario '" + ref +
                        "': not a bundled name and not scenario text");
}

py::dict run_scenario_py(const std::string& ref,
                         std::optional<std::uint64_t> seed,
                         std::optional<std::string> variant,
                         std::optional<std::uint64_t> budget) {
  tree2pc::Scenario sc = resolve_scenario(ref);
  if (seed) sc.config.seed = *seed;
  if (budget) sc.config.max_events = *budget;
  if (variant) {
    sc.config.variant = tree2pc::ProtocolVariant::parse(*variant);
    sc.expect.trace_hash.reset();  // overrides invalidate pinned hashes
  }
  if (seed && *seed != 0) sc.expect.trace_hash.reset();

  tree2pc::Simulator sim(sc);
  tree2pc::RunResult r = sim.run_to_quiescence();

  py::dict out;
  out["name"] = sc.name;
  out["ok"] = r.ok;
  out["quiesced"] = r.quiesced;
  out["end_time"] = r.end_time;
  out["events"] = r.events_processed;
  out["msgs_total"] = r.msgs_total;
  out["prepare_msgs"] = r.prepare_msgs;
  out["sync_logs"] = r.sync_logs;
  out["async_logs"] = r.async_logs;
  out["trace_hash"] = r.trace_hash;
  py::dict outcomes;
  for (const auto& [txn, report] : r.txns) {
    outcomes[py::str(txn)] =
        report.final_outcome
            ? py::object(py::str(tree2pc::to_string(*report.final_outcome)))
            : py::object(py::none());
  }
  out["outcomes"] = outcomes;
  py::list violations;
  for (const auto& v : r.violations) {
    py::dict d;
    d["kind"] = v.kind;
    d["at"] = v.at;
    d["detail"] = v.detail;
    violations.append(d);
  }
  out["violations"] = violations;
  out["unmet_expectations"] = r.unmet_expectations;
  out["flags"] = r.flags;
  out["trace"] = r.trace;
  out["abstract_trace"] =
      r.abstract_trace ? py::object(py::str(r.abstract_trace->to_text()))
                       : py::object(py::none());

  tree2pc::CostSummary cost = tree2pc::summarize(sc, r);
  py::dict costs;
  costs["response_roundtrips"] = cost.counters.response_roundtrips;
  costs["response_log_syncs"] = cost.counters.response_log_syncs;
  costs["lock_release_roundtrips"] = cost.counters.lock_release_roundtrips;
  costs["lock_release_log_syncs"] = cost.counters.lock_release_log_syncs;
  costs["response_latency"] = cost.counters.response_latency;
  costs["participant_sync_logs"] = cost.counters.participant_sync_logs;
  costs["csv"] = tree2pc::cost_csv_row(sc, cost);
  out["costs"] = costs;
  return out;
}

py::list check_py(const std::string& config_filter, std::size_t budget,
                  const std::string& mutate) {
  tree2pc::Mutation mutation = tree2pc::Mutation::None;
  if (mutate == "commit-on-no") {
    mutation = tree2pc::Mutation::CommitOnNo;
  } else if (!mutate.empty()) {
    throw py::value_error("unknown mutation '" + mutate + "'");
  }
  py::list out;
  for (const auto& named : tree2pc::bundled_model_configs()) {
    if (!config_filter.empty() &&
        named.name.find(config_filter) == std::string::npos) {
      continue;
    }
    tree2pc::ModelConfig config = named.config;
    config.mutation = mutation;
    tree2pc::ExplorationBudget eb;
    eb.max_states = budget;
    tree2pc::CheckResult r = tree2pc::check_model(config, eb);
    py::dict d;
    d["name"] = named.name;
    d["ok"] = r.ok;
    d["complete"] = r.complete;
    d["states"] = r.states_explored;
    d["transitions"] = r.transitions;
    d["quiescent_states"] = r.quiescent_states;
    d["max_depth"] = r.max_depth_seen;
    py::list violations;
    for (const auto& v : r.violations) {
      py::dict vd;
      vd["property"] = v.property;
      vd["detail"] = v.detail;
      vd["counterexample"] = v.to_text();
      violations.append(vd);
    }
    d["violations"] = violations;
    out.append(d);
  }
  return out;
}

py::dict replay_py(const std::string& trace_text) {
  tree2pc::AbstractTrace trace =
      tree2pc::AbstractTrace::from_text(trace_text);
  tree2pc::ReplayResult r = tree2pc::conformance_replay(trace);
  py::dict out;
  out["ok"] = r.ok;
  out["failed_step"] = r.failed_step;
  out["message"] = r.message;
  return out;
}

std::string bench_csv_py(const std::vector<int>& heights,
                         const std::vector<int>& fanouts,
                         const std::vector<int>& partitions, bool release) {
  std::string csv = tree2pc::cost_csv_header() + "\n";
  for (const auto& p : tree2pc::sweep_uniform(heights, fanouts, release)) {
    csv += p.csv_row + "\n";
  }
  for (const auto& p : tree2pc::sweep_granularity(partitions)) {
    csv += p.csv_row + "\n";
  }
  return csv;
}

std::vector<std::string> scenario_names_py() {
  std::vector<std::string> names;
  for (const auto& sc : tree2pc::bundled_scenarios()) names.push_back(sc.name);
  return names;
}

std::string scenario_text_py(const std::string& name) {
  for (const auto& sc : tree2pc::bundled_scenarios()) {
    if (sc.name == name) return sc.format();
  }
  throw py::value_error("unknown scenario '" + name + "'");
}

std::vector<std::string> model_config_names_py() {
  std::vector<std::string> names;
  for (const auto& c : tree2pc::bundled_model_configs()) {
    names.push_back(c.name);
  }
  return names;
}

}  // namespace

PYBIND11_MODULE(_tree2pc, m) {
  m.doc() = "tree-structured two-phase commit simulator and checker";

  m.def("run", &run_scenario_py, py::arg("scenario"),
        py::arg("seed") = py::none(), py::arg("variant") = py::none(),
        py::arg("budget") = py::none(),
        "Run a bundled scenario (by name) or scenario text; returns a dict "
        "of outcomes, counters, violations, and the event trace.");
  m.def("check", &check_py, py::arg("config") = "",
        py::arg("budget") = std::size_t{1'000'000}, py::arg("mutate") = "",
        "Exhaustively explore bundled model configurations (optionally "
        "filtered by substring); returns one report dict per configuration.");
  m.def("replay", &replay_py, py::arg("trace"),
        "Conformance-replay a recorded abstract trace (text form).");
  m.def("bench_csv", &bench_csv_py,
        py::arg("heights") = std::vector<int>{1, 2, 3},
        py::arg("fanouts") = std::vector<int>{1, 2, 4, 8},
        py::arg("partitions") = std::vector<int>{100},
        py::arg("release") = true,
        "Cost sweep over uniform trees and participant granularity; returns "
        "the CSV text.");
  m.def("scenario_names", &scenario_names_py,
        "Names of the bundled scenarios.");
  m.def("scenario_text", &scenario_text_py, py::arg("name"),
        "Canonical text of a bundled scenario.");
  m.def("model_config_names", &model_config_names_py,
        "Names of the bundled model-checker configurations.");

  py::register_exception<tree2pc::ParseError>(m, "ScenarioParseError");
  py::register_exception<tree2pc::ValidationError>(m,
                                                   "ScenarioValidationError");
}
