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

#include "tree2pc/model_checker.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "tree2pc/core_types.hpp"

namespace tree2pc {

namespace {

constexpr std::uint32_t kNoPred = 0xffffffffu;

struct Explorer {
  const ModelConfig& config;
  const ExplorationBudget& budget;

  std::unordered_map<std::string, std::uint32_t> ids;
  std::vector<const std::string*> keys;
  std::vector<std::uint32_t> depth;
  std::vector<std::uint32_t> pred_state;
  std::vector<AbstractAction> pred_action;
  std::vector<std::uint8_t> quiescent;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  CheckResult result;
  bool budget_hit = false;
  bool depth_capped = false;

  explicit Explorer(const ModelConfig& cfg, const ExplorationBudget& b)
      : config(cfg), budget(b) {}

  AbstractWorld world_of(std::uint32_t id) const {
    return AbstractWorld::from_key(static_cast<int>(config.names.size()),
                                   *keys[id]);
  }

  // Returns the id, creating the state if new; kNoPred when the state budget
  // is exhausted.
  std::uint32_t intern(const AbstractWorld& w, std::uint32_t from,
                       const AbstractAction& via, std::uint32_t d) {
    auto [it, inserted] = ids.emplace(w.to_key(), 0);
    if (!inserted) return it->second;
    if (keys.size() >= budget.max_states) {
      ids.erase(it);
      budget_hit = true;
      return kNoPred;
    }
    const auto id = static_cast<std::uint32_t>(keys.size());
    it->second = id;
    keys.push_back(&it->first);
    depth.push_back(d);
    pred_state.push_back(from);
    pred_action.push_back(via);
    quiescent.push_back(0);
    result.max_depth_seen =
        std::max(result.max_depth_seen, static_cast<int>(d));
    const TxnState root_state = w.state_of(config.root);
    if (root_state == TxnState::Commit) result.root_commit_reachable = true;
    if (root_state == TxnState::Abort) result.root_abort_reachable = true;
    if (!consistency_holds(w)) {
      add_violation(property::kConsistency,
                    "a state with one node in COMMIT and another in ABORT is "
                    "reachable",
                    id);
    }
    return id;
  }

  std::vector<CounterexampleStep> path_to(std::uint32_t id) const {
    std::vector<CounterexampleStep> steps;
    for (std::uint32_t at = id; pred_state[at] != kNoPred;
         at = pred_state[at]) {
      steps.push_back({pred_action[at].describe(config),
                       encode_abstract_world(world_of(at), config)});
    }
    std::reverse(steps.begin(), steps.end());
    return steps;
  }

  bool have_violation(const char* prop) const {
    for (const auto& v : result.violations) {
      if (v.property == prop) return true;
    }
    return false;
  }

  void add_violation(const char* prop, std::string detail, std::uint32_t id,
                     std::vector<CounterexampleStep> extra = {}) {
    if (have_violation(prop)) return;
    Counterexample ce;
    ce.property = prop;
    ce.detail = std::move(detail);
    ce.initial_world = encode_abstract_world(world_of(0), config);
    ce.steps = path_to(id);
    for (auto& s : extra) ce.steps.push_back(std::move(s));
    result.violations.push_back(std::move(ce));
  }

  void run() {
    AbstractWorld init = init_world(config);
    intern(init, kNoPred, AbstractAction{}, 0);

    for (std::uint32_t at = 0; at < keys.size() && !budget_hit; ++at) {
      if (budget.max_depth >= 0 &&
          depth[at] >= static_cast<std::uint32_t>(budget.max_depth)) {
        depth_capped = true;
        continue;
      }
      const AbstractWorld w = world_of(at);
      bool distinct_successor = false;
      for (const AbstractAction& action : enabled_actions(w, config)) {
        // Exploration scoping for dynamic adds (the action itself stays
        // faithful for replay):
        //  - the root has no child-role handlers in the abstract rules, so
        //    wiring it as someone's new child wedges acknowledgment forever
        //    (the concrete engine, where the coordinator also plays the
        //    participant role, covers that case);
        //  - adds while the adder is already decided are inert: the
        //    intermediate set is never merged again, so no behavior beyond
        //    a dead bookkeeping entry is reachable from them.
        if (action.kind == ActionKind::AddIntermediateParticipant) {
          if (action.other == config.root) continue;
          const TxnState adder = w.state_of(action.node);
          if (adder != TxnState::Running && adder != TxnState::Prepare) {
            continue;
          }
        }
        const AbstractWorld succ = apply(w, config, action);
        if (succ == w) continue;  // duplicate send: stuttering self-loop
        distinct_successor = true;
        if (!decision_stable(w, succ)) {
          add_violation(
              property::kDecisionStability,
              "action " + action.describe(config) +
                  " rolls a decided node back out of COMMIT/ABORT/TOMBSTONE",
              at,
              {{action.describe(config),
                encode_abstract_world(succ, config)}});
        }
        const std::uint32_t succ_id =
            intern(succ, at, action, depth[at] + 1);
        if (succ_id == kNoPred) break;
        edges.emplace_back(at, succ_id);
      }
      quiescent[at] = distinct_successor ? 0 : 1;
    }

    result.states_explored = keys.size();
    result.transitions = edges.size();
    result.complete = !budget_hit && !depth_capped;

    if (result.complete) {
      analyze_quiescence();
    }
    result.ok = result.complete && result.violations.empty();
  }

  void analyze_quiescence() {
    // Terminal agreement: every quiescent state is fully forgotten.
    std::deque<std::uint32_t> frontier;
    std::vector<std::uint8_t> reaches_quiescent(keys.size(), 0);
    for (std::uint32_t id = 0; id < keys.size(); ++id) {
      if (!quiescent[id]) continue;
      ++result.quiescent_states;
      reaches_quiescent[id] = 1;
      frontier.push_back(id);
      if (!all_tombstone(world_of(id))) {
        add_violation(property::kTerminalAgreement,
                      "a quiescent state leaves some node outside TOMBSTONE",
                      id);
      }
    }

    // Liveness under fairness: walk the transition graph backwards from the
    // quiescent states; every reachable state must be covered, otherwise a
    // livelock region exists that no fair scheduler can escape.
    std::vector<std::vector<std::uint32_t>> reverse_adj(keys.size());
    for (const auto& [src, dst] : edges) reverse_adj[dst].push_back(src);
    while (!frontier.empty()) {
      const std::uint32_t at = frontier.front();
      frontier.pop_front();
      for (std::uint32_t p : reverse_adj[at]) {
        if (!reaches_quiescent[p]) {
          reaches_quiescent[p] = 1;
          frontier.push_back(p);
        }
      }
    }
    for (std::uint32_t id = 0; id < keys.size(); ++id) {
      if (!reaches_quiescent[id]) {
        add_violation(property::kLiveness,
                      "no quiescent state is reachable from this state "
                      "(livelock region)",
                      id);
        break;
      }
    }
  }
};

}  // namespace

std::string Counterexample::to_text() const {
  std::ostringstream out;
  out << "violation property=" << property << '\n';
  out << "  detail: " << detail << '\n';
  out << "  init: " << initial_world << '\n';
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << "  " << (i + 1) << ". " << steps[i].action << '\n';
    out << "     -> " << steps[i].post_world << '\n';
  }
  return out.str();
}

std::string CheckResult::to_report(const std::string& config_name) const {
  std::ostringstream out;
  out << "config=" << config_name << " ok=" << (ok ? "yes" : "no")
      << " complete=" << (complete ? "yes" : "no")
      << " states=" << states_explored << " transitions=" << transitions
      << " quiescent=" << quiescent_states << " depth=" << max_depth_seen
      << " outcomes=";
  std::string outcomes;
  if (root_commit_reachable) outcomes += "commit";
  if (root_abort_reachable) outcomes += outcomes.empty() ? "abort" : "+abort";
  out << (outcomes.empty() ? "none" : outcomes)
      << " violations=" << violations.size() << '\n';
  for (const auto& v : violations) {
    out << "  " << v.property << ": " << v.detail << '\n';
  }
  return out.str();
}

CheckResult check_model(const ModelConfig& config,
                        const ExplorationBudget& budget) {
  Explorer explorer(config, budget);
  explorer.run();
  return std::move(explorer.result);
}

std::vector<NamedModelConfig> bundled_model_configs() {
  struct Shape {
    const char* name;
    int n;
    // children lists per node index; node 0 is the root "r".
    std::vector<std::vector<int>> children;
    // Designated (adder, new child) pairs for the adds1 variant. The 3-node
    // shapes explore every pair; the 4-node shapes pin one representative
    // pair each so that full exploration stays inside the state budget. The
    // pinned pairs still cover the interesting topologies: a shared child
    // reached from two branches (DAG) and a back edge (cycle).
    std::vector<std::pair<int, int>> adds;
  };
  // Every rooted tree on 1..4 nodes, up to isomorphism.
  const std::vector<Shape> shapes = {
      {"single", 1, {{}}, {}},
      {"pair", 2, {{1}, {}}, {}},
      {"chain3", 3, {{1}, {2}, {}}, {}},
      {"star3", 3, {{1, 2}, {}, {}}, {}},
      {"star4", 4, {{1, 2, 3}, {}, {}, {}}, {{1, 2}}},   // a adds b (DAG)
      {"path4", 4, {{1}, {2}, {3}, {}}, {{3, 1}}},       // c adds a (cycle)
      {"broom4", 4, {{1}, {2, 3}, {}, {}}, {{2, 3}}},    // b adds c (DAG)
      {"fork4", 4, {{1, 2}, {3}, {}, {}}, {{2, 3}}},     // b adds c (DAG)
  };
  const std::vector<std::string> all_names = {"r", "a", "b", "c"};

  std::vector<NamedModelConfig> out;
  for (const Shape& shape : shapes) {
    for (int adds = 0; adds <= 1; ++adds) {
      NamedModelConfig named;
      named.name = std::string(shape.name) + "+adds" + std::to_string(adds);
      named.config.names.assign(all_names.begin(),
                                all_names.begin() + shape.n);
      named.config.root = 0;
      named.config.init_children = shape.children;
      named.config.max_dynamic_adds = adds;
      if (adds > 0) named.config.designated_adds = shape.adds;
      out.push_back(std::move(named));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace serialization and conformance replay.

namespace {

std::string mask_text(const std::vector<int>& ids,
                      const std::vector<std::string>& names) {
  std::string out;
  for (int id : ids) {
    if (!out.empty()) out += '+';
    out += names[id];
  }
  return out.empty() ? std::string("-") : out;
}

}  // namespace

std::string AbstractTrace::to_text() const {
  std::ostringstream out;
  out << "tree2pc-abstract-trace v1\n";
  out << "nodes " << join_ids(config.names) << '\n';
  out << "root " << config.names.at(config.root) << '\n';
  for (std::size_t i = 0; i < config.names.size(); ++i) {
    out << "children " << config.names[i] << '='
        << mask_text(config.init_children[i], config.names) << '\n';
  }
  for (const AbstractTraceStep& step : steps) {
    out << "step action=" << to_string(step.action.kind)
        << " node=" << config.names.at(step.action.node) << " other="
        << (step.action.other < 0 ? std::string("-")
                                  : config.names.at(step.action.other))
        << " vote="
        << (step.action.kind == ActionKind::PrepareResponse
                ? (step.action.aux == kVoteNo ? "no" : "ok")
                : std::string("-"))
        << " post=" << step.post_world << '\n';
  }
  out << "end\n";
  return out.str();
}

AbstractTrace AbstractTrace::from_text(const std::string& text) {
  AbstractTrace trace;
  std::istringstream in(text);
  std::string line;
  auto fail = [](const std::string& why) -> void {
    throw ParseError("abstract trace: " + why);
  };

  if (!std::getline(in, line) || line != "tree2pc-abstract-trace v1") {
    fail("missing or unsupported header");
  }
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "nodes") {
      std::string rest;
      ls >> rest;
      trace.config.names = split_ids(rest);
      trace.config.init_children.resize(trace.config.names.size());
    } else if (word == "root") {
      std::string name;
      ls >> name;
      trace.config.root = trace.config.index_of(name);
      if (trace.config.root < 0) fail("unknown root node " + name);
    } else if (word == "children") {
      std::string assign;
      ls >> assign;
      const auto eq = assign.find('=');
      if (eq == std::string::npos) fail("malformed children line");
      const int node = trace.config.index_of(assign.substr(0, eq));
      if (node < 0) fail("unknown node in children line");
      const std::string value = assign.substr(eq + 1);
      trace.config.init_children[node].clear();
      if (value != "-") {
        for (const std::string& child_name : split_ids(value, '+')) {
          const int child = trace.config.index_of(child_name);
          if (child < 0) fail("unknown child node " + child_name);
          trace.config.init_children[node].push_back(child);
        }
      }
    } else if (word == "step") {
      AbstractTraceStep step;
      std::string token;
      bool have_post = false;
      while (ls >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) fail("malformed step token " + token);
        const std::string field = token.substr(0, eq);
        std::string value = token.substr(eq + 1);
        if (field == "action") {
          auto kind = action_kind_from_string(value);
          if (!kind) fail("unknown action " + value);
          step.action.kind = *kind;
        } else if (field == "node") {
          step.action.node = trace.config.index_of(value);
          if (step.action.node < 0) fail("unknown node " + value);
        } else if (field == "other") {
          if (value == "-") {
            step.action.other = -1;
          } else {
            step.action.other = trace.config.index_of(value);
            if (step.action.other < 0) fail("unknown node " + value);
          }
        } else if (field == "vote") {
          step.action.aux = value == "no"    ? kVoteNo
                            : value == "ok"  ? kVoteOk
                                             : kVoteUnknown;
        } else if (field == "post") {
          // post= swallows the rest of the line (the encoding has spaces).
          std::string rest;
          std::getline(ls, rest);
          step.post_world = value + rest;
          have_post = true;
          break;
        } else {
          fail("unknown step field " + field);
        }
      }
      if (!have_post) fail("step without post=");
      trace.steps.push_back(std::move(step));
    } else if (word == "end") {
      saw_end = true;
      break;
    } else {
      fail("unknown directive " + word);
    }
  }
  if (trace.config.names.empty()) fail("missing nodes line");
  if (!saw_end) fail("missing end marker (truncated trace?)");
  return trace;
}

ReplayResult conformance_replay(const AbstractTrace& trace) {
  // Judge against the pristine rules: no mutation, and no exploration budget
  // on dynamic adds (the budget bounds enumeration, not legality).
  ModelConfig judge = trace.config;
  judge.mutation = Mutation::None;
  judge.max_dynamic_adds = 200;

  AbstractWorld world = init_world(judge);
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const AbstractTraceStep& step = trace.steps[i];
    bool enabled = false;
    for (const AbstractAction& action : enabled_actions(world, judge)) {
      if (action == step.action) {
        enabled = true;
        break;
      }
    }
    if (!enabled) {
      return {false, i,
              "step " + std::to_string(i + 1) + ": action " +
                  step.action.describe(judge) +
                  " is not enabled by the protocol rules"};
    }
    const AbstractWorld succ = apply(world, judge, step.action);
    const std::string got = encode_abstract_world(succ, judge);
    if (got != step.post_world) {
      return {false, i,
              "step " + std::to_string(i + 1) +
                  ": post-state mismatch\n  expected: " + step.post_world +
                  "\n  actual:   " + got};
    }
    world = succ;
  }
  return {true, 0, "trace conforms (" + std::to_string(trace.steps.size()) +
                       " steps)"};
}

}  // namespace tree2pc
