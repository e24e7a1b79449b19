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

// Explicit-state model checker for the abstract protocol. Explores the full
// reachable state graph by breadth-first search, checking:
//   - consistency: no reachable state has one node in COMMIT while another
//     is in ABORT (checked instantaneously, per state);
//   - decision stability: per transition, COMMIT/ABORT only advance to
//     TOMBSTONE, TOMBSTONE is terminal;
//   - liveness under fairness: every reachable state can reach a quiescent
//     state (fair schedulers cannot be trapped in a livelock region), and
//   - terminal agreement: every quiescent state has all nodes in TOMBSTONE.
// Violations come with a counterexample path from the initial state.

#ifndef TREE2PC_MODEL_CHECKER_HPP_
#define TREE2PC_MODEL_CHECKER_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "tree2pc/abstract_model.hpp"

namespace tree2pc {

namespace property {
inline constexpr const char* kConsistency = "consistency";
inline constexpr const char* kDecisionStability = "decision-stability";
inline constexpr const char* kLiveness = "liveness";
inline constexpr const char* kTerminalAgreement = "terminal-agreement";
}  // namespace property

struct ExplorationBudget {
  std::size_t max_states = 1'000'000;
  // Maximum number of actions from the initial state; negative = unbounded.
  int max_depth = -1;
};

struct CounterexampleStep {
  std::string action;
  std::string post_world;
};

struct Counterexample {
  std::string property;
  std::string detail;
  std::string initial_world;
  std::vector<CounterexampleStep> steps;
  std::string to_text() const;
};

struct CheckResult {
  // True iff exploration completed within budget and no property failed.
  bool ok = false;
  bool complete = false;
  std::size_t states_explored = 0;
  std::size_t transitions = 0;
  std::size_t quiescent_states = 0;
  int max_depth_seen = 0;
  bool root_commit_reachable = false;
  bool root_abort_reachable = false;
  std::vector<Counterexample> violations;

  std::string to_report(const std::string& config_name) const;
};

CheckResult check_model(const ModelConfig& config,
                        const ExplorationBudget& budget);

// The configuration suite the `check` command and the acceptance gate run:
// every tree shape over 1..4 nodes (up to isomorphism), each at dynamic-add
// budgets 0 and 1. Names look like "star4+adds1".
struct NamedModelConfig {
  std::string name;
  ModelConfig config;
};
std::vector<NamedModelConfig> bundled_model_configs();

// ---------------------------------------------------------------------------
// Conformance replay: re-judges a recorded abstract-mode trace against the
// unmutated transition rules. Each step must name an action that is enabled
// in the current world and whose successor matches the recorded post-state
// encoding. Mutations and exploration budgets never apply here.

struct AbstractTraceStep {
  AbstractAction action;
  std::string post_world;
};

struct AbstractTrace {
  ModelConfig config;
  std::vector<AbstractTraceStep> steps;

  std::string to_text() const;
  // Throws ParseError on malformed input.
  static AbstractTrace from_text(const std::string& text);
};

struct ReplayResult {
  bool ok = false;
  std::size_t failed_step = 0;  // 0-based; valid when !ok
  std::string message;
};

ReplayResult conformance_replay(const AbstractTrace& trace);

}  // namespace tree2pc

#endif  // TREE2PC_MODEL_CHECKER_HPP_
