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

// The abstract protocol model: a faithful executable rendering of the 2pc_tla
// module (variables rmState, children, intermediate_children, msgs, votes,
// acks, parent). The message pool is a monotone set: sending an
// already-present message changes nothing, and handling a message never
// removes it. Both the explicit-state checker and the abstract simulation
// mode run on this transition system; conformance replay judges recorded
// traces against it with mutations forced off.

#ifndef TREE2PC_ABSTRACT_MODEL_HPP_
#define TREE2PC_ABSTRACT_MODEL_HPP_

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tree2pc/core_types.hpp"

namespace tree2pc {

// Upper bound on abstract node count (checker configs use <= 4; bundled
// abstract scenarios stay well below this).
constexpr int kMaxNodes = 12;

using NodeMask = std::uint16_t;

enum class AbstractMsgKind : std::uint8_t {
  PrepareReq = 0,
  PrepareRespOk = 1,
  PrepareRespNo = 2,
  Commit = 3,
  Abort = 4,
  Ack = 5,
};
constexpr int kAbstractMsgKinds = 6;

constexpr int msg_index(AbstractMsgKind kind, int src, int dst) {
  return (static_cast<int>(kind) * kMaxNodes + src) * kMaxNodes + dst;
}

using MsgSet = std::bitset<kAbstractMsgKinds * kMaxNodes * kMaxNodes>;

// Vote cell values; kVoteAbsent never occurs (out-of-domain cells are kept at
// kVoteUnknown, which is indistinguishable from absent under every guard).
constexpr std::uint8_t kVoteUnknown = 0;
constexpr std::uint8_t kVoteOk = 1;
constexpr std::uint8_t kVoteNo = 2;

struct AbstractWorld {
  int n = 0;
  std::array<std::uint8_t, kMaxNodes> rm{};     // TxnState values
  std::array<std::int8_t, kMaxNodes> parent{};  // -1 = none
  std::array<NodeMask, kMaxNodes> children{};
  std::array<NodeMask, kMaxNodes> interm{};
  std::array<std::array<std::uint8_t, kMaxNodes>, kMaxNodes> votes{};
  std::array<NodeMask, kMaxNodes> acks{};  // bit set = acked
  MsgSet msgs;
  std::uint8_t adds_used = 0;

  bool operator==(const AbstractWorld&) const = default;

  TxnState state_of(int node) const { return static_cast<TxnState>(rm[node]); }
  NodeMask merged_children(int node) const {
    return static_cast<NodeMask>(children[node] | interm[node]);
  }
  bool all_votes_ok(int node) const;
  bool any_vote_no(int node) const;
  bool all_acked(int node) const;

  // Deterministic, lossless byte encoding (given the node count) used for
  // state dedup inside the checker. from_key reverses it.
  std::string to_key() const;
  static AbstractWorld from_key(int n, const std::string& key);
};

// Test-only seeded defect: commit is decided even in the presence of NO
// votes. Used to demonstrate that the checker and conformance replay catch
// a broken implementation; never enabled in shipped behavior.
enum class Mutation { None, CommitOnNo };

struct ModelConfig {
  std::vector<std::string> names;  // node names; index is the node id
  int root = 0;
  std::vector<std::vector<int>> init_children;
  // AddIntermediateParticipant exploration budget. The action itself is
  // unbounded in the protocol; this only bounds state-space enumeration.
  int max_dynamic_adds = 0;
  // When non-empty, AddIntermediateParticipant is only enumerated for these
  // (adder, new child) pairs; empty leaves the pair unconstrained.
  std::vector<std::pair<int, int>> designated_adds;
  Mutation mutation = Mutation::None;

  int index_of(const std::string& name) const;  // -1 if unknown
};

AbstractWorld init_world(const ModelConfig& config);

enum class ActionKind : std::uint8_t {
  RootStartToCommit,
  PrepareRequest,
  DuplicatePrepareRequest,
  OrphanPrepareRequest,
  PrepareResponse,
  CommitDecided,
  AbortDecided,
  CommitRequest,
  AbortRequest,
  OrphanCommitRequest,
  OrphanAbortRequest,
  InternalAbort,
  AckResponse,
  ForgetCtx,
  AddIntermediateParticipant,
};

const char* to_string(ActionKind k);
std::optional<ActionKind> action_kind_from_string(const std::string& name);

struct AbstractAction {
  ActionKind kind = ActionKind::RootStartToCommit;
  int node = -1;
  // Message source for message-triggered actions; new child for
  // AddIntermediateParticipant; -1 otherwise.
  int other = -1;
  // Vote carried by a PrepareResponse (kVoteOk / kVoteNo); 0 otherwise.
  std::uint8_t aux = 0;

  std::string describe(const ModelConfig& config) const;
  bool operator==(const AbstractAction&) const = default;
};

// All actions enabled in `world` under the Appendix-level transition rules.
// Actions whose successor equals `world` (duplicate sends into the monotone
// message set) are still reported; callers that only care about progress can
// filter with `apply(...) != world`.
std::vector<AbstractAction> enabled_actions(const AbstractWorld& world,
                                            const ModelConfig& config);

// Applies an enabled action. Behavior is undefined (assert) if disabled.
AbstractWorld apply(const AbstractWorld& world, const ModelConfig& config,
                    const AbstractAction& action);

bool consistency_holds(const AbstractWorld& world);

// Per-edge decision stability: COMMIT can only move to TOMBSTONE, ABORT can
// only move to TOMBSTONE, TOMBSTONE is terminal.
bool decision_stable(const AbstractWorld& before, const AbstractWorld& after);

bool all_tombstone(const AbstractWorld& world);

// Canonical single-line rendering (node names resolved through config).
std::string encode_abstract_world(const AbstractWorld& world,
                                  const ModelConfig& config);

}  // namespace tree2pc

#endif  // TREE2PC_ABSTRACT_MODEL_HPP_
