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

#ifndef TREE2PC_SCENARIO_HPP_
#define TREE2PC_SCENARIO_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tree2pc/core_types.hpp"

namespace tree2pc {

// A log stream and the partitions it hosts at time zero.
struct StreamDecl {
  LogStreamId id;
  std::vector<PartitionId> partitions;
};

// A transaction: its coordinator stream, the participant edges recorded
// during the (not simulated) execution phase, and the partitions each
// stream-side context covers. Contexts for the root and for every edge or
// touch endpoint exist from time zero in RUNNING state.
struct TxnDecl {
  TxnId id;
  LogStreamId root;
  std::vector<std::pair<LogStreamId, LogStreamId>> edges;  // parent -> child
  std::vector<std::pair<LogStreamId, std::vector<PartitionId>>> touches;
};

// One timed entry of the scenario schedule.
struct ScheduleItem {
  enum class Kind {
    UserCommit,     // the user (re)sends the commit request for a txn
    InternalAbort,  // a RUNNING context aborts locally
    LocalNo,        // a context's own_status flips to NO
    Transfer,       // partition moves src -> dst
    Crash,          // stream loses volatile state
    Recover,        // stream rebuilds from its persisted log
    Reclaim,        // context and its log entries are reclaimed
    DuplicateMsg,   // the n-th delivered message is delivered once more
  };

  Kind kind = Kind::UserCommit;
  Tick at = 0;
  TxnId txn;             // UserCommit, InternalAbort, LocalNo, Reclaim
  LogStreamId stream;    // InternalAbort, LocalNo, Crash, Recover, Reclaim;
                         // Transfer source
  PartitionId partition; // Transfer
  LogStreamId dst;       // Transfer destination
  std::uint64_t ordinal = 0;  // DuplicateMsg: 1-based delivery index
};

// Pinned expectations. A run matches when every listed outcome and violation
// is observed, the optional trace hash matches, the optional counters match,
// and (with no_violations) nothing was flagged at all.
struct Expectation {
  std::map<TxnId, UserOutcome> outcomes;
  std::vector<std::string> violations;
  bool no_violations = false;
  std::optional<std::string> trace_hash;
  std::map<std::string, std::int64_t> counters;

  bool empty() const {
    return outcomes.empty() && violations.empty() && !no_violations &&
           !trace_hash && counters.empty();
  }
};

// A complete, reproducible experiment: topology, transactions, schedule,
// faults, simulator configuration, and optional expected results. The text
// form is line oriented and round-trips through parse/format.
struct Scenario {
  std::string name;
  SimConfig config;
  std::vector<StreamDecl> streams;
  std::vector<TxnDecl> txns;
  std::vector<ScheduleItem> schedule;
  std::set<TxnId> drop_user_response;  // drop the first response to the user
  Expectation expect;

  // Returns an empty string when all references resolve, otherwise a
  // description of the first dangling reference or unsupported combination.
  std::string validate() const;

  std::string format() const;
  static Scenario parse_text(const std::string& text);  // throws ParseError
  static Scenario load_file(const std::string& path);   // throws ParseError

  const StreamDecl* find_stream(const LogStreamId& id) const;
  const TxnDecl* find_txn(const TxnId& id) const;
};

// Scenarios compiled into the library; the same files ship under scenarios/.
const std::vector<Scenario>& bundled_scenarios();
const Scenario* find_bundled_scenario(const std::string& name);

// Caterpillar tree with `height` levels below the root and `fanout` children
// per internal node: the root and each spine node have exactly `fanout`
// children, one of which continues the spine, giving height*fanout edges.
// One transaction commits at time zero with one partition per stream.
Scenario make_uniform_tree(int height, int fanout, const ProtocolVariant& v);

// Root plus `fanout` leaf children.
Scenario make_flat_tree(int fanout, const ProtocolVariant& v);

// One root stream hosting `partitions` partitions, all touched by one txn.
// Under Granularity::Partition each partition becomes its own participant.
Scenario make_single_stream(int partitions, Granularity granularity);

}  // namespace tree2pc

#endif  // TREE2PC_SCENARIO_HPP_
