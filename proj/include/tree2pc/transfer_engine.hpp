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

// Post-run transfer validation. RunHistory is the durable residue of a run:
// every log entry ever persisted, every completed transfer, and the declared
// inputs. The checks below re-derive what the transfer rules promise from
// that residue alone, independently of the engine's own bookkeeping, so a
// broken engine cannot vouch for itself.

#ifndef TREE2PC_TRANSFER_ENGINE_HPP_
#define TREE2PC_TRANSFER_ENGINE_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tree2pc/core_types.hpp"

namespace tree2pc {

// One completed (or attempted) partition transfer.
struct TransferRecord {
  std::uint64_t id = 0;
  PartitionId partition;
  LogStreamId src;
  LogStreamId dst;
  // Logical timestamp of the transfer-out log; 0 until that log persists.
  Tick ts = 0;
  // Logical timestamp of the transfer-in log — the moment the partition's
  // placement actually flips; 0 until then.
  Tick applied_ts = 0;
  // Transactions whose context was blocked, collected and migrated.
  std::vector<TxnId> affected;
  // Subset of `affected` that was swept in only because the source context
  // had overflowed its recorded-partition cap.
  std::vector<TxnId> overflow_affected;
  bool completed = false;
};

// Everything a run leaves behind that outlives contexts and crashes.
struct RunHistory {
  // All persisted log entries across all streams, in logical-ts order.
  // Reclaimed entries stay, flagged, so dead transactions remain auditable.
  std::vector<LogEntry> entries;
  std::vector<TransferRecord> transfers;
  // Declared data footprint: which partitions each txn wrote.
  std::map<TxnId, std::set<PartitionId>> touched;
  std::map<TxnId, LogStreamId> txn_root;
  std::map<PartitionId, LogStreamId> initial_home;
  // Logical ts of the root's terminal (commit/abort) log; absent if the
  // root never persisted one.
  std::map<TxnId, Tick> completion;
  // When a (txn, stream) context's space was reclaimed, by logical ts.
  std::map<TxnId, std::map<LogStreamId, Tick>> reclaimed_at;
};

// A node of the participant tree recovered purely from persisted 2PC logs.
struct TreeNode {
  std::optional<LogStreamId> parent;
  std::vector<LogStreamId> recorded;  // participants field of the entry
  std::vector<LogStreamId> incr;      // transfer-added participants
  LogEntryKind from = LogEntryKind::PrepareLog;  // entry the node came from
};

// Rebuilds a txn's participant tree from each stream's latest 2PC entry at
// or before the txn's completion point (all entries if it never completed).
std::map<LogStreamId, TreeNode> build_log_stream_tree(const RunHistory& h,
                                                      const TxnId& txn);

// For every committed txn: each touched partition's host at completion time
// must be recoverable from the tree — the partition's first cover must be a
// tree node and every later hop must be documented by a durable transfer
// chain starting there. Returns one description per violation; empty means
// the property holds.
std::vector<std::string> check_minimum_set(const RunHistory& h);

// The recording obligation every transfer imposes per affected txn: any 2PC
// entry on the source stream whose logical ts is newer than the transfer's
// must name the destination in its recorded participant set. (Older entries
// may legitimately name it too — a declared child, or an earlier transfer to
// the same stream.) Also re-derives the affected set (declared touches plus
// the partition's migration chain, cut at reclamation) and demands the
// out-records cover it; extras are only excused by cap overflow.
std::vector<std::string> check_transfer_principle(const RunHistory& h);

}  // namespace tree2pc

#endif  // TREE2PC_TRANSFER_ENGINE_HPP_
