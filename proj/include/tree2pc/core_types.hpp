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

#ifndef TREE2PC_CORE_TYPES_HPP_
#define TREE2PC_CORE_TYPES_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tree2pc {

// Identifiers. Log streams are the unit of participation; partitions are the
// unit of data placement and can move between streams while transactions are
// in flight. Plain strings keep traces and scenario files readable.
using LogStreamId = std::string;
using TxnId = std::string;
using PartitionId = std::string;

// One simulated tick is one millisecond of virtual time.
using Tick = std::int64_t;
constexpr Tick kTicksPerSecond = 1000;
constexpr Tick kTicksPerMinute = 60 * kTicksPerSecond;

// Participant state machine states. TOMBSTONE is terminal: the context is
// done and only awaits reclamation.
enum class TxnState { Running, Prepare, Commit, Abort, Tombstone };

// Vote bookkeeping for a child participant. PrepareUnknown is the honest
// "I no longer know" answer a participant gives once its context and logs
// are gone (unknown-states variant).
enum class VoteStatus { Unknown, Ok, No, PrepareUnknown };

// What the user (scheduler) is told about the transaction.
enum class UserOutcome { Committed, Aborted, TransUnknown };

// Whether the root context answering the user is the original one or was
// rebuilt after its predecessor was reclaimed / its response lost.
enum class Provenance { Fresh, Recreated };

enum class SimMode { Abstract, Logged };

// Participant granularity: one participant per log stream (the design under
// test) or one per partition (the comparison baseline).
enum class Granularity { LogStream, Partition };

enum class MsgType { PrepareReq, PrepareResp, Commit, Abort, Ack, Release, Clear };

enum class LogEntryKind {
  PrepareLog,
  CommitLog,
  AbortLog,
  ClearLog,
  TransferOutLog,
  TransferInLog,
};

// Local disposition of a participant towards the transaction; flipped to No
// by local failure and by NO votes from children.
enum class OwnStatus { Ok, No };

const char* to_string(TxnState s);
const char* to_string(VoteStatus v);
const char* to_string(UserOutcome o);
const char* to_string(Provenance p);
const char* to_string(SimMode m);
const char* to_string(Granularity g);
const char* to_string(MsgType t);
const char* to_string(LogEntryKind k);
const char* to_string(OwnStatus s);

// Protocol variant switches. Each one corresponds to a distinct published
// refinement of the base protocol; validate() rejects contradictory mixes.
struct ProtocolVariant {
  // Early refinement: participants write a clear log before TOMBSTONE and the
  // coordinator never logs at all.
  bool clear_stage = false;
  // Later refinement: the clear stage is dropped and the coordinator
  // synchronously writes its commit/abort log after replying to the user.
  bool coordinator_commit_log = true;
  // Commit-point RELEASE messages: row locks release one message leg after
  // the decision; COMMIT messages wait for the coordinator's commit log.
  bool release_messages = false;
  // Only the root writes clear logs.
  bool d2pc_clear = false;
  // Missing participant state answers PREPARE_UNKNOWN instead of lying NO,
  // and a recreated root reports TRANS_UNKNOWN instead of a false abort.
  bool unknown_states = false;
  // Terminated-transaction descriptor table: recently decided outcomes are
  // answerable after context reclamation, within a retention window.
  bool tdt = false;

  // Returns a human-readable problem description, or empty if consistent.
  std::string validate() const;

  // Comma-separated flag list, e.g. "coordinator-commit-log,release-messages".
  std::string format() const;
  static ProtocolVariant parse(const std::string& text);  // throws ParseError

  bool operator==(const ProtocolVariant&) const = default;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A protocol message between log streams. User requests/responses are not
// Messages; they are simulator events and never count as inter-node traffic.
struct Message {
  MsgType type = MsgType::PrepareReq;
  TxnId txn;
  LogStreamId src;
  LogStreamId dst;
  // Meaningful for PrepareResp only.
  VoteStatus vote = VoteStatus::Unknown;

  std::string encode() const;
  bool operator==(const Message&) const = default;
  auto operator<=>(const Message&) const = default;
};

// One persisted (or pending) record in a stream's log. A single struct covers
// both 2PC records and transfer records; unused fields stay empty.
struct LogEntry {
  LogStreamId stream;
  std::uint64_t seq = 0;  // per-stream position, 1-based
  Tick ts = 0;            // global logical timestamp, assigned at persistence
  LogEntryKind kind = LogEntryKind::PrepareLog;
  TxnId txn;  // empty for transfer records

  // 2PC records carry the participant bookkeeping needed for recovery.
  std::vector<LogStreamId> participants;  // recorded (initial) children
  std::vector<LogStreamId> incr_parts;    // transfer-added children
  std::optional<LogStreamId> parent;

  // Transfer records.
  PartitionId partition;
  LogStreamId transfer_src;
  LogStreamId transfer_dst;
  std::vector<TxnId> affected_txns;  // txns whose context migrated / blocked

  bool sync = true;        // majority-acked before its effects fired
  bool reclaimed = false;  // space handed back; retained for run validation

  std::string encode() const;
};

// Per-(stream, txn) participant context.
struct TxnContext {
  TxnId txn;
  LogStreamId node;
  TxnState state = TxnState::Running;
  OwnStatus own_status = OwnStatus::Ok;
  Provenance provenance = Provenance::Fresh;
  std::optional<LogStreamId> parent;

  // Recorded participant lists. `children` is what data operations recorded;
  // `incr_children` is the persisted transfer-added set; `interm_children`
  // is the volatile transfer-added set, merged into incr_children when the
  // next 2PC log is written.
  std::vector<LogStreamId> children;
  std::vector<LogStreamId> incr_children;
  std::vector<LogStreamId> interm_children;

  std::map<LogStreamId, VoteStatus> votes;
  std::map<LogStreamId, bool> acks;

  bool prepare_log_persisted = false;
  bool blocked_from_logging = false;
  Tick last_2pc_log_ts = 0;

  // Partitions this context covers on this stream.
  std::set<PartitionId> touched_partitions;

  // Upward vote, once cast (non-root), so a re-delivered PrepareReq from the
  // recorded parent can be answered idempotently after recovery.
  std::optional<VoteStatus> cast_vote;

  bool is_root = false;

  // Active fan-out and vote-gating set: children plus all transfer-added
  // children, persisted or not.
  std::vector<LogStreamId> effective_children() const;
  bool all_votes_ok() const;
  bool any_vote_blocking() const;  // No or PrepareUnknown
  bool any_vote_unknown_state() const;
  bool all_acked() const;

  std::string encode() const;
};

// Canonical line encoding: space-separated key=value pairs in the order the
// caller supplies; values must not contain spaces or newlines.
std::string encode_fields(
    const std::vector<std::pair<std::string, std::string>>& fields);

std::string join_ids(const std::vector<std::string>& ids);  // comma-separated
std::vector<std::string> split_ids(const std::string& text, char delim = ',');

// FNV-1a 64-bit, used for stable trace hashes across platforms.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// Simulation parameters shared by both modes.
struct SimConfig {
  SimMode mode = SimMode::Logged;
  std::uint64_t seed = 0;
  Tick msg_delay = 5;
  Tick log_sync_delay = 3;
  Tick jitter = 0;  // extra delay drawn uniformly from [0, jitter]
  ProtocolVariant variant;
  Granularity granularity = Granularity::LogStream;
  Tick tdt_retention = 30 * kTicksPerMinute;
  std::uint64_t max_events = 1'000'000;  // quiescence budget
  // Re-drive interval for unanswered PrepareReq/Commit/Abort fan-out. Chosen
  // far above any clean-run completion time so retries only matter after
  // crash recovery and never disturb the exact message counters.
  Tick retry_interval = 10 * kTicksPerSecond;
  // Upper bound on partitions recorded per context; beyond it every transfer
  // from the stream conservatively adds its destination to the participant
  // list (a superset of the minimum set stays correct).
  int max_recorded_partitions = 1024;
};

// Stable violation identifiers used in run reports and scenario expectations.
namespace violation {
inline constexpr const char* kCommitAbortDivergence = "commit-abort-divergence";
inline constexpr const char* kOutcomeContradiction = "outcome-contradiction";
inline constexpr const char* kMinimumSet = "minimum-set";
inline constexpr const char* kTransferPrinciple = "transfer-principle";
inline constexpr const char* kQuiescenceBudget = "quiescence-budget";
inline constexpr const char* kProtocolError = "protocol-error";
}  // namespace violation

}  // namespace tree2pc

#endif  // TREE2PC_CORE_TYPES_HPP_
