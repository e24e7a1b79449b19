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

// Deterministic discrete-event simulator for the tree commit protocol.
//
// Logged mode runs the full engine: per-stream logs with explicit append /
// persist events, the participant state machine, partition transfers, crash
// and recovery, context reclamation, and the unknown-state machinery.
// Abstract mode drives the Appendix-level transition system instead and
// records a trace replayable by the conformance checker.
//
// Both modes run from a Scenario. Determinism: one priority queue ordered by
// (tick, sequence number); randomness only perturbs message and log-sync
// delays, drawn from a seeded generator in schedule order.

#ifndef TREE2PC_SIM_HPP_
#define TREE2PC_SIM_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tree2pc/abstract_model.hpp"
#include "tree2pc/model_checker.hpp"
#include "tree2pc/scenario.hpp"
#include "tree2pc/transfer_engine.hpp"

namespace tree2pc {

// Causal cost of reaching an event: how many message legs and how many
// majority-acknowledged log syncs lie on the longest dependency chain, and
// when the chain completes. Maxima are lexicographic by (at, hops, syncs).
struct CausalPath {
  int hops = 0;
  int syncs = 0;
  Tick at = 0;

  CausalPath hop(Tick arrive) const { return {hops + 1, syncs, arrive}; }
  CausalPath sync(Tick persist) const { return {hops, syncs + 1, persist}; }
  bool operator==(const CausalPath&) const = default;
};
CausalPath path_max(const CausalPath& a, const CausalPath& b);

struct Violation {
  std::string kind;  // one of the violation:: identifiers
  Tick at = 0;
  std::string detail;
};

// Per-transaction run report.
struct TxnReport {
  // Responses that actually reached the user (a dropped response is absent).
  std::vector<std::pair<UserOutcome, Tick>> delivered;
  std::optional<UserOutcome> final_outcome;  // last delivered response
  // Causal path of the first response the root issued (even if dropped).
  CausalPath response;
  bool response_valid = false;
  // Worst lock-release path across participating streams.
  CausalPath lock_release;
  bool lock_release_valid = false;
};

struct RunResult {
  // Quiesced, every expectation met, and no unexpected violation.
  bool ok = false;
  bool quiesced = false;
  Tick end_time = 0;
  std::uint64_t events_processed = 0;

  // Message transmissions between streams (user traffic excluded).
  std::uint64_t msgs_total = 0;
  std::uint64_t prepare_msgs = 0;  // PrepareReq + PrepareResp only
  std::map<MsgType, std::uint64_t> msgs_by_kind;
  std::uint64_t sync_logs = 0;     // persisted majority-acked, synchronous
  std::uint64_t async_logs = 0;    // persisted majority-acked, asynchronous

  std::map<TxnId, TxnReport> txns;
  std::vector<Violation> violations;
  std::vector<std::string> unmet_expectations;
  std::vector<std::string> flags;  // non-fatal observations

  RunHistory history;
  std::vector<std::string> trace;
  std::string trace_hash;

  // Abstract mode only: the recorded action trace for conformance replay.
  std::optional<AbstractTrace> abstract_trace;

  // Named counter lookup used by scenario expectations and the bench CSV.
  std::optional<std::int64_t> counter(const std::string& name) const;
  std::string summary() const;
};

class Simulator {
 public:
  // Validates and (for partition granularity) expands the scenario.
  // Throws ValidationError if the scenario is not runnable.
  explicit Simulator(const Scenario& scenario);

  // Adds one more schedule item before the run starts (fault injection).
  void inject_fault(const ScheduleItem& item);

  // Runs until the event queue drains or the event budget is exhausted,
  // then evaluates violations and scenario expectations.
  RunResult run_to_quiescence();

 private:
  // ---- internal state -----------------------------------------------------
  struct SimEvent {
    enum class Kind {
      Deliver,
      LogPersisted,
      TransferStep,
      UserRequest,
      UserResponse,
      Crash,
      Recover,
      Reclaim,
      InternalAbort,
      LocalNo,
      DuplicateMsg,
      RetryTimer,
    };
    Kind kind = Kind::Deliver;
    Tick at = 0;
    std::uint64_t seq = 0;
    Message msg;       // Deliver
    CausalPath path;   // Deliver / UserResponse
    LogStreamId stream;
    TxnId txn;
    UserOutcome outcome = UserOutcome::Committed;  // UserResponse
    std::uint64_t append_id = 0;                   // LogPersisted
    std::uint64_t transfer_id = 0;                 // TransferStep
    std::uint64_t ordinal = 0;                     // DuplicateMsg (1-based)
    std::uint64_t epoch = 0;                       // RetryTimer staleness
    bool injected_duplicate = false;               // Deliver via DuplicateMsg
  };
  struct EventAfter {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  // Per-(stream, txn) context plus scheduling state the protocol does not
  // persist.
  struct CtxRt {
    TxnContext ctx;
    bool prepare_initiated = false;
    bool user_attached = false;
    bool decided = false;
    bool commit_fanned_out = false;   // release variant defers COMMIT fan-out
    bool release_received = false;
    bool terminal_log_pending = false;
    bool terminal_log_persisted = false;
    bool clear_received = false;      // clear-stage: CLEAR request arrived
    bool clear_log_done = false;
    bool forgotten = false;           // forget_ctx ran (clear policy applied)
    bool reclaim_requested = false;
    // Duplicate prepare requesters awaiting this node's own prepare log.
    std::vector<LogStreamId> deferred_dup_voters;
    // Pending 2PC append blocked by the stream lock or a transfer block.
    std::optional<LogEntryKind> deferred_append;
    CausalPath deferred_append_path;
    std::uint64_t retry_epoch = 0;
    CausalPath vote_basis;    // own prepare sync + children votes
    CausalPath decide_basis;  // path that fixed the terminal decision
    std::optional<CausalPath> lock_release;
    int responses_sent = 0;   // root only
  };

  struct PendingAppend {
    std::uint64_t id = 0;
    LogEntry entry;
    bool sync = true;
    bool holds_lock = false;  // 2PC appends hold the stream lock to persist
    CausalPath path;
    std::uint64_t transfer_id = 0;  // nonzero for transfer-log appends
  };

  struct StreamState {
    LogStreamId id;
    bool crashed = false;
    std::vector<LogEntry> log;  // persisted, in seq order
    std::uint64_t next_seq = 1;
    std::map<TxnId, CtxRt> ctxs;
    std::set<PartitionId> hosted;
    std::map<std::uint64_t, PendingAppend> pending;
    // Algorithm 2/3 stream lock: held across log persistence by either a
    // transfer critical section or a 2PC append.
    enum class Lock { Free, Transfer, Append } lock = Lock::Free;
    std::uint64_t lock_transfer = 0;
    TxnId lock_txn;
    std::deque<std::pair<Message, CausalPath>> parked;  // while crashed
    std::vector<std::uint64_t> redrive_in;  // transfers to re-issue on recover
    std::map<TxnId, std::pair<TxnState, Tick>> tdt;
  };

  struct MigrationInfo {
    TxnId txn;
    bool covers = false;  // the moved partition belongs to this txn's writes
    TxnState state_at_collect = TxnState::Running;
  };

  struct TransferTask {
    std::uint64_t id = 0;
    PartitionId partition;
    LogStreamId src;
    LogStreamId dst;
    enum class Phase { Pending, OutLog, InLog, Done, Failed } phase =
        Phase::Pending;
    Tick ts = 0;          // logical ts of the outbound record
    Tick applied_ts = 0;  // logical ts of the inbound record (placement flip)
    std::vector<MigrationInfo> migrations;
    std::vector<TxnId> overflow_affected;
    CausalPath path;
  };

  // Global per-txn bookkeeping that outlives stream contexts.
  struct TxnGlobal {
    LogStreamId root;
    std::vector<LogStreamId> root_children;  // declared fan-out at the root
    std::set<PartitionId> touched;
    bool user_requested = false;
    bool root_reclaimed = false;
    bool response_dropped = false;
    bool commit_logged = false;
    bool abort_logged = false;
    bool divergence_flagged = false;
    // Outcome the root last put on the wire (even if the response was lost),
    // so a retry while the context is still alive re-sends the same answer.
    std::optional<UserOutcome> responded_outcome;
    std::map<LogStreamId, Tick> reclaimed_at;  // logical ts per stream
    std::vector<std::pair<UserOutcome, Tick>> delivered;
    CausalPath first_response;
    bool first_response_valid = false;
    std::optional<CausalPath> lock_release;
    std::optional<Tick> completion;  // logical ts of root terminal log
  };

  // ---- harness (sim_harness.cpp) ------------------------------------------
  void init_from_scenario();
  void enqueue(SimEvent ev);
  void dispatch(const SimEvent& ev);
  void schedule_send(const Message& msg, const CausalPath& from);
  void deliver(const SimEvent& ev);
  void handle_user_request(const TxnId& txn);
  void handle_user_response(const SimEvent& ev);
  void handle_duplicate(std::uint64_t ordinal);
  void handle_retry_timer(const SimEvent& ev);
  void arm_retry(CtxRt& rt);
  void cancel_retry(CtxRt& rt);
  Tick draw_jitter();
  void trace_line(std::string line);
  void op_trace(const LogStreamId& node, const std::string& op,
                const TxnId& txn, const std::string& detail);
  void record_violation(const std::string& kind, const std::string& detail);
  void finalize(RunResult& result);
  void evaluate_expectations(RunResult& result);

  // ---- abstract bridge (sim_harness.cpp) ----------------------------------
  void abstract_init();
  bool abstract_apply(const AbstractAction& action);  // true iff world moved
  void abstract_cascade();
  void abstract_deliver(const SimEvent& ev);
  void abstract_user_commit(const TxnId& txn);
  void abstract_transfer(const ScheduleItem& item);
  void abstract_internal_abort(const ScheduleItem& item);

  // ---- state machine (state_machine.cpp) ----------------------------------
  void handle_prepare_request(StreamState& s, const Message& m,
                              const CausalPath& path);
  void handle_duplicate_prepare_request(StreamState& s, CtxRt& rt,
                                        const Message& m,
                                        const CausalPath& path);
  void handle_orphan_prepare_request(StreamState& s, const Message& m,
                                     const CausalPath& path);
  void handle_prepare_response(StreamState& s, const Message& m,
                               const CausalPath& path);
  void handle_commit_request(StreamState& s, const Message& m,
                             const CausalPath& path);
  void handle_abort_request(StreamState& s, const Message& m,
                            const CausalPath& path);
  void handle_orphan_commit_request(StreamState& s, const Message& m,
                                    const CausalPath& path);
  void handle_orphan_abort_request(StreamState& s, const Message& m,
                                   const CausalPath& path);
  void handle_ack(StreamState& s, const Message& m, const CausalPath& path);
  void handle_release(StreamState& s, const Message& m,
                      const CausalPath& path);
  void handle_clear(StreamState& s, const Message& m, const CausalPath& path);
  void start_two_phase_commit(StreamState& s, CtxRt& rt);
  void maybe_cast_vote(StreamState& s, CtxRt& rt);
  void decide(StreamState& s, CtxRt& rt);
  void enter_commit(StreamState& s, CtxRt& rt, const CausalPath& path);
  void enter_abort(StreamState& s, CtxRt& rt, const CausalPath& path,
                   bool write_log);
  void fan_out_decision(StreamState& s, CtxRt& rt, MsgType type,
                        const CausalPath& path);
  void maybe_forget(StreamState& s, CtxRt& rt);
  void forget_ctx(StreamState& s, CtxRt& rt);
  void tombstone(StreamState& s, CtxRt& rt);
  void add_intermediate_participant(CtxRt& rt, const LogStreamId& dst);
  void internal_abort(StreamState& s, const TxnId& txn);
  void local_no(StreamState& s, const TxnId& txn);
  void record_lock_release(StreamState& s, CtxRt& rt, const CausalPath& path);
  void merge_interm(CtxRt& rt);

  // ---- unknown resolution (unknown_resolution.cpp) ------------------------
  VoteStatus orphan_prepare_vote(StreamState& s, const TxnId& txn);
  void root_user_response(StreamState& s, const TxnId& txn);
  void recreate_root(StreamState& s, const TxnId& txn);
  void resolve_inquiry(StreamState& s, CtxRt& rt);
  // rt may be null (a data-table hit answers without recreating a context).
  void respond_to_user(StreamState& s, CtxRt* rt, const TxnId& txn,
                       UserOutcome outcome, const CausalPath& path);
  void record_tdt(StreamState& s, const TxnId& txn, TxnState outcome);
  std::optional<TxnState> tdt_lookup(StreamState& s, const TxnId& txn);

  // ---- log engine (log_engine.cpp) ----------------------------------------
  // Appends a 2PC record for rt's txn; defers if the context is blocked or
  // the stream lock is busy. Merges volatile transfer additions first.
  void append_2pc(StreamState& s, CtxRt& rt, LogEntryKind kind,
                  const CausalPath& path);
  void append_clear(StreamState& s, CtxRt& rt, bool sync,
                    const CausalPath& path);
  std::uint64_t append_raw(StreamState& s, LogEntry entry, bool sync,
                           bool holds_lock, const CausalPath& path,
                           std::uint64_t transfer_id);
  void on_log_persisted(StreamState& s, std::uint64_t append_id);
  void on_2pc_persisted(StreamState& s, const LogEntry& entry,
                        const CausalPath& path);
  void release_stream_lock(StreamState& s);
  void try_start_deferred_appends(StreamState& s);
  void reclaim_context(StreamState& s, const TxnId& txn);
  void crash(StreamState& s);
  void recover(StreamState& s);
  void rebuild_contexts_from_log(StreamState& s);

  // ---- transfer engine (transfer_engine.cpp) ------------------------------
  void execute_transfer(const ScheduleItem& item);
  void transfer_step(std::uint64_t task_id);
  void transfer_out_persisted(TransferTask& task, const LogEntry& entry,
                              const CausalPath& path);
  void transfer_in_persisted(TransferTask& task, const LogEntry& entry,
                             const CausalPath& path);
  void issue_transfer_in(TransferTask& task, const CausalPath& path);
  void apply_migration(TransferTask& task, const CausalPath& path);
  void fail_transfer(TransferTask& task, const std::string& why);

  // ---- shared helpers ------------------------------------------------------
  StreamState& stream(const LogStreamId& id);
  CtxRt* find_ctx(const LogStreamId& stream_id, const TxnId& txn);
  TxnGlobal& global(const TxnId& txn);
  bool stream_has_entry(const LogStreamId& stream_id, const TxnId& txn,
                        LogEntryKind kind) const;

  Scenario scenario_;
  SimConfig cfg_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, EventAfter> queue_;
  std::map<LogStreamId, StreamState> streams_;
  std::map<TxnId, TxnGlobal> txns_;
  std::map<std::uint64_t, TransferTask> transfers_;
  std::vector<std::uint64_t> transfer_order_;
  std::mt19937_64 rng_;
  Tick now_ = 0;
  std::uint64_t next_event_seq_ = 0;
  std::uint64_t next_append_id_ = 1;
  std::uint64_t next_transfer_id_ = 1;
  Tick next_logical_ts_ = 0;
  std::uint64_t events_processed_ = 0;
  std::uint64_t msgs_total_ = 0;
  std::uint64_t prepare_msgs_ = 0;
  std::map<MsgType, std::uint64_t> msgs_by_kind_;
  std::uint64_t sync_logs_ = 0;
  std::uint64_t async_logs_ = 0;
  std::vector<Violation> violations_;
  std::set<std::string> violation_kinds_;
  std::vector<std::string> flags_;
  std::vector<std::string> trace_;
  std::vector<std::pair<Message, CausalPath>> delivery_log_;
  bool budget_exhausted_ = false;

  // Abstract mode.
  ModelConfig abs_config_;
  AbstractWorld abs_world_;
  std::vector<AbstractTraceStep> abs_steps_;
  std::vector<Message> abs_delivery_log_;
  bool abs_consistency_violated_ = false;
};

// Convenience: build, run, return.
RunResult run_scenario(const Scenario& scenario);

}  // namespace tree2pc

#endif  // TREE2PC_SIM_HPP_
