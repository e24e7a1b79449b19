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

// Transfer engine: moves a partition between log streams while transactions
// that wrote it are still in flight, without ever letting a context escape
// the commit protocol.
//
// A transfer is a critical section against the source's stream lock. Inside
// it the engine sweeps every context that covers the partition (or whose
// recorded-partition set has overflowed the cap, which makes coverage
// undecidable), blocks them from writing 2PC records, and persists one
// outbound record naming them all. The destination persists a matching
// inbound record; only at that point does placement flip and context state
// migrate. Blocked contexts resume with the destination merged into their
// participant set, which is what makes the recorded-vs-newer-record
// dichotomy of the post-run checks airtight.
//
// The checks at the bottom of this file re-derive every promise from the
// durable residue alone (RunHistory), so the engine cannot vouch for itself.

#include "tree2pc/transfer_engine.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tree2pc/sim.hpp"

namespace tree2pc {

// ---------------------------------------------------------------------------
// Engine: scheduling and the two-record move.

void Simulator::execute_transfer(const ScheduleItem& item) {
  TransferTask task;
  task.id = next_transfer_id_++;
  task.partition = item.partition;
  task.src = item.stream;
  task.dst = item.dst;
  const std::uint64_t id = task.id;
  transfers_.emplace(id, std::move(task));
  transfer_order_.push_back(id);
  SimEvent ev;
  ev.kind = SimEvent::Kind::TransferStep;
  ev.at = item.at;
  ev.transfer_id = id;
  enqueue(std::move(ev));
}

void Simulator::transfer_step(std::uint64_t task_id) {
  TransferTask& task = transfers_.at(task_id);
  if (task.phase != TransferTask::Phase::Pending) return;  // stale wakeup
  if (task.src == task.dst) {
    fail_transfer(task, "destination equals source");
    return;
  }
  if (streams_.count(task.src) == 0 || streams_.count(task.dst) == 0) {
    fail_transfer(task, "unknown stream");
    return;
  }
  StreamState& src = stream(task.src);
  if (src.crashed) {
    fail_transfer(task, "source stream crashed");
    return;
  }
  if (src.hosted.count(task.partition) == 0) {
    fail_transfer(task, "partition not hosted by source");
    return;
  }
  if (src.lock != StreamState::Lock::Free) {
    // Contention with a 2PC append or another transfer is routine: try again
    // on the next tick, quietly.
    SimEvent ev;
    ev.kind = SimEvent::Kind::TransferStep;
    ev.at = now_ + 1;
    ev.transfer_id = task.id;
    enqueue(std::move(ev));
    return;
  }
  src.lock = StreamState::Lock::Transfer;
  src.lock_transfer = task.id;

  // Sweep the contexts the move concerns. A context whose recorded set
  // overflowed the cap can no longer prove it did not write this partition,
  // so it is swept conservatively. Finished-and-forgotten contexts are still
  // listed — their durable records travel with the partition's history even
  // though no live state will migrate.
  for (auto& [txn, rt] : src.ctxs) {
    const bool covers = rt.ctx.touched_partitions.count(task.partition) > 0;
    const bool overflow =
        rt.ctx.touched_partitions.size() >
        static_cast<std::size_t>(cfg_.max_recorded_partitions);
    if (!covers && !overflow) continue;
    task.migrations.push_back({txn, covers, rt.ctx.state});
    if (!covers) task.overflow_affected.push_back(txn);
    rt.ctx.blocked_from_logging = true;
  }
  task.phase = TransferTask::Phase::OutLog;
  trace_line("t=" + std::to_string(now_) + " node=" + task.src +
             " op=transfer-out id=" + std::to_string(task.id) + " part=" +
             task.partition + " dst=" + task.dst + " affected=" +
             std::to_string(task.migrations.size()));

  LogEntry e;
  e.stream = src.id;
  e.kind = LogEntryKind::TransferOutLog;
  e.partition = task.partition;
  e.transfer_src = task.src;
  e.transfer_dst = task.dst;
  for (const auto& m : task.migrations) e.affected_txns.push_back(m.txn);
  append_raw(src, std::move(e), /*sync=*/true, /*holds_lock=*/false,
             CausalPath{0, 0, now_}, task.id);
}

void Simulator::transfer_out_persisted(TransferTask& task,
                                       const LogEntry& entry,
                                       const CausalPath& path) {
  if (task.phase != TransferTask::Phase::OutLog) return;
  task.ts = entry.ts;
  task.path = path;
  issue_transfer_in(task, path);
}

void Simulator::issue_transfer_in(TransferTask& task, const CausalPath& path) {
  StreamState& dst = stream(task.dst);
  if (dst.crashed) {
    // The outbound record is durable; park until the destination returns.
    dst.redrive_in.push_back(task.id);
    trace_line("t=" + std::to_string(now_) + " node=" + task.dst +
               " op=transfer-park id=" + std::to_string(task.id));
    return;
  }
  task.phase = TransferTask::Phase::InLog;
  trace_line("t=" + std::to_string(now_) + " node=" + task.dst +
             " op=transfer-in id=" + std::to_string(task.id) + " part=" +
             task.partition + " src=" + task.src);
  LogEntry e;
  e.stream = dst.id;
  e.kind = LogEntryKind::TransferInLog;
  e.partition = task.partition;
  e.transfer_src = task.src;
  e.transfer_dst = task.dst;
  // The inbound record names what actually arrives: every migration whose
  // context still had state to hand over. Forgotten contexts move nothing;
  // overflow sweeps arrive as data-less stubs (the source could not verify
  // the partition is foreign to them, and the destination is about to be
  // grafted into their participant lists).
  for (const auto& m : task.migrations) {
    if (m.state_at_collect != TxnState::Tombstone) {
      e.affected_txns.push_back(m.txn);
    }
  }
  append_raw(dst, std::move(e), /*sync=*/true, /*holds_lock=*/false,
             path.hop(now_), task.id);
}

void Simulator::transfer_in_persisted(TransferTask& task,
                                      const LogEntry& entry,
                                      const CausalPath& path) {
  if (task.phase != TransferTask::Phase::InLog) return;
  task.applied_ts = entry.ts;
  task.path = path;
  apply_migration(task, path);
  task.phase = TransferTask::Phase::Done;
  trace_line("t=" + std::to_string(now_) + " node=" + task.dst +
             " op=transfer-done id=" + std::to_string(task.id) + " part=" +
             task.partition);
  StreamState& src = stream(task.src);
  if (src.lock == StreamState::Lock::Transfer &&
      src.lock_transfer == task.id) {
    // Release after the effects above so deferred appends resume with the
    // destination already merged into their participant sets.
    release_stream_lock(src);
  }
}

void Simulator::apply_migration(TransferTask& task, const CausalPath& path) {
  StreamState& src = stream(task.src);
  StreamState& dst = stream(task.dst);
  src.hosted.erase(task.partition);
  dst.hosted.insert(task.partition);

  // Destination side: merge or create contexts for what arrives. A coverage
  // migration hands over the moved partition; an overflow sweep hands over a
  // data-less stub — the destination is being grafted into the txn's
  // participant list, and only a live context there can vote truthfully (an
  // orphaned extra participant would answer NO and wrongly abort).
  for (const auto& m : task.migrations) {
    if (m.state_at_collect == TxnState::Tombstone) {
      // The source context had finished and been forgotten: whatever moves
      // carries no transaction state to hand over.
      continue;
    }
    if (CtxRt* drt = find_ctx(dst.id, m.txn)) {
      // Already a participant here; arriving coverage folds in.
      if (m.covers) drt->ctx.touched_partitions.insert(task.partition);
      continue;
    }
    CtxRt fresh;
    fresh.ctx.txn = m.txn;
    fresh.ctx.node = dst.id;
    fresh.ctx.parent = task.src;
    fresh.ctx.is_root = (global(m.txn).root == dst.id);
    if (m.covers) fresh.ctx.touched_partitions.insert(task.partition);
    auto [pos, inserted] = dst.ctxs.emplace(m.txn, std::move(fresh));
    (void)inserted;
    CtxRt& rt = pos->second;
    op_trace(dst.id, "migrate-ctx", m.txn,
             "from=" + task.src + " state=" +
                 std::string(to_string(m.state_at_collect)));
    if (m.state_at_collect == TxnState::Commit) {
      // The outcome was already fixed at the source. Replicate it here:
      // own terminal record, then the usual ack/forget flow.
      enter_commit(dst, rt, path);
    } else if (m.state_at_collect == TxnState::Abort) {
      enter_abort(dst, rt, path, /*write_log=*/true);
    }
    // Running or Prepare at collection: a running participant. Its parent's
    // fan-out — or the add-participant hook below — brings it into the vote.
  }

  // Source side: drop the moved coverage, graft the destination into every
  // affected context whose newest record predates the move, and unblock.
  for (const auto& m : task.migrations) {
    CtxRt* srt = find_ctx(src.id, m.txn);
    if (!srt) continue;  // crashed or reclaimed since collection
    if (m.covers) srt->ctx.touched_partitions.erase(task.partition);
    if (task.ts > srt->ctx.last_2pc_log_ts) {
      add_intermediate_participant(*srt, task.dst);
    }
    srt->ctx.blocked_from_logging = false;
  }
}

void Simulator::fail_transfer(TransferTask& task, const std::string& why) {
  if (task.phase == TransferTask::Phase::Done ||
      task.phase == TransferTask::Phase::Failed) {
    return;
  }
  task.phase = TransferTask::Phase::Failed;
  trace_line("t=" + std::to_string(now_) + " node=" + task.src +
             " op=transfer-fail id=" + std::to_string(task.id) + " why=\"" +
             why + "\"");
  if (streams_.count(task.src) == 0) return;
  StreamState& src = stream(task.src);
  for (const auto& m : task.migrations) {
    if (CtxRt* srt = find_ctx(src.id, m.txn)) {
      srt->ctx.blocked_from_logging = false;
    }
  }
  if (src.lock == StreamState::Lock::Transfer &&
      src.lock_transfer == task.id) {
    release_stream_lock(src);
  }
}

// ---------------------------------------------------------------------------
// Post-run checks. Everything below reads only RunHistory.

namespace {

bool is_2pc(LogEntryKind k) {
  return k == LogEntryKind::PrepareLog || k == LogEntryKind::CommitLog ||
         k == LogEntryKind::AbortLog;
}

bool lists(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

// Completed transfers of one partition, in the order their inbound records
// persisted — the order placement actually flipped.
std::vector<const TransferRecord*> hops_of(const RunHistory& h,
                                           const PartitionId& p) {
  std::vector<const TransferRecord*> hops;
  for (const auto& t : h.transfers) {
    if (t.completed && t.partition == p) hops.push_back(&t);
  }
  std::sort(hops.begin(), hops.end(),
            [](const TransferRecord* a, const TransferRecord* b) {
              return a->applied_ts < b->applied_ts;
            });
  return hops;
}

}  // namespace

std::map<LogStreamId, TreeNode> build_log_stream_tree(const RunHistory& h,
                                                      const TxnId& txn) {
  Tick cutoff = std::numeric_limits<Tick>::max();
  if (auto it = h.completion.find(txn); it != h.completion.end()) {
    cutoff = it->second;
  }
  std::map<LogStreamId, const LogEntry*> latest;
  for (const auto& e : h.entries) {
    if (e.txn != txn || !is_2pc(e.kind) || e.ts > cutoff) continue;
    // Reclaimed records still count: reclamation frees space going forward,
    // but the recovery point audited here is the completion instant.
    const LogEntry*& slot = latest[e.stream];
    if (slot == nullptr || e.ts > slot->ts) slot = &e;
  }
  std::map<LogStreamId, TreeNode> tree;
  for (const auto& [sid, e] : latest) {
    tree[sid] = TreeNode{e->parent, e->participants, e->incr_parts, e->kind};
  }
  return tree;
}

std::vector<std::string> check_minimum_set(const RunHistory& h) {
  std::vector<std::string> problems;

  // Durable outbound records indexed by their logical timestamp, which is
  // exactly what TransferRecord::ts claims to be.
  std::map<Tick, const LogEntry*> out_by_ts;
  for (const auto& e : h.entries) {
    if (e.kind == LogEntryKind::TransferOutLog) out_by_ts[e.ts] = &e;
  }

  for (const auto& [txn, completion_ts] : h.completion) {
    // Aborted transactions recover by presumption; only a commit obliges
    // every write's host to be reachable from the recovered tree. (Runs
    // under the clear-everything policy record no completion point and are
    // skipped here by construction.)
    auto rit = h.txn_root.find(txn);
    if (rit == h.txn_root.end()) continue;
    bool committed = false;
    for (const auto& e : h.entries) {
      if (e.txn == txn && e.stream == rit->second &&
          e.kind == LogEntryKind::CommitLog && e.ts == completion_ts) {
        committed = true;
        break;
      }
    }
    if (!committed) continue;

    const auto tree = build_log_stream_tree(h, txn);
    auto tit = h.touched.find(txn);
    if (tit == h.touched.end()) continue;
    for (const PartitionId& p : tit->second) {
      auto hit = h.initial_home.find(p);
      if (hit == h.initial_home.end()) {
        problems.push_back("txn=" + txn + " partition=" + p +
                           ": no declared home");
        continue;
      }
      LogStreamId home = hit->second;
      if (tree.count(home) == 0) {
        problems.push_back("txn=" + txn + " partition=" + p +
                           ": initial host " + home +
                           " missing from the recovered tree");
        continue;
      }
      // Every later placement hop up to completion must be documented by a
      // durable outbound record chaining from that first host.
      for (const TransferRecord* u : hops_of(h, p)) {
        if (u->applied_ts > completion_ts) break;  // moved only afterwards
        if (u->src != home) {
          problems.push_back("txn=" + txn + " partition=" + p +
                             ": transfer id=" + std::to_string(u->id) +
                             " breaks the placement chain (src=" + u->src +
                             ", expected " + home + ")");
          break;
        }
        auto oit = out_by_ts.find(u->ts);
        const LogEntry* out =
            (oit == out_by_ts.end()) ? nullptr : oit->second;
        if (out == nullptr || out->stream != u->src ||
            out->partition != p || out->transfer_dst != u->dst) {
          problems.push_back("txn=" + txn + " partition=" + p + ": hop to " +
                             u->dst + " has no durable outbound record");
          break;
        }
        home = u->dst;
      }
    }
  }
  return problems;
}

std::vector<std::string> check_transfer_principle(const RunHistory& h) {
  std::vector<std::string> problems;

  std::map<Tick, const LogEntry*> in_by_ts;
  for (const auto& e : h.entries) {
    if (e.kind == LogEntryKind::TransferInLog) in_by_ts[e.ts] = &e;
  }

  // (a) Completeness. Re-derive, from declared writes and the durable
  // migration chain alone, which transactions each transfer had to sweep.
  // A transaction's coverage of a partition starts at the declared home,
  // advances only when a hop's inbound record names the transaction, and
  // dies where its context was reclaimed first.
  std::set<PartitionId> moved;
  for (const auto& t : h.transfers) {
    if (t.completed) moved.insert(t.partition);
  }
  for (const PartitionId& p : moved) {
    const auto hops = hops_of(h, p);
    for (const auto& [txn, touched] : h.touched) {
      if (touched.count(p) == 0) continue;
      auto hit = h.initial_home.find(p);
      if (hit == h.initial_home.end()) continue;  // a minimum-set finding
      LogStreamId cover = hit->second;
      for (const TransferRecord* u : hops) {
        auto rmap = h.reclaimed_at.find(txn);
        if (rmap != h.reclaimed_at.end()) {
          auto rts = rmap->second.find(cover);
          if (rts != rmap->second.end() && rts->second < u->ts) break;
        }
        if (u->src != cover) break;  // coverage parted ways with placement
        if (!lists(u->affected, txn)) {
          problems.push_back("transfer id=" + std::to_string(u->id) +
                             " partition=" + p + " from " + u->src +
                             " missed txn=" + txn);
          break;  // downstream expectations would be guesswork
        }
        auto iit = in_by_ts.find(u->applied_ts);
        const LogEntry* in = (iit == in_by_ts.end()) ? nullptr : iit->second;
        if (in == nullptr) {
          problems.push_back("transfer id=" + std::to_string(u->id) +
                             ": completed without a durable inbound record");
          break;
        }
        // Swept but absent from the inbound record: the context had already
        // finished, so no state migrated and coverage ends here.
        if (!lists(in->affected_txns, txn)) break;
        cover = u->dst;
      }
    }
  }

  // (b) No over-reach: everything a transfer swept must have written the
  // partition, unless it rode in on the recorded-partition-cap overflow.
  for (const auto& t : h.transfers) {
    for (const TxnId& txn : t.affected) {
      if (lists(t.overflow_affected, txn)) continue;
      auto tit = h.touched.find(txn);
      if (tit == h.touched.end() || tit->second.count(t.partition) == 0) {
        problems.push_back("transfer id=" + std::to_string(t.id) +
                           " swept txn=" + txn +
                           " which never wrote partition " + t.partition);
      }
    }
  }

  // (c) The dichotomy, checked in its load-bearing direction: every 2PC
  // record an affected transaction persists on the source stream after the
  // outbound record must already name the destination. (Records older than
  // the transfer need no mention — recovery reaches the destination through
  // the outbound record itself. They may still name it legitimately, e.g.
  // when the destination was a declared child all along.)
  for (const auto& t : h.transfers) {
    if (!t.completed) continue;
    for (const TxnId& txn : t.affected) {
      for (const auto& e : h.entries) {
        if (e.txn != txn || e.stream != t.src || !is_2pc(e.kind)) continue;
        if (e.ts <= t.ts) continue;
        if (!lists(e.participants, t.dst) && !lists(e.incr_parts, t.dst)) {
          problems.push_back(
              "transfer id=" + std::to_string(t.id) + " txn=" + txn +
              ": record seq=" + std::to_string(e.seq) + " on " + e.stream +
              " was written after the move but does not name " + t.dst);
        }
      }
    }
  }
  return problems;
}

}  // namespace tree2pc
