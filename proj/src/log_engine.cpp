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

// Log engine: append scheduling, persistence effects, the per-stream lock
// shared with the transfer engine, context reclamation, and crash recovery.
//
// A 2PC append holds the stream lock until it persists; a transfer holds it
// from its outbound record until the inbound record persists on the
// destination. Appends that find the lock busy (or their context blocked by
// an in-flight transfer) are deferred and resume when the lock frees — by
// then the transfer's additions are merged, so the fresh record names the
// destination exactly when the move is not visible by timestamp order.

#include <algorithm>

#include "tree2pc/sim.hpp"

namespace tree2pc {

namespace {

Message mk(MsgType type, const TxnId& txn, const LogStreamId& src,
           const LogStreamId& dst, VoteStatus vote = VoteStatus::Unknown) {
  Message m;
  m.type = type;
  m.txn = txn;
  m.src = src;
  m.dst = dst;
  m.vote = vote;
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Appends.

void Simulator::append_2pc(StreamState& s, CtxRt& rt, LogEntryKind kind,
                           const CausalPath& path) {
  TxnContext& ctx = rt.ctx;
  if (ctx.blocked_from_logging || s.lock != StreamState::Lock::Free) {
    // Defer behind the transfer (or the append holding the lock). Only the
    // most recent kind matters: a decision reached while the prepare record
    // waits supersedes it.
    rt.deferred_append = kind;
    rt.deferred_append_path = path_max(rt.deferred_append_path, path);
    op_trace(ctx.node, "append-deferred", ctx.txn,
             std::string("kind=") + to_string(kind) +
                 (ctx.blocked_from_logging ? " reason=blocked"
                                           : " reason=lock"));
    return;
  }
  s.lock = StreamState::Lock::Append;
  s.lock_txn = ctx.txn;
  merge_interm(rt);
  LogEntry e;
  e.stream = s.id;
  e.kind = kind;
  e.txn = ctx.txn;
  e.participants = ctx.children;
  e.incr_parts = ctx.incr_children;
  e.parent = ctx.parent;
  if (kind == LogEntryKind::CommitLog || kind == LogEntryKind::AbortLog) {
    rt.terminal_log_pending = true;
  }
  append_raw(s, std::move(e), /*sync=*/true, /*holds_lock=*/true, path, 0);
}

void Simulator::append_clear(StreamState& s, CtxRt& rt, bool sync,
                             const CausalPath& path) {
  // Clear records bypass the lock: they carry no participant bookkeeping and
  // cannot race a transfer's affected-set collection.
  LogEntry e;
  e.stream = s.id;
  e.kind = LogEntryKind::ClearLog;
  e.txn = rt.ctx.txn;
  append_raw(s, std::move(e), sync, /*holds_lock=*/false, path, 0);
}

std::uint64_t Simulator::append_raw(StreamState& s, LogEntry entry, bool sync,
                                    bool holds_lock, const CausalPath& path,
                                    std::uint64_t transfer_id) {
  entry.seq = s.next_seq++;
  std::uint64_t id = next_append_id_++;
  op_trace(s.id, "append", entry.txn,
           std::string("kind=") + to_string(entry.kind) +
               " seq=" + std::to_string(entry.seq) +
               (sync ? " sync=1" : " sync=0"));
  PendingAppend pa;
  pa.id = id;
  pa.entry = std::move(entry);
  pa.sync = sync;
  pa.holds_lock = holds_lock;
  pa.path = path;
  pa.transfer_id = transfer_id;
  s.pending.emplace(id, std::move(pa));

  SimEvent ev;
  ev.kind = SimEvent::Kind::LogPersisted;
  ev.at = now_ + cfg_.log_sync_delay + draw_jitter();
  ev.stream = s.id;
  ev.append_id = id;
  enqueue(std::move(ev));
  return id;
}

// ---------------------------------------------------------------------------
// Persistence effects.

void Simulator::on_log_persisted(StreamState& s, std::uint64_t append_id) {
  if (s.crashed) return;
  auto it = s.pending.find(append_id);
  if (it == s.pending.end()) return;  // the crash took this append with it
  PendingAppend pa = std::move(it->second);
  s.pending.erase(it);

  LogEntry entry = pa.entry;
  entry.ts = ++next_logical_ts_;
  entry.sync = pa.sync;
  s.log.push_back(entry);
  if (pa.sync) {
    ++sync_logs_;
  } else {
    ++async_logs_;
  }
  CausalPath path = pa.path.sync(now_);
  op_trace(s.id, "persist", entry.txn,
           std::string("kind=") + to_string(entry.kind) +
               " seq=" + std::to_string(entry.seq) +
               " ts=" + std::to_string(entry.ts));

  switch (entry.kind) {
    case LogEntryKind::PrepareLog:
    case LogEntryKind::CommitLog:
    case LogEntryKind::AbortLog:
      on_2pc_persisted(s, entry, path);
      break;
    case LogEntryKind::ClearLog: {
      CtxRt* rt = find_ctx(s.id, entry.txn);
      if (rt) {
        rt->clear_log_done = true;
        if (cfg_.variant.clear_stage) tombstone(s, *rt);
      }
      break;
    }
    case LogEntryKind::TransferOutLog:
      transfer_out_persisted(transfers_.at(pa.transfer_id), entry, path);
      break;
    case LogEntryKind::TransferInLog:
      transfer_in_persisted(transfers_.at(pa.transfer_id), entry, path);
      break;
  }
  if (pa.holds_lock) release_stream_lock(s);
}

void Simulator::on_2pc_persisted(StreamState& s, const LogEntry& entry,
                                 const CausalPath& path) {
  TxnGlobal& g = global(entry.txn);
  const bool terminal = entry.kind == LogEntryKind::CommitLog ||
                        entry.kind == LogEntryKind::AbortLog;
  if (entry.kind == LogEntryKind::CommitLog) {
    if (g.abort_logged && !g.divergence_flagged) {
      g.divergence_flagged = true;
      record_violation(violation::kCommitAbortDivergence,
                       "txn " + entry.txn +
                           " persisted a commit record after an abort record");
    }
    g.commit_logged = true;
    record_tdt(s, entry.txn, TxnState::Commit);
  } else if (entry.kind == LogEntryKind::AbortLog) {
    if (g.commit_logged && !g.divergence_flagged) {
      g.divergence_flagged = true;
      record_violation(violation::kCommitAbortDivergence,
                       "txn " + entry.txn +
                           " persisted an abort record after a commit record");
    }
    g.abort_logged = true;
    record_tdt(s, entry.txn, TxnState::Abort);
  }
  if (terminal && s.id == g.root && !g.completion) {
    g.completion = entry.ts;  // the decision is now durable at the top
  }

  CtxRt* rtp = find_ctx(s.id, entry.txn);
  if (!rtp) return;
  CtxRt& rt = *rtp;
  TxnContext& ctx = rt.ctx;
  ctx.last_2pc_log_ts = entry.ts;

  switch (entry.kind) {
    case LogEntryKind::PrepareLog: {
      ctx.prepare_log_persisted = true;
      if (ctx.state == TxnState::Running) ctx.state = TxnState::Prepare;
      rt.vote_basis = path_max(rt.vote_basis, path);
      // Answer duplicate requesters that arrived before the record was
      // durable: only the local disposition, nothing aggregated.
      auto voters = std::move(rt.deferred_dup_voters);
      rt.deferred_dup_voters.clear();
      for (const auto& src : voters) {
        VoteStatus vote = (ctx.own_status == OwnStatus::Ok &&
                           ctx.state != TxnState::Abort)
                              ? VoteStatus::Ok
                              : VoteStatus::No;
        op_trace(ctx.node, "deferred-reply", ctx.txn,
                 "to=" + src + " vote=" + to_string(vote));
        schedule_send(mk(MsgType::PrepareResp, ctx.txn, ctx.node, src, vote),
                      rt.vote_basis);
      }
      maybe_cast_vote(s, rt);
      break;
    }
    case LogEntryKind::CommitLog: {
      rt.terminal_log_pending = false;
      rt.terminal_log_persisted = true;
      if (ctx.is_root) {
        if (cfg_.variant.release_messages && !rt.commit_fanned_out) {
          fan_out_decision(s, rt, MsgType::Commit, path);
        }
        if (rt.user_attached && rt.responses_sent == 0) {
          respond_to_user(s, &rt, rt.ctx.txn, UserOutcome::Committed, path);
        }
      } else if (ctx.parent) {
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, *ctx.parent), path);
      }
      record_lock_release(s, rt, path);
      maybe_forget(s, rt);
      break;
    }
    case LogEntryKind::AbortLog: {
      rt.terminal_log_pending = false;
      rt.terminal_log_persisted = true;
      if (ctx.is_root) {
        if (rt.user_attached && rt.responses_sent == 0) {
          respond_to_user(s, &rt, rt.ctx.txn, UserOutcome::Aborted, path);
        }
      } else if (ctx.parent) {
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, *ctx.parent), path);
      }
      record_lock_release(s, rt, path);
      maybe_forget(s, rt);
      break;
    }
    default:
      break;
  }
}

void Simulator::release_stream_lock(StreamState& s) {
  s.lock = StreamState::Lock::Free;
  s.lock_txn.clear();
  s.lock_transfer = 0;
  try_start_deferred_appends(s);
}

void Simulator::try_start_deferred_appends(StreamState& s) {
  if (s.lock != StreamState::Lock::Free) return;
  for (auto& [txn, rt] : s.ctxs) {
    (void)txn;
    if (!rt.deferred_append || rt.ctx.blocked_from_logging) continue;
    LogEntryKind kind = *rt.deferred_append;
    CausalPath path = rt.deferred_append_path;
    rt.deferred_append.reset();
    rt.deferred_append_path = CausalPath{};
    op_trace(rt.ctx.node, "append-resume", rt.ctx.txn,
             std::string("kind=") + to_string(kind));
    append_2pc(s, rt, kind, path);
    if (s.lock != StreamState::Lock::Free) return;  // one append at a time
  }
}

// ---------------------------------------------------------------------------
// Reclamation.

void Simulator::reclaim_context(StreamState& s, const TxnId& txn) {
  CtxRt* rt = find_ctx(s.id, txn);
  if (rt && rt->ctx.state != TxnState::Tombstone) {
    rt->reclaim_requested = true;
    op_trace(s.id, "reclaim", txn, "deferred until tombstone");
    return;
  }
  op_trace(s.id, "reclaim", txn, "");
  TxnGlobal& g = global(txn);
  for (auto& e : s.log) {
    if (e.txn == txn) e.reclaimed = true;
  }
  g.reclaimed_at[s.id] = ++next_logical_ts_;
  if (s.id == g.root) g.root_reclaimed = true;
  if (rt) s.ctxs.erase(txn);
}

// ---------------------------------------------------------------------------
// Crash and recovery. Persisted records, hosted partitions, and the
// descriptor table survive; contexts, in-flight appends, parked work, and
// the stream lock do not.

void Simulator::crash(StreamState& s) {
  s.crashed = true;
  s.ctxs.clear();
  s.pending.clear();
  s.lock = StreamState::Lock::Free;
  s.lock_txn.clear();
  s.lock_transfer = 0;
  for (auto& [id, task] : transfers_) {
    (void)id;
    if (task.src == s.id && task.phase == TransferTask::Phase::OutLog) {
      // The outbound record died with the source; the transfer cannot
      // finish. (A still-pending transfer keeps its chance: its next step
      // re-checks the source.)
      fail_transfer(task, "source stream crashed");
    } else if (task.dst == s.id && task.phase == TransferTask::Phase::InLog) {
      // The inbound append died; re-drive it when the destination returns.
      task.phase = TransferTask::Phase::OutLog;
      s.redrive_in.push_back(task.id);
    }
  }
}

void Simulator::recover(StreamState& s) {
  s.crashed = false;
  rebuild_contexts_from_log(s);
  auto parked = std::move(s.parked);
  s.parked.clear();
  for (auto& [msg, path] : parked) {
    SimEvent ev;
    ev.kind = SimEvent::Kind::Deliver;
    ev.at = now_;
    ev.msg = msg;
    ev.path = CausalPath{path.hops, path.syncs, now_};
    enqueue(std::move(ev));
  }
  auto redrive = std::move(s.redrive_in);
  s.redrive_in.clear();
  for (std::uint64_t id : redrive) {
    TransferTask& task = transfers_.at(id);
    if (task.phase == TransferTask::Phase::OutLog) {
      issue_transfer_in(task, task.path);
    }
  }
}

void Simulator::rebuild_contexts_from_log(StreamState& s) {
  struct Residue {
    const LogEntry* last_2pc = nullptr;
    bool cleared = false;
    bool migrated_in = false;
  };
  std::map<TxnId, Residue> residues;
  for (const auto& e : s.log) {
    if (e.reclaimed) continue;
    switch (e.kind) {
      case LogEntryKind::PrepareLog:
      case LogEntryKind::CommitLog:
      case LogEntryKind::AbortLog:
        residues[e.txn].last_2pc = &e;  // seq order: the latest wins
        break;
      case LogEntryKind::ClearLog:
        residues[e.txn].cleared = true;
        break;
      case LogEntryKind::TransferInLog:
        for (const auto& txn : e.affected_txns) {
          residues[txn].migrated_in = true;
        }
        break;
      default:
        break;
    }
  }

  for (const auto& [txn, residue] : residues) {
    // A clear record means the context finished and was dropped on purpose;
    // an absent context already answers stray requests correctly.
    if (residue.cleared) continue;
    if (!residue.last_2pc && !residue.migrated_in) continue;

    CtxRt rt;
    TxnContext& ctx = rt.ctx;
    ctx.txn = txn;
    ctx.node = s.id;
    ctx.is_root = (global(txn).root == s.id);

    // Re-derive coverage: declared writes, then the transfer service's
    // applied moves replayed in placement order. The service's descriptor
    // table is durable; the local outbound records alone would lie here — a
    // transfer whose source crashed before the inbound record persisted
    // never moved anything, yet its outbound record survives.
    for (const auto& decl : scenario_.txns) {
      if (decl.id != txn) continue;
      for (const auto& [tstream, parts] : decl.touches) {
        if (tstream == s.id) {
          ctx.touched_partitions.insert(parts.begin(), parts.end());
        }
      }
    }
    std::vector<const TransferTask*> applied;
    for (const auto& [tid, t] : transfers_) {
      (void)tid;
      if (t.phase == TransferTask::Phase::Done) applied.push_back(&t);
    }
    std::sort(applied.begin(), applied.end(),
              [](const TransferTask* a, const TransferTask* b) {
                return a->applied_ts < b->applied_ts;
              });
    for (const TransferTask* t : applied) {
      for (const auto& m : t->migrations) {
        if (m.txn != txn || !m.covers) continue;
        if (t->src == s.id) ctx.touched_partitions.erase(t->partition);
        if (t->dst == s.id && m.state_at_collect != TxnState::Tombstone) {
          ctx.touched_partitions.insert(t->partition);
        }
      }
    }
    // A move still in flight swept this context before the crash; restore
    // the block so no record slips out before the destination is merged.
    for (const auto& [tid, t] : transfers_) {
      (void)tid;
      if (t.src != s.id) continue;
      if (t.phase != TransferTask::Phase::OutLog &&
          t.phase != TransferTask::Phase::InLog) {
        continue;
      }
      for (const auto& m : t.migrations) {
        if (m.txn == txn) ctx.blocked_from_logging = true;
      }
    }

    if (!residue.last_2pc) {
      // Only an inbound migration record: a running participant again, to be
      // prepared (or decided) by its parent's re-drive.
      s.ctxs.emplace(txn, std::move(rt));
      op_trace(s.id, "rebuild", txn, "state=running");
      continue;
    }

    const LogEntry& e = *residue.last_2pc;
    ctx.parent = e.parent;
    ctx.children = e.participants;
    ctx.incr_children = e.incr_parts;
    ctx.last_2pc_log_ts = e.ts;
    // Volatile additions from moves that applied after this record's
    // timestamp re-enter from the transfer service. (Moves still in flight
    // graft their destination in when their inbound record persists.)
    for (const TransferTask* t : applied) {
      if (t->src != s.id || t->ts <= e.ts) continue;
      bool affected = false;
      for (const auto& m : t->migrations) affected |= (m.txn == txn);
      if (!affected) continue;
      const auto eff = ctx.effective_children();
      if (t->dst != s.id &&
          std::find(eff.begin(), eff.end(), t->dst) == eff.end()) {
        ctx.interm_children.push_back(t->dst);
      }
    }

    switch (e.kind) {
      case LogEntryKind::PrepareLog: {
        ctx.state = TxnState::Prepare;
        rt.prepare_initiated = true;
        ctx.prepare_log_persisted = true;
        rt.vote_basis = CausalPath{0, 0, now_};
        op_trace(s.id, "rebuild", txn, "state=prepare");
        auto [pos, ok] = s.ctxs.emplace(txn, std::move(rt));
        (void)ok;
        CtxRt& placed = pos->second;
        const auto fan = placed.ctx.effective_children();
        for (const auto& child : fan) {
          schedule_send(mk(MsgType::PrepareReq, txn, s.id, child),
                        placed.vote_basis);
        }
        if (!fan.empty()) arm_retry(placed);
        maybe_cast_vote(s, placed);  // a leaf re-votes immediately
        break;
      }
      case LogEntryKind::CommitLog:
      case LogEntryKind::AbortLog: {
        const bool committed = e.kind == LogEntryKind::CommitLog;
        ctx.state = committed ? TxnState::Commit : TxnState::Abort;
        if (!committed) ctx.own_status = OwnStatus::No;
        rt.decided = true;
        rt.prepare_initiated = true;
        rt.terminal_log_persisted = true;
        rt.commit_fanned_out = true;
        rt.decide_basis = CausalPath{0, 0, now_};
        op_trace(s.id, "rebuild", txn,
                 std::string("state=") + (committed ? "commit" : "abort"));
        auto [pos, ok] = s.ctxs.emplace(txn, std::move(rt));
        (void)ok;
        CtxRt& placed = pos->second;
        TxnContext& pctx = placed.ctx;
        for (const auto& child : pctx.effective_children()) {
          pctx.acks[child] = false;
          schedule_send(mk(committed ? MsgType::Commit : MsgType::Abort, txn,
                           s.id, child),
                        placed.decide_basis);
        }
        if (pctx.parent) {
          schedule_send(mk(MsgType::Ack, txn, s.id, *pctx.parent),
                        placed.decide_basis);
        }
        if (!pctx.acks.empty()) arm_retry(placed);
        maybe_forget(s, placed);
        break;
      }
      default:
        break;
    }
  }
}

}  // namespace tree2pc
