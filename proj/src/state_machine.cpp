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

// Participant state machine: message handlers, vote aggregation, the root
// decision, decision fan-out, and the per-variant forget/clear policy.
//
// Key structural rules:
//  - A participant enters PREPARE when its prepare record persists; votes and
//    transfers may arrive in the window between initiation and persistence.
//  - Downstream PREPARE requests fan out at receipt, so prepare-log syncs
//    overlap along the tree and the response path costs 2H legs + 1 sync.
//  - Blocking votes (NO / PREPARE_UNKNOWN) propagate upward immediately; an
//    OK vote waits for the local prepare record and every child's vote.
//  - The decision reaches the user when the root decides; log persistence
//    ordering differs per variant but never delays the reply (the childless
//    one-phase case is the exception and replies after its single record).

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

// Every active child has a recorded vote.
bool votes_complete(const TxnContext& ctx) {
  for (const auto& c : ctx.effective_children()) {
    auto it = ctx.votes.find(c);
    if (it == ctx.votes.end() || it->second == VoteStatus::Unknown) {
      return false;
    }
  }
  return true;
}

}  // namespace

void Simulator::merge_interm(CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  for (const auto& c : ctx.interm_children) {
    if (std::find(ctx.children.begin(), ctx.children.end(), c) ==
            ctx.children.end() &&
        std::find(ctx.incr_children.begin(), ctx.incr_children.end(), c) ==
            ctx.incr_children.end()) {
      ctx.incr_children.push_back(c);
    }
  }
  ctx.interm_children.clear();
}

// ---------------------------------------------------------------------------
// Prepare phase.

void Simulator::handle_prepare_request(StreamState& s, const Message& m,
                                       const CausalPath& path) {
  CtxRt& rt = *find_ctx(m.dst, m.txn);
  TxnContext& ctx = rt.ctx;
  switch (ctx.state) {
    case TxnState::Running:
    case TxnState::Prepare: {
      if (rt.prepare_initiated || ctx.is_root) {
        if (ctx.parent && *ctx.parent == m.src) {
          // Re-delivery from the recorded parent (its retry after a crash or
          // a lost vote): answer idempotently with the vote already cast.
          if (ctx.cast_vote) {
            op_trace(ctx.node, "re-vote", ctx.txn,
                     "vote=" + std::string(to_string(*ctx.cast_vote)));
            schedule_send(mk(MsgType::PrepareResp, ctx.txn, ctx.node, m.src,
                             *ctx.cast_vote),
                          rt.vote_basis);
          } else {
            op_trace(ctx.node, "prepare-request", ctx.txn,
                     "duplicate from parent, vote not cast yet");
          }
          return;
        }
        handle_duplicate_prepare_request(s, rt, m, path);
        return;
      }
      // First PREPARE request: adopt the requester as parent, fan downward
      // immediately, and persist the prepare record in parallel.
      rt.prepare_initiated = true;
      if (!ctx.parent) ctx.parent = m.src;
      merge_interm(rt);
      rt.vote_basis = path;
      const auto fan = ctx.effective_children();
      op_trace(ctx.node, "prepare-request", ctx.txn,
               "parent=" + m.src + " fan=" + std::to_string(fan.size()));
      for (const auto& child : fan) {
        schedule_send(mk(MsgType::PrepareReq, ctx.txn, ctx.node, child), path);
      }
      append_2pc(s, rt, LogEntryKind::PrepareLog, path);
      if (!fan.empty()) arm_retry(rt);
      return;
    }
    case TxnState::Commit:
      // A stale requester; the decision already flowed through the recorded
      // primary edge and this link must not influence it.
      op_trace(ctx.node, "prepare-request", ctx.txn,
               "ignored in committed state");
      return;
    case TxnState::Abort:
    case TxnState::Tombstone:
      op_trace(ctx.node, "prepare-request", ctx.txn, "refused, reply=no");
      schedule_send(
          mk(MsgType::PrepareResp, ctx.txn, ctx.node, m.src, VoteStatus::No),
          path);
      return;
  }
}

void Simulator::handle_duplicate_prepare_request(StreamState& s, CtxRt& rt,
                                                 const Message& m,
                                                 const CausalPath& path) {
  (void)s;
  (void)path;
  TxnContext& ctx = rt.ctx;
  // A second parent reached this context (a transfer built a diamond). Only
  // the local disposition is reported — the subtree's votes travel through
  // the primary edge — and only once the local prepare record is durable.
  if (ctx.is_root || ctx.prepare_log_persisted) {
    VoteStatus vote = (ctx.own_status == OwnStatus::Ok &&
                       ctx.state != TxnState::Abort)
                          ? VoteStatus::Ok
                          : VoteStatus::No;
    op_trace(ctx.node, "duplicate-prepare", ctx.txn,
             "from=" + m.src + " reply=" + to_string(vote));
    schedule_send(mk(MsgType::PrepareResp, ctx.txn, ctx.node, m.src, vote),
                  rt.vote_basis);
    return;
  }
  if (std::find(rt.deferred_dup_voters.begin(), rt.deferred_dup_voters.end(),
                m.src) == rt.deferred_dup_voters.end()) {
    rt.deferred_dup_voters.push_back(m.src);
  }
  op_trace(ctx.node, "duplicate-prepare", ctx.txn,
           "from=" + m.src + " deferred until prepare record persists");
}

void Simulator::handle_orphan_prepare_request(StreamState& s, const Message& m,
                                              const CausalPath& path) {
  VoteStatus vote = orphan_prepare_vote(s, m.txn);
  op_trace(m.dst, "orphan-prepare", m.txn,
           "from=" + m.src + " reply=" + to_string(vote));
  schedule_send(mk(MsgType::PrepareResp, m.txn, m.dst, m.src, vote), path);
}

void Simulator::handle_prepare_response(StreamState& s, const Message& m,
                                        const CausalPath& path) {
  CtxRt* rtp = find_ctx(m.dst, m.txn);
  if (!rtp) {
    trace_line("t=" + std::to_string(now_) + " absorb " + m.encode());
    return;
  }
  CtxRt& rt = *rtp;
  TxnContext& ctx = rt.ctx;
  const auto eff = ctx.effective_children();
  if (std::find(eff.begin(), eff.end(), m.src) == eff.end()) {
    op_trace(ctx.node, "vote-ignored", ctx.txn, "from=" + m.src);
    return;
  }
  auto it = ctx.votes.find(m.src);
  if (it != ctx.votes.end() && it->second != VoteStatus::Unknown) {
    return;  // duplicate vote; the first recorded value stands
  }
  ctx.votes[m.src] = m.vote;
  rt.vote_basis = path_max(rt.vote_basis, path);
  op_trace(ctx.node, "vote", ctx.txn,
           "from=" + m.src + " vote=" + to_string(m.vote));

  if (ctx.is_root) {
    if (!rt.decided && ctx.state == TxnState::Prepare) decide(s, rt);
    return;
  }
  if (m.vote == VoteStatus::No || m.vote == VoteStatus::PrepareUnknown) {
    // A blocking vote propagates without waiting for the local prepare
    // record or the remaining children.
    if (!ctx.cast_vote && rt.prepare_initiated && ctx.parent) {
      ctx.cast_vote = m.vote;
      op_trace(ctx.node, "vote-cast", ctx.txn,
               "vote=" + std::string(to_string(m.vote)) + " (blocking)");
      schedule_send(
          mk(MsgType::PrepareResp, ctx.txn, ctx.node, *ctx.parent, m.vote),
          path);
    }
    return;
  }
  maybe_cast_vote(s, rt);
}

void Simulator::maybe_cast_vote(StreamState& s, CtxRt& rt) {
  (void)s;
  TxnContext& ctx = rt.ctx;
  if (ctx.is_root || ctx.cast_vote || !rt.prepare_initiated || !ctx.parent ||
      !ctx.prepare_log_persisted) {
    return;
  }
  if (ctx.own_status == OwnStatus::No || ctx.state == TxnState::Abort) {
    ctx.cast_vote = VoteStatus::No;
    op_trace(ctx.node, "vote-cast", ctx.txn, "vote=no");
    schedule_send(mk(MsgType::PrepareResp, ctx.txn, ctx.node, *ctx.parent,
                     VoteStatus::No),
                  rt.vote_basis);
    return;
  }
  if (votes_complete(ctx) && ctx.all_votes_ok()) {
    ctx.cast_vote = VoteStatus::Ok;
    op_trace(ctx.node, "vote-cast", ctx.txn, "vote=ok");
    schedule_send(mk(MsgType::PrepareResp, ctx.txn, ctx.node, *ctx.parent,
                     VoteStatus::Ok),
                  rt.vote_basis);
  }
}

// ---------------------------------------------------------------------------
// The decision.

void Simulator::decide(StreamState& s, CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  if (ctx.any_vote_unknown_state()) {
    resolve_inquiry(s, rt);
    return;
  }
  if (ctx.own_status == OwnStatus::No || ctx.any_vote_blocking()) {
    rt.decided = true;
    rt.decide_basis = rt.vote_basis;
    op_trace(ctx.node, "decide", ctx.txn, "outcome=aborted");
    respond_to_user(s, &rt, rt.ctx.txn, UserOutcome::Aborted, rt.decide_basis);
    bool write_log = !(cfg_.variant.clear_stage &&
                       !ctx.effective_children().empty());
    enter_abort(s, rt, rt.decide_basis, write_log);
    return;
  }
  if (votes_complete(ctx) && ctx.all_votes_ok()) {
    rt.decided = true;
    rt.decide_basis = rt.vote_basis;
    op_trace(ctx.node, "decide", ctx.txn, "outcome=committed");
    respond_to_user(s, &rt, rt.ctx.txn, UserOutcome::Committed, rt.decide_basis);
    enter_commit(s, rt, rt.decide_basis);
  }
}

void Simulator::enter_commit(StreamState& s, CtxRt& rt,
                             const CausalPath& path) {
  TxnContext& ctx = rt.ctx;
  ctx.state = TxnState::Commit;
  rt.decided = true;
  rt.decide_basis = path;
  merge_interm(rt);
  ctx.acks.clear();
  const auto eff = ctx.effective_children();
  for (const auto& child : eff) ctx.acks[child] = false;

  if (ctx.is_root && cfg_.variant.release_messages && !eff.empty()) {
    // Locks release one message leg after the decision; the COMMIT requests
    // follow once the commit record is durable.
    for (const auto& child : eff) {
      schedule_send(mk(MsgType::Release, ctx.txn, ctx.node, child), path);
    }
    rt.commit_fanned_out = false;
  } else {
    fan_out_decision(s, rt, MsgType::Commit, path);
  }

  bool write_log = !ctx.is_root || !cfg_.variant.clear_stage;
  if (write_log) {
    append_2pc(s, rt, LogEntryKind::CommitLog, path);
  } else {
    rt.terminal_log_persisted = true;  // the clear-stage coordinator keeps
                                       // no record of its own
  }
  if (ctx.is_root &&
      (cfg_.variant.release_messages || cfg_.variant.clear_stage)) {
    record_lock_release(s, rt, path);
  }
  if (!ctx.acks.empty()) {
    arm_retry(rt);
  } else {
    cancel_retry(rt);
  }
  maybe_forget(s, rt);
}

void Simulator::enter_abort(StreamState& s, CtxRt& rt, const CausalPath& path,
                            bool write_log) {
  TxnContext& ctx = rt.ctx;
  ctx.state = TxnState::Abort;
  ctx.own_status = OwnStatus::No;
  rt.decided = true;
  rt.decide_basis = path;
  merge_interm(rt);
  ctx.acks.clear();
  for (const auto& child : ctx.effective_children()) ctx.acks[child] = false;
  fan_out_decision(s, rt, MsgType::Abort, path);
  if (write_log) {
    append_2pc(s, rt, LogEntryKind::AbortLog, path);
  } else {
    rt.terminal_log_persisted = true;
  }
  if (ctx.is_root &&
      (cfg_.variant.release_messages || cfg_.variant.clear_stage)) {
    record_lock_release(s, rt, path);
  }
  if (!ctx.acks.empty()) {
    arm_retry(rt);
  } else {
    cancel_retry(rt);
  }
  maybe_forget(s, rt);
}

void Simulator::fan_out_decision(StreamState& s, CtxRt& rt, MsgType type,
                                 const CausalPath& path) {
  (void)s;
  TxnContext& ctx = rt.ctx;
  for (const auto& child : ctx.effective_children()) {
    if (!ctx.acks.count(child)) ctx.acks[child] = false;
    schedule_send(mk(type, ctx.txn, ctx.node, child), path);
  }
  rt.commit_fanned_out = true;
}

// ---------------------------------------------------------------------------
// Decision receipt.

void Simulator::handle_commit_request(StreamState& s, const Message& m,
                                      const CausalPath& path) {
  CtxRt& rt = *find_ctx(m.dst, m.txn);
  TxnContext& ctx = rt.ctx;
  switch (ctx.state) {
    case TxnState::Running:
    case TxnState::Prepare:
      if (!ctx.parent) ctx.parent = m.src;
      op_trace(ctx.node, "commit", ctx.txn, "from=" + m.src);
      cancel_retry(rt);
      enter_commit(s, rt, path);
      return;
    case TxnState::Commit:
      if (rt.terminal_log_persisted) {
        op_trace(ctx.node, "commit", ctx.txn, "duplicate, re-ack");
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, m.src),
                      CausalPath{0, 0, now_});
      }
      return;
    case TxnState::Abort:
    case TxnState::Tombstone:
      if (ctx.state == TxnState::Tombstone &&
          !stream_has_entry(s.id, m.txn, LogEntryKind::AbortLog)) {
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, m.src),
                      CausalPath{0, 0, now_});
        return;
      }
      record_violation(violation::kProtocolError,
                       "commit request reached " + ctx.node + " for " +
                           ctx.txn + " after a local abort");
      return;
  }
}

void Simulator::handle_abort_request(StreamState& s, const Message& m,
                                     const CausalPath& path) {
  CtxRt& rt = *find_ctx(m.dst, m.txn);
  TxnContext& ctx = rt.ctx;
  switch (ctx.state) {
    case TxnState::Running:
    case TxnState::Prepare:
      if (!ctx.parent) ctx.parent = m.src;
      op_trace(ctx.node, "abort", ctx.txn, "from=" + m.src);
      cancel_retry(rt);
      enter_abort(s, rt, path, /*write_log=*/true);
      return;
    case TxnState::Abort:
      if (rt.terminal_log_persisted) {
        op_trace(ctx.node, "abort", ctx.txn, "duplicate, re-ack");
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, m.src),
                      CausalPath{0, 0, now_});
      }
      return;
    case TxnState::Commit:
    case TxnState::Tombstone:
      if (ctx.state == TxnState::Tombstone &&
          !stream_has_entry(s.id, m.txn, LogEntryKind::CommitLog)) {
        schedule_send(mk(MsgType::Ack, ctx.txn, ctx.node, m.src),
                      CausalPath{0, 0, now_});
        return;
      }
      record_violation(violation::kProtocolError,
                       "abort request reached " + ctx.node + " for " +
                           ctx.txn + " after a local commit");
      return;
  }
}

void Simulator::handle_orphan_commit_request(StreamState& s, const Message& m,
                                             const CausalPath& path) {
  (void)s;
  (void)path;
  if (stream_has_entry(m.dst, m.txn, LogEntryKind::AbortLog)) {
    record_violation(violation::kProtocolError,
                     "commit request reached " + m.dst + " for " + m.txn +
                         " which holds an abort record");
    return;
  }
  // No context and no contradicting record: the transaction finished here
  // long ago (or never ran); acknowledge so the requester can forget.
  op_trace(m.dst, "orphan-commit", m.txn, "from=" + m.src + " ack");
  schedule_send(mk(MsgType::Ack, m.txn, m.dst, m.src), CausalPath{0, 0, now_});
}

void Simulator::handle_orphan_abort_request(StreamState& s, const Message& m,
                                            const CausalPath& path) {
  (void)s;
  (void)path;
  if (stream_has_entry(m.dst, m.txn, LogEntryKind::CommitLog)) {
    record_violation(violation::kProtocolError,
                     "abort request reached " + m.dst + " for " + m.txn +
                         " which holds a commit record");
    return;
  }
  op_trace(m.dst, "orphan-abort", m.txn, "from=" + m.src + " ack");
  schedule_send(mk(MsgType::Ack, m.txn, m.dst, m.src), CausalPath{0, 0, now_});
}

void Simulator::handle_ack(StreamState& s, const Message& m,
                           const CausalPath& path) {
  (void)path;
  CtxRt* rtp = find_ctx(m.dst, m.txn);
  if (!rtp) {
    trace_line("t=" + std::to_string(now_) + " absorb " + m.encode());
    return;
  }
  CtxRt& rt = *rtp;
  TxnContext& ctx = rt.ctx;
  if (ctx.state != TxnState::Commit && ctx.state != TxnState::Abort) {
    op_trace(ctx.node, "ack-ignored", ctx.txn, "from=" + m.src);
    return;
  }
  auto it = ctx.acks.find(m.src);
  if (it == ctx.acks.end() || it->second) return;
  it->second = true;
  op_trace(ctx.node, "ack", ctx.txn, "from=" + m.src);
  if (ctx.all_acked()) {
    cancel_retry(rt);
    maybe_forget(s, rt);
  }
}

void Simulator::handle_release(StreamState& s, const Message& m,
                               const CausalPath& path) {
  CtxRt* rtp = find_ctx(m.dst, m.txn);
  if (!rtp) {
    trace_line("t=" + std::to_string(now_) + " absorb " + m.encode());
    return;
  }
  CtxRt& rt = *rtp;
  if (rt.release_received) return;
  rt.release_received = true;
  op_trace(rt.ctx.node, "release", rt.ctx.txn, "from=" + m.src);
  record_lock_release(s, rt, path);
  for (const auto& child : rt.ctx.effective_children()) {
    schedule_send(mk(MsgType::Release, rt.ctx.txn, rt.ctx.node, child), path);
  }
}

void Simulator::handle_clear(StreamState& s, const Message& m,
                             const CausalPath& path) {
  (void)path;
  CtxRt* rtp = find_ctx(m.dst, m.txn);
  if (!rtp) {
    trace_line("t=" + std::to_string(now_) + " absorb " + m.encode());
    return;
  }
  rtp->clear_received = true;
  op_trace(rtp->ctx.node, "clear", rtp->ctx.txn, "from=" + m.src);
  maybe_forget(s, *rtp);
}

// ---------------------------------------------------------------------------
// Start, forget, and local events.

void Simulator::start_two_phase_commit(StreamState& s, CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  rt.user_attached = true;
  rt.prepare_initiated = true;
  merge_interm(rt);

  if (ctx.own_status == OwnStatus::No) {
    rt.decided = true;
    rt.decide_basis = CausalPath{0, 0, now_};
    op_trace(ctx.node, "decide", ctx.txn, "outcome=aborted (local)");
    respond_to_user(s, &rt, rt.ctx.txn, UserOutcome::Aborted, rt.decide_basis);
    bool write_log = !(cfg_.variant.clear_stage &&
                       !ctx.effective_children().empty());
    enter_abort(s, rt, rt.decide_basis, write_log);
    return;
  }

  const auto eff = ctx.effective_children();
  if (eff.empty()) {
    // One-phase: the root is the only participant, so a single synchronous
    // commit record decides and the reply waits for it. This applies under
    // every variant — without the record the outcome would not be durable
    // anywhere.
    rt.decided = true;
    ctx.state = TxnState::Commit;
    rt.decide_basis = CausalPath{0, 0, now_};
    op_trace(ctx.node, "one-phase", ctx.txn, "");
    append_2pc(s, rt, LogEntryKind::CommitLog, rt.decide_basis);
    return;
  }

  ctx.state = TxnState::Prepare;
  rt.vote_basis = CausalPath{0, 0, now_};
  op_trace(ctx.node, "start", ctx.txn, "fan=" + std::to_string(eff.size()));
  for (const auto& child : eff) {
    schedule_send(mk(MsgType::PrepareReq, ctx.txn, ctx.node, child),
                  rt.vote_basis);
  }
  arm_retry(rt);
}

void Simulator::maybe_forget(StreamState& s, CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  if (ctx.state != TxnState::Commit && ctx.state != TxnState::Abort) return;
  if (rt.forgotten) return;
  if (!rt.terminal_log_persisted || !ctx.all_acked()) return;
  if (cfg_.variant.clear_stage && !ctx.is_root && !rt.clear_received) return;
  forget_ctx(s, rt);
}

void Simulator::forget_ctx(StreamState& s, CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  rt.forgotten = true;
  cancel_retry(rt);
  op_trace(ctx.node, "forget", ctx.txn, "");
  const ProtocolVariant& v = cfg_.variant;
  if (v.clear_stage) {
    // The clear wave flows down the tree; every participant persists a clear
    // record before dropping its context, the coordinator keeps nothing.
    for (const auto& child : ctx.effective_children()) {
      schedule_send(mk(MsgType::Clear, ctx.txn, ctx.node, child),
                    CausalPath{0, 0, now_});
    }
    if (ctx.is_root) {
      tombstone(s, rt);
    } else {
      append_clear(s, rt, /*sync=*/true, CausalPath{0, 0, now_});
    }
    return;
  }
  if (v.d2pc_clear) {
    if (ctx.is_root) {
      append_clear(s, rt, /*sync=*/false, CausalPath{0, 0, now_});
    }
    tombstone(s, rt);
    return;
  }
  // Coordinator-commit-log baseline: interior nodes write an asynchronous
  // clear record (leaves have nothing to clear).
  if (!ctx.effective_children().empty()) {
    append_clear(s, rt, /*sync=*/false, CausalPath{0, 0, now_});
  }
  tombstone(s, rt);
}

void Simulator::tombstone(StreamState& s, CtxRt& rt) {
  rt.ctx.state = TxnState::Tombstone;
  op_trace(rt.ctx.node, "tombstone", rt.ctx.txn, "");
  if (rt.reclaim_requested) {
    reclaim_context(s, rt.ctx.txn);  // invalidates rt
  }
}

void Simulator::add_intermediate_participant(CtxRt& rt,
                                             const LogStreamId& dst) {
  TxnContext& ctx = rt.ctx;
  if (dst == ctx.node) return;
  if (ctx.state == TxnState::Tombstone) return;  // everything already durable
  const auto eff = ctx.effective_children();
  if (std::find(eff.begin(), eff.end(), dst) != eff.end()) return;
  ctx.interm_children.push_back(dst);
  op_trace(ctx.node, "add-participant", ctx.txn, "child=" + dst);
  if (ctx.state == TxnState::Commit || ctx.state == TxnState::Abort) {
    // Joined after the decision: it learns the outcome from here and must
    // acknowledge before this context can be forgotten.
    ctx.acks[dst] = false;
    if (rt.commit_fanned_out) {
      MsgType type = ctx.state == TxnState::Commit ? MsgType::Commit
                                                   : MsgType::Abort;
      schedule_send(mk(type, ctx.txn, ctx.node, dst), rt.decide_basis);
    }
    arm_retry(rt);
    return;
  }
  if (rt.prepare_initiated && !ctx.cast_vote && !rt.decided) {
    // Joined mid-prepare: it must vote before this node can.
    schedule_send(mk(MsgType::PrepareReq, ctx.txn, ctx.node, dst),
                  rt.vote_basis);
  }
}

void Simulator::internal_abort(StreamState& s, const TxnId& txn) {
  CtxRt* rtp = find_ctx(s.id, txn);
  if (!rtp) {
    op_trace(s.id, "internal-abort", txn, "no context");
    return;
  }
  CtxRt& rt = *rtp;
  TxnContext& ctx = rt.ctx;
  if (ctx.state != TxnState::Running) {
    op_trace(ctx.node, "internal-abort", txn,
             "ignored in state " + std::string(to_string(ctx.state)));
    return;
  }
  op_trace(ctx.node, "internal-abort", txn, "");
  ctx.own_status = OwnStatus::No;
  CausalPath p{0, 0, now_};
  if (!ctx.is_root && rt.prepare_initiated && ctx.parent && !ctx.cast_vote) {
    ctx.cast_vote = VoteStatus::No;
    schedule_send(
        mk(MsgType::PrepareResp, txn, ctx.node, *ctx.parent, VoteStatus::No),
        p);
  }
  enter_abort(s, rt, p, /*write_log=*/true);
}

void Simulator::local_no(StreamState& s, const TxnId& txn) {
  CtxRt* rtp = find_ctx(s.id, txn);
  if (!rtp) {
    op_trace(s.id, "local-no", txn, "no context");
    return;
  }
  TxnContext& ctx = rtp->ctx;
  if (ctx.state == TxnState::Running && !ctx.cast_vote) {
    ctx.own_status = OwnStatus::No;
    op_trace(ctx.node, "local-no", txn, "");
  } else {
    op_trace(ctx.node, "local-no", txn, "ignored");
  }
}

void Simulator::record_lock_release(StreamState& s, CtxRt& rt,
                                    const CausalPath& path) {
  (void)s;
  if (rt.lock_release) return;  // first release wins; later paths are longer
  rt.lock_release = path;
  op_trace(rt.ctx.node, "lock-release", rt.ctx.txn,
           "hops=" + std::to_string(path.hops) +
               " syncs=" + std::to_string(path.syncs));
  TxnGlobal& g = global(rt.ctx.txn);
  g.lock_release =
      g.lock_release ? path_max(*g.lock_release, path) : path;
}

}  // namespace tree2pc
