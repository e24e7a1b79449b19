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

// Unknown-state handling: what a stream answers when asked to prepare a
// transaction it has no context for, and how a coordinator whose own context
// is gone reconstructs an answer for the user.
//
// The baseline answers a context-less prepare request with NO — cheap, and
// wrong exactly when the transaction had already committed and been cleaned
// up; a coordinator rebuilt after reclamation then turns that lie into a
// contradictory ABORTED. The honest variant answers PREPARE_UNKNOWN instead,
// and the coordinator resolves it by provenance: a fresh coordinator (no
// answer can have escaped it) aborts safely; a recreated one reports
// TRANS_UNKNOWN and leaves no record claiming either way. The terminated-
// transaction data table short-circuits most of these questions by
// remembering recent outcomes durably, at the price of retention.

#include <string>

#include "tree2pc/sim.hpp"

namespace tree2pc {

VoteStatus Simulator::orphan_prepare_vote(StreamState& s, const TxnId& txn) {
  if (cfg_.variant.tdt) {
    if (auto outcome = tdt_lookup(s, txn)) {
      return *outcome == TxnState::Commit ? VoteStatus::Ok : VoteStatus::No;
    }
  }
  if (cfg_.variant.unknown_states) return VoteStatus::PrepareUnknown;
  // The baseline lie: no trace of the transaction is answered as a NO vote,
  // indistinguishable from data that was never prepared at all.
  return VoteStatus::No;
}

void Simulator::root_user_response(StreamState& s, const TxnId& txn) {
  TxnGlobal& g = global(txn);
  if (CtxRt* rtp = find_ctx(s.id, txn)) {
    CtxRt& rt = *rtp;
    switch (rt.ctx.state) {
      case TxnState::Running:
        if (!rt.prepare_initiated && !rt.decided) {
          start_two_phase_commit(s, rt);
        } else {
          op_trace(s.id, "user-request", txn, "already in flight");
        }
        return;
      case TxnState::Prepare:
        op_trace(s.id, "user-request", txn, "already in flight");
        return;
      case TxnState::Commit:
        if (rt.responses_sent == 0 && !rt.terminal_log_persisted) {
          // One-phase in progress: the reply rides on the record's persist.
          op_trace(s.id, "user-request", txn, "awaiting commit record");
          return;
        }
        respond_to_user(s, &rt, txn,
                        g.responded_outcome.value_or(UserOutcome::Committed),
                        rt.decide_basis);
        return;
      case TxnState::Abort:
        // A coordinator that resolved unknown votes holds ABORT state but
        // answered TRANS_UNKNOWN; repeat whichever answer was given.
        respond_to_user(s, &rt, txn,
                        g.responded_outcome.value_or(UserOutcome::Aborted),
                        rt.decide_basis);
        return;
      case TxnState::Tombstone:
        // The only way a root finishes without ever answering is an abort
        // decided before the user first asked.
        respond_to_user(s, &rt, txn,
                        g.responded_outcome.value_or(UserOutcome::Aborted),
                        CausalPath{0, 0, now_});
        return;
    }
  }

  // No context: its space was reclaimed. Try the data table, then recreate
  // a coordinator shell and ask the tree.
  if (cfg_.variant.tdt) {
    if (auto outcome = tdt_lookup(s, txn)) {
      op_trace(s.id, "tdt-answer", txn,
               std::string("outcome=") + to_string(*outcome));
      respond_to_user(s, nullptr, txn,
                      *outcome == TxnState::Commit ? UserOutcome::Committed
                                                   : UserOutcome::Aborted,
                      CausalPath{0, 0, now_});
      return;
    }
  }
  recreate_root(s, txn);
}

void Simulator::recreate_root(StreamState& s, const TxnId& txn) {
  TxnGlobal& g = global(txn);
  CtxRt shell;
  shell.ctx.txn = txn;
  shell.ctx.node = s.id;
  shell.ctx.is_root = true;
  shell.ctx.provenance = Provenance::Recreated;
  shell.ctx.children = g.root_children;  // the declared fan-out is all the
                                         // recreated coordinator knows
  shell.user_attached = true;
  auto [pos, inserted] = s.ctxs.emplace(txn, std::move(shell));
  (void)inserted;
  CtxRt& rt = pos->second;
  op_trace(s.id, "recreate-root", txn,
           "children=" + std::to_string(rt.ctx.children.size()));

  if (rt.ctx.children.empty()) {
    // Nobody can testify, and the predecessor may have answered anything.
    // The honest variant says so; the baseline presumes abort and records
    // it, re-running the lie at coordinator scale.
    rt.decided = true;
    rt.decide_basis = CausalPath{0, 0, now_};
    if (cfg_.variant.unknown_states) {
      op_trace(s.id, "decide", txn, "outcome=unknown");
      respond_to_user(s, &rt, txn, UserOutcome::TransUnknown,
                      rt.decide_basis);
      enter_abort(s, rt, rt.decide_basis, /*write_log=*/false);
    } else {
      op_trace(s.id, "decide", txn, "outcome=aborted (recreated)");
      respond_to_user(s, &rt, txn, UserOutcome::Aborted, rt.decide_basis);
      enter_abort(s, rt, rt.decide_basis, /*write_log=*/true);
    }
    return;
  }
  // Re-run the prepare round: surviving participants re-vote from their
  // durable state, vanished ones answer per the variant's orphan rule.
  start_two_phase_commit(s, rt);
}

void Simulator::resolve_inquiry(StreamState& s, CtxRt& rt) {
  TxnContext& ctx = rt.ctx;
  TxnGlobal& g = global(ctx.txn);
  rt.decided = true;
  rt.decide_basis = rt.vote_basis;
  const bool recreated =
      ctx.provenance == Provenance::Recreated || g.response_dropped;
  if (recreated) {
    // A predecessor may have decided — and answered — either way. Say so,
    // push participants still holding locks toward abort, and leave no
    // record pretending to know.
    op_trace(ctx.node, "decide", ctx.txn, "outcome=unknown");
    respond_to_user(s, &rt, ctx.txn, UserOutcome::TransUnknown,
                    rt.decide_basis);
    enter_abort(s, rt, rt.decide_basis, /*write_log=*/false);
    return;
  }
  // A fresh coordinator has answered nobody yet, so abort is still
  // decidable; record it like any other abort.
  op_trace(ctx.node, "decide", ctx.txn, "outcome=aborted (unknown votes)");
  respond_to_user(s, &rt, ctx.txn, UserOutcome::Aborted, rt.decide_basis);
  bool write_log =
      !(cfg_.variant.clear_stage && !ctx.effective_children().empty());
  enter_abort(s, rt, rt.decide_basis, write_log);
}

void Simulator::respond_to_user(StreamState& s, CtxRt* rt, const TxnId& txn,
                                UserOutcome outcome, const CausalPath& path) {
  TxnGlobal& g = global(txn);
  g.responded_outcome = outcome;  // last answer wins for re-sends
  if (!g.first_response_valid) {
    g.first_response = path;
    g.first_response_valid = true;
  }
  if (rt) rt->responses_sent++;
  op_trace(s.id, "respond", txn,
           std::string("outcome=") + to_string(outcome) +
               " hops=" + std::to_string(path.hops) +
               " syncs=" + std::to_string(path.syncs));
  SimEvent ev;
  ev.kind = SimEvent::Kind::UserResponse;
  ev.at = now_;
  ev.txn = txn;
  ev.outcome = outcome;
  ev.path = path;
  enqueue(std::move(ev));
}

void Simulator::record_tdt(StreamState& s, const TxnId& txn,
                           TxnState outcome) {
  if (!cfg_.variant.tdt) return;
  s.tdt[txn] = {outcome, now_};
  op_trace(s.id, "tdt-record", txn,
           std::string("outcome=") + to_string(outcome));
}

std::optional<TxnState> Simulator::tdt_lookup(StreamState& s,
                                              const TxnId& txn) {
  auto it = s.tdt.find(txn);
  if (it == s.tdt.end()) return std::nullopt;
  if (now_ - it->second.second > cfg_.tdt_retention) {
    // Lazy expiry: entries age out when consulted, not by a sweeper.
    s.tdt.erase(it);
    op_trace(s.id, "tdt-expired", txn, "");
    return std::nullopt;
  }
  return it->second.first;
}

}  // namespace tree2pc
