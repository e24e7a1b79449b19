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

// Simulator harness: scenario setup, the event loop, user traffic, retry
// timers, the abstract-mode bridge, and end-of-run evaluation.

#include <algorithm>
#include <cassert>
#include <sstream>

#include "tree2pc/sim.hpp"

namespace tree2pc {

CausalPath path_max(const CausalPath& a, const CausalPath& b) {
  if (a.at != b.at) return a.at > b.at ? a : b;
  if (a.hops != b.hops) return a.hops > b.hops ? a : b;
  return a.syncs >= b.syncs ? a : b;
}

std::optional<std::int64_t> RunResult::counter(const std::string& name) const {
  if (name == "msgs_total") return static_cast<std::int64_t>(msgs_total);
  if (name == "prepare_msgs") return static_cast<std::int64_t>(prepare_msgs);
  if (name == "sync_logs") return static_cast<std::int64_t>(sync_logs);
  if (name == "async_logs") return static_cast<std::int64_t>(async_logs);
  if (name == "events") return static_cast<std::int64_t>(events_processed);
  if (name == "end_time") return end_time;
  if (name == "violations") return static_cast<std::int64_t>(violations.size());
  // Single-transaction latency counters.
  const TxnReport* only = nullptr;
  for (const auto& [txn, report] : txns) {
    (void)txn;
    if (report.response_valid) {
      if (only) return std::nullopt;  // ambiguous across txns
      only = &report;
    }
  }
  if (!only) return std::nullopt;
  if (name == "response_roundtrips") return only->response.hops;
  if (name == "response_log_syncs") return only->response.syncs;
  if (name == "response_at") return only->response.at;
  if (!only->lock_release_valid) return std::nullopt;
  if (name == "lock_release_roundtrips") return only->lock_release.hops;
  if (name == "lock_release_log_syncs") return only->lock_release.syncs;
  if (name == "lock_release_at") return only->lock_release.at;
  return std::nullopt;
}

std::string RunResult::summary() const {
  std::ostringstream out;
  out << "ok=" << (ok ? "yes" : "no") << " quiesced=" << (quiesced ? "yes" : "no")
      << " end_time=" << end_time << " events=" << events_processed << '\n';
  out << "msgs=" << msgs_total << " (prepare " << prepare_msgs << ") sync_logs="
      << sync_logs << " async_logs=" << async_logs << '\n';
  for (const auto& [txn, report] : txns) {
    out << "txn " << txn << ": outcome="
        << (report.final_outcome ? to_string(*report.final_outcome) : "none");
    if (report.response_valid) {
      out << " response=(" << report.response.hops << " hops, "
          << report.response.syncs << " syncs, t=" << report.response.at << ")";
    }
    if (report.lock_release_valid) {
      out << " lock_release=(" << report.lock_release.hops << " hops, "
          << report.lock_release.syncs << " syncs, t=" << report.lock_release.at
          << ")";
    }
    out << '\n';
  }
  for (const auto& v : violations) {
    out << "violation " << v.kind << " at t=" << v.at << ": " << v.detail
        << '\n';
  }
  for (const auto& u : unmet_expectations) out << "unmet: " << u << '\n';
  for (const auto& f : flags) out << "note: " << f << '\n';
  out << "trace_hash=" << trace_hash << '\n';
  return out.str();
}

RunResult run_scenario(const Scenario& scenario) {
  Simulator sim(scenario);
  return sim.run_to_quiescence();
}

// ---------------------------------------------------------------------------
// Construction.

namespace {

// Splits per-partition participants out of multi-partition touches: the
// stream keeps its first touched partition and its tree position; every
// further partition becomes a child pseudo-stream named "<stream>#<part>".
Scenario expand_partition_granularity(Scenario sc) {
  Scenario out = sc;
  out.streams.clear();
  std::map<LogStreamId, StreamDecl> decls;
  for (const auto& s : sc.streams) decls[s.id] = s;

  for (auto& txn : out.txns) {
    std::vector<std::pair<LogStreamId, std::vector<PartitionId>>> touches;
    for (const auto& [stream_id, parts] : txn.touches) {
      if (parts.size() <= 1) {
        touches.emplace_back(stream_id, parts);
        continue;
      }
      touches.emplace_back(stream_id,
                           std::vector<PartitionId>{parts.front()});
      for (size_t i = 1; i < parts.size(); ++i) {
        LogStreamId sub = stream_id + "#" + parts[i];
        if (!decls.count(sub)) decls[sub] = StreamDecl{sub, {}};
        decls[sub].partitions.push_back(parts[i]);
        auto& host = decls[stream_id].partitions;
        host.erase(std::remove(host.begin(), host.end(), parts[i]),
                   host.end());
        txn.edges.emplace_back(stream_id, sub);
        touches.emplace_back(sub, std::vector<PartitionId>{parts[i]});
      }
    }
    txn.touches = std::move(touches);
  }
  for (const auto& [id, decl] : decls) {
    (void)id;
    out.streams.push_back(decl);
  }
  return out;
}

Message make_msg(MsgType type, const TxnId& txn, const LogStreamId& src,
                 const LogStreamId& dst,
                 VoteStatus vote = VoteStatus::Unknown) {
  Message m;
  m.type = type;
  m.txn = txn;
  m.src = src;
  m.dst = dst;
  m.vote = vote;
  return m;
}

}  // namespace

Simulator::Simulator(const Scenario& scenario) : scenario_(scenario) {
  if (std::string err = scenario_.validate(); !err.empty()) {
    throw ValidationError("scenario " + scenario_.name + ": " + err);
  }
  cfg_ = scenario_.config;
  if (cfg_.granularity == Granularity::Partition) {
    for (const auto& item : scenario_.schedule) {
      if (item.kind == ScheduleItem::Kind::Transfer) {
        throw ValidationError(
            "partition granularity does not combine with transfers");
      }
    }
    scenario_ = expand_partition_granularity(scenario_);
  }
  rng_.seed(cfg_.seed);
  init_from_scenario();
}

void Simulator::init_from_scenario() {
  for (const auto& decl : scenario_.streams) {
    StreamState s;
    s.id = decl.id;
    s.hosted.insert(decl.partitions.begin(), decl.partitions.end());
    streams_.emplace(decl.id, std::move(s));
  }

  for (const auto& txn : scenario_.txns) {
    TxnGlobal g;
    g.root = txn.root;
    for (const auto& [parent, child] : txn.edges) {
      if (parent == txn.root) g.root_children.push_back(child);
    }
    for (const auto& [stream_id, parts] : txn.touches) {
      (void)stream_id;
      g.touched.insert(parts.begin(), parts.end());
    }
    txns_.emplace(txn.id, std::move(g));

    if (cfg_.mode == SimMode::Logged) {
      // Pre-create a RUNNING context everywhere the transaction has declared
      // presence; transfer destinations gain contexts through migration.
      std::set<LogStreamId> present{txn.root};
      for (const auto& [parent, child] : txn.edges) {
        present.insert(parent);
        present.insert(child);
      }
      for (const auto& [stream_id, parts] : txn.touches) {
        (void)parts;
        present.insert(stream_id);
      }
      for (const auto& stream_id : present) {
        CtxRt rt;
        rt.ctx.txn = txn.id;
        rt.ctx.node = stream_id;
        rt.ctx.is_root = (stream_id == txn.root);
        for (const auto& [parent, child] : txn.edges) {
          if (parent == stream_id) rt.ctx.children.push_back(child);
        }
        for (const auto& [tstream, parts] : txn.touches) {
          if (tstream == stream_id) {
            rt.ctx.touched_partitions.insert(parts.begin(), parts.end());
          }
        }
        streams_.at(stream_id).ctxs.emplace(txn.id, std::move(rt));
      }
    }
  }

  if (cfg_.mode == SimMode::Abstract) abstract_init();

  for (size_t i = 0; i < scenario_.schedule.size(); ++i) {
    const ScheduleItem& item = scenario_.schedule[i];
    SimEvent ev;
    ev.at = item.at;
    ev.stream = item.stream;
    ev.txn = item.txn;
    switch (item.kind) {
      case ScheduleItem::Kind::UserCommit:
        ev.kind = SimEvent::Kind::UserRequest;
        break;
      case ScheduleItem::Kind::InternalAbort:
        ev.kind = SimEvent::Kind::InternalAbort;
        break;
      case ScheduleItem::Kind::LocalNo:
        ev.kind = SimEvent::Kind::LocalNo;
        break;
      case ScheduleItem::Kind::Transfer:
        if (cfg_.mode == SimMode::Logged) {
          execute_transfer(item);
          continue;  // execute_transfer schedules its own step event
        }
        ev.kind = SimEvent::Kind::TransferStep;
        ev.ordinal = i;  // abstract mode reads the schedule item back
        break;
      case ScheduleItem::Kind::Crash:
        ev.kind = SimEvent::Kind::Crash;
        break;
      case ScheduleItem::Kind::Recover:
        ev.kind = SimEvent::Kind::Recover;
        break;
      case ScheduleItem::Kind::Reclaim:
        ev.kind = SimEvent::Kind::Reclaim;
        break;
      case ScheduleItem::Kind::DuplicateMsg:
        ev.kind = SimEvent::Kind::DuplicateMsg;
        ev.ordinal = item.ordinal;
        break;
    }
    enqueue(std::move(ev));
  }
}

void Simulator::inject_fault(const ScheduleItem& item) {
  if (item.kind == ScheduleItem::Kind::Transfer &&
      cfg_.mode == SimMode::Logged) {
    execute_transfer(item);
    return;
  }
  SimEvent ev;
  ev.at = item.at;
  ev.stream = item.stream;
  ev.txn = item.txn;
  ev.ordinal = item.ordinal;
  switch (item.kind) {
    case ScheduleItem::Kind::UserCommit:
      ev.kind = SimEvent::Kind::UserRequest;
      break;
    case ScheduleItem::Kind::InternalAbort:
      ev.kind = SimEvent::Kind::InternalAbort;
      break;
    case ScheduleItem::Kind::LocalNo:
      ev.kind = SimEvent::Kind::LocalNo;
      break;
    case ScheduleItem::Kind::Crash:
      ev.kind = SimEvent::Kind::Crash;
      break;
    case ScheduleItem::Kind::Recover:
      ev.kind = SimEvent::Kind::Recover;
      break;
    case ScheduleItem::Kind::Reclaim:
      ev.kind = SimEvent::Kind::Reclaim;
      break;
    case ScheduleItem::Kind::DuplicateMsg:
      ev.kind = SimEvent::Kind::DuplicateMsg;
      break;
    case ScheduleItem::Kind::Transfer:
      ev.kind = SimEvent::Kind::TransferStep;
      break;
  }
  enqueue(std::move(ev));
}

// ---------------------------------------------------------------------------
// Event loop.

void Simulator::enqueue(SimEvent ev) {
  ev.seq = next_event_seq_++;
  queue_.push(std::move(ev));
}

RunResult Simulator::run_to_quiescence() {
  while (!queue_.empty()) {
    SimEvent ev = queue_.top();
    queue_.pop();
    if (ev.kind == SimEvent::Kind::RetryTimer) {
      // Stale timers fire as silent no-ops without advancing the clock, so a
      // clean run's end time reflects real work only.
      CtxRt* rt = find_ctx(ev.stream, ev.txn);
      if (!rt || rt->retry_epoch != ev.epoch) continue;
    }
    if (events_processed_ >= cfg_.max_events) {
      budget_exhausted_ = true;
      record_violation(violation::kQuiescenceBudget,
                       "event budget exhausted at t=" + std::to_string(now_));
      break;
    }
    now_ = ev.at;
    ++events_processed_;
    dispatch(ev);
  }
  RunResult result;
  finalize(result);
  return result;
}

void Simulator::dispatch(const SimEvent& ev) {
  switch (ev.kind) {
    case SimEvent::Kind::Deliver: {
      if (cfg_.mode == SimMode::Abstract) {
        abstract_deliver(ev);
        return;
      }
      StreamState& s = stream(ev.msg.dst);
      if (s.crashed) {
        s.parked.emplace_back(ev.msg, ev.path);
        trace_line("t=" + std::to_string(now_) + " parked " + ev.msg.encode());
        return;
      }
      deliver(ev);
      return;
    }
    case SimEvent::Kind::LogPersisted:
      on_log_persisted(stream(ev.stream), ev.append_id);
      return;
    case SimEvent::Kind::TransferStep:
      if (cfg_.mode == SimMode::Abstract) {
        abstract_transfer(scenario_.schedule[ev.ordinal]);
      } else {
        transfer_step(ev.transfer_id);
      }
      return;
    case SimEvent::Kind::UserRequest:
      trace_line("t=" + std::to_string(now_) + " user-request txn=" + ev.txn);
      if (cfg_.mode == SimMode::Abstract) {
        abstract_user_commit(ev.txn);
      } else {
        handle_user_request(ev.txn);
      }
      return;
    case SimEvent::Kind::UserResponse:
      handle_user_response(ev);
      return;
    case SimEvent::Kind::Crash:
      trace_line("t=" + std::to_string(now_) + " crash stream=" + ev.stream);
      crash(stream(ev.stream));
      return;
    case SimEvent::Kind::Recover:
      trace_line("t=" + std::to_string(now_) + " recover stream=" + ev.stream);
      recover(stream(ev.stream));
      return;
    case SimEvent::Kind::Reclaim:
      reclaim_context(stream(ev.stream), ev.txn);
      return;
    case SimEvent::Kind::InternalAbort:
      if (cfg_.mode == SimMode::Abstract) {
        ScheduleItem item;
        item.stream = ev.stream;
        item.txn = ev.txn;
        abstract_internal_abort(item);
      } else {
        internal_abort(stream(ev.stream), ev.txn);
      }
      return;
    case SimEvent::Kind::LocalNo:
      local_no(stream(ev.stream), ev.txn);
      return;
    case SimEvent::Kind::DuplicateMsg:
      handle_duplicate(ev.ordinal);
      return;
    case SimEvent::Kind::RetryTimer:
      handle_retry_timer(ev);
      return;
  }
}

void Simulator::schedule_send(const Message& msg, const CausalPath& from) {
  ++msgs_total_;
  ++msgs_by_kind_[msg.type];
  if (msg.type == MsgType::PrepareReq || msg.type == MsgType::PrepareResp) {
    ++prepare_msgs_;
  }
  Tick arrive = now_ + cfg_.msg_delay + draw_jitter();
  SimEvent ev;
  ev.kind = SimEvent::Kind::Deliver;
  ev.at = arrive;
  ev.msg = msg;
  ev.path = from.hop(arrive);
  enqueue(std::move(ev));
}

void Simulator::deliver(const SimEvent& ev) {
  const Message& m = ev.msg;
  delivery_log_.emplace_back(m, ev.path);
  trace_line("t=" + std::to_string(now_) +
             (ev.injected_duplicate ? " redeliver " : " deliver ") +
             m.encode());
  StreamState& s = stream(m.dst);
  switch (m.type) {
    case MsgType::PrepareReq:
      if (!find_ctx(m.dst, m.txn)) {
        handle_orphan_prepare_request(s, m, ev.path);
      } else {
        handle_prepare_request(s, m, ev.path);
      }
      return;
    case MsgType::PrepareResp:
      handle_prepare_response(s, m, ev.path);
      return;
    case MsgType::Commit:
      if (!find_ctx(m.dst, m.txn)) {
        handle_orphan_commit_request(s, m, ev.path);
      } else {
        handle_commit_request(s, m, ev.path);
      }
      return;
    case MsgType::Abort:
      if (!find_ctx(m.dst, m.txn)) {
        handle_orphan_abort_request(s, m, ev.path);
      } else {
        handle_abort_request(s, m, ev.path);
      }
      return;
    case MsgType::Ack:
      handle_ack(s, m, ev.path);
      return;
    case MsgType::Release:
      handle_release(s, m, ev.path);
      return;
    case MsgType::Clear:
      handle_clear(s, m, ev.path);
      return;
  }
}

void Simulator::handle_user_request(const TxnId& txn) {
  TxnGlobal& g = global(txn);
  g.user_requested = true;
  StreamState& s = stream(g.root);
  if (s.crashed) {
    flags_.push_back("user request for " + txn + " hit crashed root stream " +
                     g.root + " at t=" + std::to_string(now_));
    return;
  }
  root_user_response(s, txn);
}

void Simulator::handle_user_response(const SimEvent& ev) {
  TxnGlobal& g = global(ev.txn);
  bool first = g.delivered.empty() && !g.response_dropped;
  bool drop = first && scenario_.drop_user_response.count(ev.txn) > 0;
  trace_line("t=" + std::to_string(now_) + " user-response txn=" + ev.txn +
             " outcome=" + to_string(ev.outcome) +
             (drop ? " lost=1" : " lost=0"));
  if (drop) {
    g.response_dropped = true;
    return;
  }
  // Outcome-contradiction detection: the user must never see an answer that
  // conflicts with another delivered answer or with the persisted decision.
  // TRANS_UNKNOWN is the honest "cannot say" and never contradicts.
  if (ev.outcome != UserOutcome::TransUnknown) {
    for (const auto& [prev, at] : g.delivered) {
      (void)at;
      if (prev != UserOutcome::TransUnknown && prev != ev.outcome) {
        record_violation(violation::kOutcomeContradiction,
                         "txn " + ev.txn + " told " + to_string(ev.outcome) +
                             " after " + to_string(prev));
        break;
      }
    }
    if (ev.outcome == UserOutcome::Aborted && g.commit_logged) {
      record_violation(violation::kOutcomeContradiction,
                       "txn " + ev.txn +
                           " told aborted despite a persisted commit log");
    }
    if (ev.outcome == UserOutcome::Committed && g.abort_logged) {
      record_violation(violation::kOutcomeContradiction,
                       "txn " + ev.txn +
                           " told committed despite a persisted abort log");
    }
  }
  g.delivered.emplace_back(ev.outcome, now_);
}

void Simulator::handle_duplicate(std::uint64_t ordinal) {
  if (cfg_.mode == SimMode::Abstract) {
    if (ordinal == 0 || ordinal > abs_delivery_log_.size()) {
      flags_.push_back("duplicate ordinal " + std::to_string(ordinal) +
                       " out of range");
      return;
    }
    SimEvent ev;
    ev.msg = abs_delivery_log_[ordinal - 1];
    abstract_deliver(ev);
    return;
  }
  if (ordinal == 0 || ordinal > delivery_log_.size()) {
    flags_.push_back("duplicate ordinal " + std::to_string(ordinal) +
                     " out of range");
    return;
  }
  auto [msg, path] = delivery_log_[ordinal - 1];
  SimEvent ev;
  ev.kind = SimEvent::Kind::Deliver;
  ev.at = now_;
  ev.msg = msg;
  ev.path = CausalPath{path.hops, path.syncs, now_};
  ev.injected_duplicate = true;
  enqueue(std::move(ev));
}

void Simulator::arm_retry(CtxRt& rt) {
  ++rt.retry_epoch;
  SimEvent ev;
  ev.kind = SimEvent::Kind::RetryTimer;
  ev.at = now_ + cfg_.retry_interval;
  ev.stream = rt.ctx.node;
  ev.txn = rt.ctx.txn;
  ev.epoch = rt.retry_epoch;
  enqueue(std::move(ev));
}

void Simulator::cancel_retry(CtxRt& rt) { ++rt.retry_epoch; }

void Simulator::handle_retry_timer(const SimEvent& ev) {
  CtxRt* rt = find_ctx(ev.stream, ev.txn);
  if (!rt || rt->retry_epoch != ev.epoch) return;  // pre-filtered; defensive
  TxnContext& ctx = rt->ctx;
  if ((ctx.state == TxnState::Prepare ||
       (ctx.state == TxnState::Running && rt->prepare_initiated)) &&
      !rt->decided) {
    bool sent = false;
    for (const auto& child : ctx.effective_children()) {
      if (!ctx.votes.count(child)) {
        schedule_send(make_msg(MsgType::PrepareReq, ctx.txn, ctx.node, child),
                      CausalPath{0, 0, now_});
        sent = true;
      }
    }
    if (sent) {
      op_trace(ctx.node, "retry", ctx.txn, "re-drive prepare requests");
      arm_retry(*rt);
    }
    return;
  }
  if ((ctx.state == TxnState::Commit || ctx.state == TxnState::Abort) &&
      rt->commit_fanned_out) {
    MsgType type =
        ctx.state == TxnState::Commit ? MsgType::Commit : MsgType::Abort;
    bool sent = false;
    for (const auto& child : ctx.effective_children()) {
      auto it = ctx.acks.find(child);
      if (it != ctx.acks.end() && !it->second) {
        schedule_send(make_msg(type, ctx.txn, ctx.node, child),
                      CausalPath{0, 0, now_});
        sent = true;
      }
    }
    if (sent) {
      op_trace(ctx.node, "retry", ctx.txn, "re-drive decision requests");
      arm_retry(*rt);
    }
  }
}

Tick Simulator::draw_jitter() {
  if (cfg_.jitter <= 0) return 0;
  std::uniform_int_distribution<Tick> dist(0, cfg_.jitter);
  return dist(rng_);
}

// ---------------------------------------------------------------------------
// Tracing, violations, shared lookups.

void Simulator::trace_line(std::string line) {
  trace_.push_back(std::move(line));
}

void Simulator::op_trace(const LogStreamId& node, const std::string& op,
                         const TxnId& txn, const std::string& detail) {
  std::string line = "t=" + std::to_string(now_) + " node=" + node +
                     " op=" + op + " txn=" + txn;
  if (!detail.empty()) line += " " + detail;
  trace_.push_back(std::move(line));
}

void Simulator::record_violation(const std::string& kind,
                                 const std::string& detail) {
  violations_.push_back({kind, now_, detail});
  violation_kinds_.insert(kind);
  trace_line("t=" + std::to_string(now_) + " violation " + kind + " " +
             detail);
}

Simulator::StreamState& Simulator::stream(const LogStreamId& id) {
  auto it = streams_.find(id);
  assert(it != streams_.end());
  return it->second;
}

Simulator::CtxRt* Simulator::find_ctx(const LogStreamId& stream_id,
                                      const TxnId& txn) {
  auto sit = streams_.find(stream_id);
  if (sit == streams_.end()) return nullptr;
  auto cit = sit->second.ctxs.find(txn);
  return cit == sit->second.ctxs.end() ? nullptr : &cit->second;
}

Simulator::TxnGlobal& Simulator::global(const TxnId& txn) {
  return txns_.at(txn);
}

bool Simulator::stream_has_entry(const LogStreamId& stream_id,
                                 const TxnId& txn, LogEntryKind kind) const {
  auto it = streams_.find(stream_id);
  if (it == streams_.end()) return false;
  for (const auto& e : it->second.log) {
    if (!e.reclaimed && e.txn == txn && e.kind == kind) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// End-of-run evaluation.

void Simulator::finalize(RunResult& result) {
  result.quiesced = !budget_exhausted_;
  result.end_time = now_;
  result.events_processed = events_processed_;
  result.msgs_total = msgs_total_;
  result.prepare_msgs = prepare_msgs_;
  result.msgs_by_kind = msgs_by_kind_;
  result.sync_logs = sync_logs_;
  result.async_logs = async_logs_;

  // Assemble the durable residue.
  RunHistory& h = result.history;
  for (const auto& decl : scenario_.streams) {
    for (const auto& p : decl.partitions) h.initial_home[p] = decl.id;
  }
  for (const auto& [id, s] : streams_) {
    (void)id;
    for (const auto& e : s.log) h.entries.push_back(e);
  }
  std::sort(h.entries.begin(), h.entries.end(),
            [](const LogEntry& a, const LogEntry& b) { return a.ts < b.ts; });
  for (std::uint64_t id : transfer_order_) {
    const TransferTask& t = transfers_.at(id);
    TransferRecord rec;
    rec.id = t.id;
    rec.partition = t.partition;
    rec.src = t.src;
    rec.dst = t.dst;
    rec.ts = t.ts;
    rec.applied_ts = t.applied_ts;
    for (const auto& m : t.migrations) rec.affected.push_back(m.txn);
    rec.overflow_affected = t.overflow_affected;
    rec.completed = (t.phase == TransferTask::Phase::Done);
    h.transfers.push_back(std::move(rec));
  }
  for (const auto& [txn, g] : txns_) {
    h.touched[txn] = g.touched;
    h.txn_root[txn] = g.root;
    if (g.completion) h.completion[txn] = *g.completion;
    if (!g.reclaimed_at.empty()) h.reclaimed_at[txn] = g.reclaimed_at;
  }

  // Per-transaction reports.
  for (const auto& [txn, g] : txns_) {
    TxnReport report;
    report.delivered = g.delivered;
    if (!g.delivered.empty()) {
      report.final_outcome = g.delivered.back().first;
    }
    report.response = g.first_response;
    report.response_valid = g.first_response_valid;
    if (g.lock_release) {
      report.lock_release = *g.lock_release;
      report.lock_release_valid = true;
    }
    result.txns[txn] = std::move(report);

    if (g.user_requested && g.delivered.empty()) {
      flags_.push_back("txn " + txn + " never delivered an outcome");
    }
  }
  if (cfg_.mode == SimMode::Logged) {
    for (const auto& [id, s] : streams_) {
      for (const auto& [txn, rt] : s.ctxs) {
        if (global(txn).user_requested &&
            rt.ctx.state != TxnState::Tombstone) {
          flags_.push_back("ctx " + txn + "@" + id + " ended in state " +
                           to_string(rt.ctx.state));
        }
      }
    }
    for (const auto& problem : check_minimum_set(h)) {
      record_violation(violation::kMinimumSet, problem);
    }
    for (const auto& problem : check_transfer_principle(h)) {
      record_violation(violation::kTransferPrinciple, problem);
    }
  } else {
    if (!all_tombstone(abs_world_)) {
      record_violation(violation::kProtocolError,
                       "abstract run quiesced with non-terminal nodes");
    }
    result.abstract_trace = AbstractTrace{abs_config_, abs_steps_};
  }

  result.violations = violations_;
  result.flags = flags_;
  result.trace = trace_;
  std::uint64_t hash = fnv1a64("");
  for (const auto& line : trace_) {
    hash = fnv1a64(line, hash);
    hash = fnv1a64("\n", hash);
  }
  result.trace_hash = hex64(hash);

  evaluate_expectations(result);
  bool budget_expected =
      std::find(scenario_.expect.violations.begin(),
                scenario_.expect.violations.end(),
                violation::kQuiescenceBudget) !=
      scenario_.expect.violations.end();
  result.ok = result.unmet_expectations.empty() &&
              (result.quiesced || budget_expected);
}

void Simulator::evaluate_expectations(RunResult& result) {
  const Expectation& exp = scenario_.expect;
  auto& unmet = result.unmet_expectations;

  for (const auto& [txn, want] : exp.outcomes) {
    const auto it = result.txns.find(txn);
    if (it == result.txns.end() || !it->second.final_outcome) {
      unmet.push_back("expected outcome " + std::string(to_string(want)) +
                      " for " + txn + " but none was delivered");
    } else if (*it->second.final_outcome != want) {
      unmet.push_back("expected outcome " + std::string(to_string(want)) +
                      " for " + txn + " but got " +
                      to_string(*it->second.final_outcome));
    }
  }

  std::set<std::string> expected_kinds(exp.violations.begin(),
                                       exp.violations.end());
  for (const auto& kind : expected_kinds) {
    if (!violation_kinds_.count(kind)) {
      unmet.push_back("expected violation " + kind + " was not observed");
    }
  }
  for (const auto& kind : violation_kinds_) {
    if (!expected_kinds.count(kind)) {
      unmet.push_back("unexpected violation " + kind);
    }
  }

  if (exp.trace_hash && *exp.trace_hash != result.trace_hash) {
    unmet.push_back("trace hash mismatch: expected " + *exp.trace_hash +
                    ", got " + result.trace_hash);
  }
  for (const auto& [name, want] : exp.counters) {
    auto got = result.counter(name);
    if (!got) {
      unmet.push_back("counter " + name + " is not defined for this run");
    } else if (*got != want) {
      unmet.push_back("counter " + name + " expected " +
                      std::to_string(want) + ", got " + std::to_string(*got));
    }
  }
}

// ---------------------------------------------------------------------------
// Abstract-mode bridge. Scenario events feed the Appendix-level transition
// system; decided-state cascades apply eagerly in canonical node order so a
// run is a deterministic sequence of model actions, recorded for replay.

void Simulator::abstract_init() {
  for (const auto& [id, s] : streams_) {
    (void)s;
    abs_config_.names.push_back(id);
  }
  const TxnDecl& txn = scenario_.txns.front();
  abs_config_.root = abs_config_.index_of(txn.root);
  abs_config_.init_children.assign(abs_config_.names.size(), {});
  for (const auto& [parent, child] : txn.edges) {
    abs_config_.init_children[abs_config_.index_of(parent)].push_back(
        abs_config_.index_of(child));
  }
  // The action is unbounded in the protocol; the budget only exists for
  // state-space enumeration, so give scenario transfers ample room.
  abs_config_.max_dynamic_adds = 200;
  abs_world_ = init_world(abs_config_);
}

bool Simulator::abstract_apply(const AbstractAction& action) {
  const auto enabled = enabled_actions(abs_world_, abs_config_);
  if (std::find(enabled.begin(), enabled.end(), action) == enabled.end()) {
    trace_line("t=" + std::to_string(now_) + " skip-disabled " +
               action.describe(abs_config_));
    return false;
  }
  AbstractWorld before = abs_world_;
  abs_world_ = apply(abs_world_, abs_config_, action);
  if (abs_world_ == before) {
    // Legal but changes nothing (the message pool is monotone); recording
    // it would let self-loops cascade forever.
    trace_line("t=" + std::to_string(now_) + " no-op " +
               action.describe(abs_config_));
    return false;
  }
  std::string post = encode_abstract_world(abs_world_, abs_config_);
  abs_steps_.push_back({action, post});
  trace_line("t=" + std::to_string(now_) + " action " +
             action.describe(abs_config_) + " -> " + post);

  if (!abs_consistency_violated_ && !consistency_holds(abs_world_)) {
    abs_consistency_violated_ = true;
    record_violation(violation::kCommitAbortDivergence,
                     "abstract state mixes COMMIT and ABORT");
  }
  if (!decision_stable(before, abs_world_)) {
    record_violation(violation::kProtocolError,
                     "abstract decision regressed");
  }

  // New messages in the monotone pool become deliveries.
  const TxnId& txn = scenario_.txns.front().id;
  for (int kind = 0; kind < kAbstractMsgKinds; ++kind) {
    for (int src = 0; src < abs_world_.n; ++src) {
      for (int dst = 0; dst < abs_world_.n; ++dst) {
        int idx = msg_index(static_cast<AbstractMsgKind>(kind), src, dst);
        if (!abs_world_.msgs.test(idx) || before.msgs.test(idx)) continue;
        MsgType type = MsgType::PrepareReq;
        VoteStatus vote = VoteStatus::Unknown;
        switch (static_cast<AbstractMsgKind>(kind)) {
          case AbstractMsgKind::PrepareReq: type = MsgType::PrepareReq; break;
          case AbstractMsgKind::PrepareRespOk:
            type = MsgType::PrepareResp;
            vote = VoteStatus::Ok;
            break;
          case AbstractMsgKind::PrepareRespNo:
            type = MsgType::PrepareResp;
            vote = VoteStatus::No;
            break;
          case AbstractMsgKind::Commit: type = MsgType::Commit; break;
          case AbstractMsgKind::Abort: type = MsgType::Abort; break;
          case AbstractMsgKind::Ack: type = MsgType::Ack; break;
        }
        schedule_send(make_msg(type, txn, abs_config_.names[src],
                               abs_config_.names[dst], vote),
                      CausalPath{0, 0, now_});
      }
    }
  }

  // Root decisions answer the user.
  if (action.node == abs_config_.root &&
      (action.kind == ActionKind::CommitDecided ||
       action.kind == ActionKind::AbortDecided)) {
    SimEvent ev;
    ev.kind = SimEvent::Kind::UserResponse;
    ev.at = now_;
    ev.txn = txn;
    ev.outcome = action.kind == ActionKind::CommitDecided
                     ? UserOutcome::Committed
                     : UserOutcome::Aborted;
    enqueue(std::move(ev));
  }
  return true;
}

void Simulator::abstract_cascade() {
  // A non-root CommitDecided only re-emits its (monotone) vote, so an
  // application counts as progress only when the world actually moved.
  bool progressed = true;
  while (progressed) {
    progressed = false;
    const auto enabled = enabled_actions(abs_world_, abs_config_);
    for (const auto& action : enabled) {
      if (action.kind != ActionKind::CommitDecided &&
          action.kind != ActionKind::AbortDecided &&
          action.kind != ActionKind::ForgetCtx) {
        continue;
      }
      // Pre-test with the pure transition so self-loops don't even trace.
      if (apply(abs_world_, abs_config_, action) == abs_world_) continue;
      if (abstract_apply(action)) {
        progressed = true;
        break;
      }
    }
  }
}

void Simulator::abstract_deliver(const SimEvent& ev) {
  const Message& m = ev.msg;
  abs_delivery_log_.push_back(m);
  trace_line("t=" + std::to_string(now_) + " deliver " + m.encode());
  int src = abs_config_.index_of(m.src);
  int dst = abs_config_.index_of(m.dst);
  TxnState state = abs_world_.state_of(dst);

  std::vector<AbstractAction> candidates;
  switch (m.type) {
    case MsgType::PrepareReq:
      if (state == TxnState::Running) {
        candidates.push_back({ActionKind::PrepareRequest, dst, src, 0});
      } else if (state == TxnState::Prepare && abs_world_.parent[dst] != src) {
        candidates.push_back(
            {ActionKind::DuplicatePrepareRequest, dst, src, 0});
      } else if (state == TxnState::Abort || state == TxnState::Tombstone) {
        candidates.push_back({ActionKind::OrphanPrepareRequest, dst, src, 0});
      }
      break;
    case MsgType::PrepareResp:
      candidates.push_back(
          {ActionKind::PrepareResponse, dst, src,
           m.vote == VoteStatus::Ok ? kVoteOk : kVoteNo});
      break;
    case MsgType::Commit:
      candidates.push_back({ActionKind::CommitRequest, dst, src, 0});
      candidates.push_back({ActionKind::OrphanCommitRequest, dst, src, 0});
      break;
    case MsgType::Abort:
      candidates.push_back({ActionKind::AbortRequest, dst, src, 0});
      candidates.push_back({ActionKind::OrphanAbortRequest, dst, src, 0});
      break;
    case MsgType::Ack:
      candidates.push_back({ActionKind::AckResponse, dst, src, 0});
      break;
    default:
      break;
  }

  const auto enabled = enabled_actions(abs_world_, abs_config_);
  for (const auto& action : candidates) {
    if (std::find(enabled.begin(), enabled.end(), action) != enabled.end()) {
      abstract_apply(action);
      abstract_cascade();
      return;
    }
  }
  trace_line("t=" + std::to_string(now_) + " absorb " + m.encode());
}

void Simulator::abstract_user_commit(const TxnId& txn) {
  (void)txn;
  abstract_apply({ActionKind::RootStartToCommit, abs_config_.root, -1, 0});
  abstract_cascade();
}

void Simulator::abstract_transfer(const ScheduleItem& item) {
  AbstractAction action{ActionKind::AddIntermediateParticipant,
                        abs_config_.index_of(item.stream),
                        abs_config_.index_of(item.dst), 0};
  abstract_apply(action);
  abstract_cascade();
}

void Simulator::abstract_internal_abort(const ScheduleItem& item) {
  AbstractAction action{ActionKind::InternalAbort,
                        abs_config_.index_of(item.stream), -1, 0};
  abstract_apply(action);
  abstract_cascade();
}

}  // namespace tree2pc
