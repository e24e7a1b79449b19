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

// Cost accounting over finished runs. Everything here is derived from the
// run's immutable outputs: the global message/log tallies, the causal paths
// the simulator threads through every message and persistence, and the
// participant trees rebuilt from the persisted records themselves.

#include "tree2pc/cost_metrics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "tree2pc/transfer_engine.hpp"

namespace tree2pc {

namespace {

bool is_2pc_record(LogEntryKind k) {
  return k == LogEntryKind::PrepareLog || k == LogEntryKind::CommitLog ||
         k == LogEntryKind::AbortLog || k == LogEntryKind::ClearLog;
}

// Depth of `id` in the parent-pointer tree; -1 on a dangling or cyclic
// chain (a malformed run must not hang the accounting).
int depth_of(const std::map<LogStreamId, TreeNode>& tree,
             const LogStreamId& id) {
  int depth = 0;
  const LogStreamId* cur = &id;
  while (true) {
    auto it = tree.find(*cur);
    if (it == tree.end()) return -1;
    if (!it->second.parent) return depth;
    cur = &*it->second.parent;
    if (++depth > static_cast<int>(tree.size())) return -1;
  }
}

std::uint64_t u64(int v) { return v < 0 ? 0 : static_cast<std::uint64_t>(v); }

}  // namespace

CostSummary summarize(const Scenario& sc, const RunResult& result) {
  CostSummary out;
  CostCounters& c = out.counters;
  for (const auto& [kind, n] : result.msgs_by_kind) {
    c.msgs_by_kind[to_string(kind)] = n;
  }
  c.msgs_total = result.msgs_total;
  c.prepare_msgs = result.prepare_msgs;
  c.sync_logs = result.sync_logs;
  c.async_logs = result.async_logs;

  // Role split of the synchronous 2PC records.
  for (const auto& e : result.history.entries) {
    if (!e.sync || !is_2pc_record(e.kind) || e.txn.empty()) continue;
    auto root = result.history.txn_root.find(e.txn);
    if (root != result.history.txn_root.end() && root->second == e.stream) {
      ++c.coordinator_sync_logs;
    } else {
      ++c.participant_sync_logs;
    }
  }

  // First request tick per txn, for latency.
  std::map<TxnId, Tick> first_request;
  for (const auto& item : sc.schedule) {
    if (item.kind != ScheduleItem::Kind::UserCommit) continue;
    auto it = first_request.find(item.txn);
    if (it == first_request.end() || item.at < it->second) {
      first_request[item.txn] = item.at;
    }
  }

  // Critical-path worst cases across answered transactions.
  bool all_committed = true;
  bool any_answered = false;
  for (const auto& [txn, report] : result.txns) {
    if (!report.response_valid) {
      all_committed = false;
      continue;
    }
    any_answered = true;
    if (!report.final_outcome ||
        *report.final_outcome != UserOutcome::Committed) {
      all_committed = false;
    }
    c.response_roundtrips =
        std::max(c.response_roundtrips, u64(report.response.hops));
    c.response_log_syncs =
        std::max(c.response_log_syncs, u64(report.response.syncs));
    auto rq = first_request.find(txn);
    if (rq != first_request.end() && report.response.at >= rq->second) {
      c.response_latency =
          std::max(c.response_latency, report.response.at - rq->second);
    }
    if (report.lock_release_valid) {
      c.lock_release_roundtrips =
          std::max(c.lock_release_roundtrips, u64(report.lock_release.hops));
      c.lock_release_log_syncs =
          std::max(c.lock_release_log_syncs, u64(report.lock_release.syncs));
    }
  }

  // Shape of each transaction's merged tree, averaged.
  TreeShape& shape = out.shape;
  double height_sum = 0.0;
  double fanout_sum = 0.0;
  int trees = 0;
  for (const auto& [txn, root] : result.history.txn_root) {
    (void)root;
    auto tree = build_log_stream_tree(result.history, txn);
    if (tree.empty()) continue;
    int height = 0;
    std::set<LogStreamId> internal;
    int edges = 0;
    for (const auto& [id, node] : tree) {
      height = std::max(height, depth_of(tree, id));
      if (node.parent) {
        ++edges;
        internal.insert(*node.parent);
      }
    }
    height_sum += height;
    if (!internal.empty()) {
      fanout_sum += static_cast<double>(edges) /
                    static_cast<double>(internal.size());
    }
    ++trees;
    shape.streams = std::max(shape.streams, tree.size());
  }
  if (trees > 0) {
    shape.height = height_sum / trees;
    shape.fanout = fanout_sum / trees;
  }

  // Closed-form residuals, when this run is formula material.
  FormulaResiduals& r = out.residuals;
  bool has_transfer = std::any_of(
      sc.schedule.begin(), sc.schedule.end(), [](const ScheduleItem& it) {
        return it.kind == ScheduleItem::Kind::Transfer;
      });
  r.valid = result.quiesced && any_answered && all_committed &&
            !has_transfer && sc.config.jitter == 0 && shape.height >= 1.0;
  if (r.valid) {
    const double h = shape.height;
    const double n = shape.fanout;
    const bool release = sc.config.variant.release_messages;
    r.response_roundtrips =
        static_cast<double>(c.response_roundtrips) - 2.0 * h;
    r.response_log_syncs = static_cast<double>(c.response_log_syncs) - 1.0;
    r.lock_release_roundtrips =
        static_cast<double>(c.lock_release_roundtrips) - 3.0 * h;
    r.lock_release_log_syncs =
        static_cast<double>(c.lock_release_log_syncs) - (release ? 1.0 : 2.0);
    r.msgs_total =
        static_cast<double>(c.msgs_total) - (release ? 5.0 : 4.0) * n * h;
    r.participant_sync_logs =
        static_cast<double>(c.participant_sync_logs) - 2.0 * n * h;
  }
  return out;
}

std::string cost_csv_header() {
  return "variant,mode,H,N,transfers,response_rt,response_syncs,lock_rt,"
         "msgs_total,sync_logs,async_logs,latency_ticks";
}

std::string cost_csv_row(const Scenario& sc, const CostSummary& s) {
  std::size_t transfers = 0;
  for (const auto& item : sc.schedule) {
    if (item.kind == ScheduleItem::Kind::Transfer) ++transfers;
  }
  std::ostringstream row;
  row << sc.config.variant.format() << ',' << to_string(sc.config.mode) << ','
      << s.shape.height << ',' << s.shape.fanout << ',' << transfers << ','
      << s.counters.response_roundtrips << ','
      << s.counters.response_log_syncs << ','
      << s.counters.lock_release_roundtrips << ',' << s.counters.msgs_total
      << ',' << s.counters.sync_logs << ',' << s.counters.async_logs << ','
      << s.counters.response_latency;
  return row.str();
}

std::vector<SweepPoint> sweep_uniform(const std::vector<int>& heights,
                                      const std::vector<int>& fanouts,
                                      bool release_messages) {
  std::vector<SweepPoint> out;
  for (int h : heights) {
    for (int n : fanouts) {
      ProtocolVariant v;
      v.release_messages = release_messages;
      Scenario sc = make_uniform_tree(h, n, v);
      Simulator sim(sc);
      RunResult result = sim.run_to_quiescence();
      SweepPoint pt;
      pt.label = sc.name;
      pt.height = h;
      pt.fanout = n;
      pt.summary = summarize(sc, result);
      pt.participants = static_cast<int>(pt.summary.shape.streams);
      pt.csv_row = cost_csv_row(sc, pt.summary);
      out.push_back(std::move(pt));
    }
  }
  return out;
}

std::vector<SweepPoint> sweep_granularity(
    const std::vector<int>& partition_counts) {
  std::vector<SweepPoint> out;
  for (int p : partition_counts) {
    for (Granularity g : {Granularity::LogStream, Granularity::Partition}) {
      Scenario sc = make_single_stream(p, g);
      Simulator sim(sc);
      RunResult result = sim.run_to_quiescence();
      SweepPoint pt;
      pt.label = sc.name + "-" + to_string(g);
      pt.partitions = p;
      pt.summary = summarize(sc, result);
      pt.participants = static_cast<int>(pt.summary.shape.streams);
      pt.csv_row = cost_csv_row(sc, pt.summary);
      out.push_back(std::move(pt));
    }
  }
  return out;
}

}  // namespace tree2pc
