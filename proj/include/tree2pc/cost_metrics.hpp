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

#ifndef TREE2PC_COST_METRICS_HPP_
#define TREE2PC_COST_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"

namespace tree2pc {

// Per-run accounting of messages, critical-path legs, and log writes. The
// critical-path figures come from the event-time paths the simulator carries
// on every message and persistence, not from dividing totals.
struct CostCounters {
  std::map<std::string, std::uint64_t> msgs_by_kind;
  std::uint64_t msgs_total = 0;
  std::uint64_t prepare_msgs = 0;
  std::uint64_t sync_logs = 0;  // every record on every stream
  std::uint64_t async_logs = 0;
  // Synchronous 2PC records split by the writing stream's role in the txn.
  std::uint64_t participant_sync_logs = 0;
  std::uint64_t coordinator_sync_logs = 0;
  // Critical-path figures, worst case across transactions that were
  // answered: one-way message legs and synchronous persists on the path.
  std::uint64_t response_roundtrips = 0;
  std::uint64_t response_log_syncs = 0;
  std::uint64_t lock_release_roundtrips = 0;
  std::uint64_t lock_release_log_syncs = 0;
  Tick response_latency = 0;  // request tick to first answer tick
};

// Shape of the participant tree recovered from the run's own records
// (averaged when the run carries several transactions).
struct TreeShape {
  double height = 0.0;      // levels below the root
  double fanout = 0.0;      // children per node that has children
  std::size_t streams = 0;  // nodes of the largest transaction tree
};

// Residuals against the closed forms: response legs - 2H, response syncs
// - 1, lock-release legs - 3H, lock-release syncs - 1 (commit-point release)
// or - 2 (release at own commit record), messages - 5NH (with the RELEASE
// round) or - 4NH (without), participant sync logs - 2NH. Only meaningful
// for a quiesced, all-committed, transfer-free, jitter-free run on a
// multi-level tree; `valid` says whether this run qualifies.
struct FormulaResiduals {
  bool valid = false;
  double response_roundtrips = 0.0;
  double response_log_syncs = 0.0;
  double lock_release_roundtrips = 0.0;
  double lock_release_log_syncs = 0.0;
  double msgs_total = 0.0;
  double participant_sync_logs = 0.0;
};

struct CostSummary {
  CostCounters counters;
  TreeShape shape;
  FormulaResiduals residuals;
};

// Pure post-processing over an immutable run; no simulator state involved.
CostSummary summarize(const Scenario& sc, const RunResult& result);

// CSV schema shared by the bench command and the sweeps below.
std::string cost_csv_header();
std::string cost_csv_row(const Scenario& sc, const CostSummary& s);

// One sweep sample: the swept dimensions plus the measured summary.
struct SweepPoint {
  std::string label;      // scenario name
  int height = 0;         // uniform sweep dimensions
  int fanout = 0;
  int partitions = 0;     // granularity sweep dimension
  int participants = 0;   // streams in the transaction tree
  CostSummary summary;
  std::string csv_row;
};

// Runs the caterpillar family across heights x fanouts, jitter-free, with
// or without commit-point RELEASE messages.
std::vector<SweepPoint> sweep_uniform(const std::vector<int>& heights,
                                      const std::vector<int>& fanouts,
                                      bool release_messages);

// Runs the single-stream scenario at both participant granularities for
// each partition count; points come in (log-stream, partition) pairs.
std::vector<SweepPoint> sweep_granularity(
    const std::vector<int>& partition_counts);

}  // namespace tree2pc

#endif  // TREE2PC_COST_METRICS_HPP_
