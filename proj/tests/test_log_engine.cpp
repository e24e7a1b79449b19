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

#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"

using namespace tree2pc;
using test::bundled;
using test::latest_entry;
using test::run_bundled;
using test::trace_contains;

TEST_SUITE_BEGIN("log_engine");

TEST_CASE("a crash after the prepare record persists replays to commit") {
  RunResult r = run_bundled("crash_replay_commit");
  CHECK(r.ok);
  CHECK(trace_contains(r, "crash stream=B"));
  CHECK(trace_contains(r, "recover stream=B"));
  CHECK(trace_contains(r, "op=rebuild txn=t1 state=prepare"));
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
  // The crashed stream still ends with a commit record: the retried
  // fan-out found the rebuilt PREPARE context and completed it.
  CHECK(latest_entry(r.history, "B", LogEntryKind::CommitLog, "t1") !=
        nullptr);
}

TEST_CASE("a crash before any record leaves nothing to rebuild and aborts") {
  RunResult r = run_bundled("crash_lost_context");
  CHECK(r.ok);
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Aborted);
  // B never persisted a 2PC record, so the retried prepare found an orphan.
  CHECK(latest_entry(r.history, "B", LogEntryKind::PrepareLog, "t1") ==
        nullptr);
  CHECK(latest_entry(r.history, "B", LogEntryKind::CommitLog, "t1") ==
        nullptr);
}

TEST_CASE("log entries carry monotonically increasing logical timestamps") {
  RunResult r = run_bundled("fig4_transfer");
  Tick last = 0;
  for (const auto& e : r.history.entries) {
    CHECK(e.ts > last);
    last = e.ts;
  }
}

TEST_CASE("per-stream sequence numbers are dense and 1-based") {
  RunResult r = run_bundled("fig4_transfer");
  std::map<LogStreamId, std::uint64_t> next;
  for (const auto& e : r.history.entries) {
    std::uint64_t expected = ++next[e.stream];
    CHECK(e.seq == expected);
  }
}

TEST_CASE("sync and async counters split by how the record was persisted") {
  RunResult r = run_bundled("flat_release");
  std::uint64_t sync = 0;
  std::uint64_t async_count = 0;
  for (const auto& e : r.history.entries) {
    (e.sync ? sync : async_count) += 1;
  }
  CHECK(sync == r.sync_logs);
  CHECK(async_count == r.async_logs);
}

TEST_CASE("reclaim flags every entry of the context and frees the slot") {
  RunResult r = run_bundled("fig6_lying_baseline");
  bool saw_reclaimed = false;
  for (const auto& e : r.history.entries) {
    if (e.stream == "P1" && e.txn == "t1" && e.reclaimed) saw_reclaimed = true;
  }
  CHECK(saw_reclaimed);
  CHECK(r.history.reclaimed_at.at("t1").count("P1"));
}

TEST_CASE("tdt outcomes survive crash and recovery") {
  // tdt variant records terminal outcomes; crash the participant after it
  // commits, then reclaim: the TDT answer must still be served from the
  // rebuilt state.
  Scenario sc = bundled("fig6_lying_tdt");
  sc.expect.trace_hash.reset();
  ScheduleItem crash;
  crash.kind = ScheduleItem::Kind::Crash;
  crash.at = 300;
  crash.stream = "P1";
  ScheduleItem recover;
  recover.kind = ScheduleItem::Kind::Recover;
  recover.at = 320;
  recover.stream = "P1";
  sc.schedule.push_back(crash);
  sc.schedule.push_back(recover);
  Simulator sim(sc);
  RunResult r = sim.run_to_quiescence();
  CHECK(r.quiesced);
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
  CHECK(r.violations.empty());
}

TEST_CASE("tdt entries expire after the retention window") {
  RunResult r = run_bundled("tdt_expired");
  CHECK(r.ok);
  CHECK(trace_contains(r, "op=tdt-record"));
  CHECK(trace_contains(r, "op=tdt-expired"));
}

TEST_CASE("an appended but unpersisted prepare dies with the crash") {
  // Crash B between the prepare append (t=10) and its persistence (t=13):
  // the record is lost with volatile state, so recovery has nothing to
  // rebuild and the retried prepare meets an orphan.
  Scenario sc = bundled("crash_replay_commit");
  sc.expect = Expectation{};
  for (auto& item : sc.schedule) {
    if (item.kind == ScheduleItem::Kind::Crash) item.at = 12;
  }
  Simulator sim(sc);
  RunResult r = sim.run_to_quiescence();
  CHECK(r.quiesced);
  CHECK(r.violations.empty());
  REQUIRE(r.txns.at("t1").final_outcome.has_value());
  // Losing the un-persisted prepare is indistinguishable from a lost
  // context: the retried prepare meets an orphan and the txn aborts.
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Aborted);
}

TEST_SUITE_END();
