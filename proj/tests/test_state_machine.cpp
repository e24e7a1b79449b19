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

TEST_SUITE_BEGIN("state_machine");

TEST_CASE("chain commit walks prepare down and the decision up") {
  RunResult r = run_bundled("chain_commit");
  CHECK(r.ok);
  CHECK(r.quiesced);
  REQUIRE(r.txns.count("t1"));
  const TxnReport& report = r.txns.at("t1");
  REQUIRE(report.final_outcome.has_value());
  CHECK(*report.final_outcome == UserOutcome::Committed);
  // Two-level chain: prepare descends two hops, votes ascend two hops, one
  // synchronous persist (the root's commit record) before the answer.
  CHECK(report.response.hops == 4);
  CHECK(report.response.log_syncs == 1);

  // Every participant persisted prepare + commit; the root only its commit.
  const RunHistory& h = r.history;
  CHECK(latest_entry(h, "C", LogEntryKind::PrepareLog, "t1") == nullptr);
  CHECK(latest_entry(h, "C", LogEntryKind::CommitLog, "t1") != nullptr);
  CHECK(latest_entry(h, "A", LogEntryKind::PrepareLog, "t1") != nullptr);
  CHECK(latest_entry(h, "B", LogEntryKind::PrepareLog, "t1") != nullptr);
  CHECK(latest_entry(h, "A", LogEntryKind::CommitLog, "t1") != nullptr);
  CHECK(latest_entry(h, "B", LogEntryKind::CommitLog, "t1") != nullptr);
}

TEST_CASE("the root never writes a prepare record") {
  for (const char* name : {"chain_commit", "flat_release", "fig4_transfer",
                           "internal_abort", "local_no_vote"}) {
    CAPTURE(name);
    RunResult r = run_bundled(name);
    const Scenario& sc = bundled(name);
    for (const auto& txn : sc.txns) {
      CHECK(latest_entry(r.history, txn.root, LogEntryKind::PrepareLog,
                         txn.id) == nullptr);
    }
  }
}

TEST_CASE("one-phase commit: childless root writes a single sync record") {
  RunResult r = run_bundled("one_phase_commit");
  CHECK(r.ok);
  CHECK(r.msgs_total == 0);
  CHECK(r.sync_logs == 1);
  CHECK(r.async_logs == 0);
  REQUIRE(r.txns.at("t1").final_outcome.has_value());
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
}

TEST_CASE("one-phase commit stays a single sync record under every variant") {
  for (const char* variant :
       {"none", "clear-stage", "coordinator-commit-log",
        "coordinator-commit-log,release-messages",
        "coordinator-commit-log,d2pc-clear"}) {
    CAPTURE(variant);
    Scenario sc = bundled("one_phase_commit");
    sc.config.variant = ProtocolVariant::parse(variant);
    sc.expect.trace_hash.reset();
    Simulator sim(sc);
    RunResult r = sim.run_to_quiescence();
    CHECK(r.quiesced);
    CHECK(r.msgs_total == 0);
    CHECK(r.sync_logs == 1);
    CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
  }
}

TEST_CASE("internal abort fans out ABORT and leaves no commit record") {
  RunResult r = run_bundled("internal_abort");
  CHECK(r.ok);
  REQUIRE(r.txns.at("t1").final_outcome.has_value());
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Aborted);
  for (const auto& e : r.history.entries) {
    CHECK(e.kind != LogEntryKind::CommitLog);
  }
}

TEST_CASE("a NO vote aborts the transaction tree-wide") {
  RunResult r = run_bundled("local_no_vote");
  CHECK(r.ok);
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Aborted);
  CHECK(r.msgs_by_kind.count(MsgType::Abort));
}

TEST_CASE("release variant answers acks one leg after the decision") {
  RunResult r = run_bundled("flat_release");
  CHECK(r.ok);
  const TxnReport& report = r.txns.at("t1");
  REQUIRE(report.lock_release_valid);
  // Flat tree: 3 one-way legs, one synchronous persist (the root's commit
  // record which the RELEASE message waits on).
  CHECK(report.lock_release.hops == 3);
  CHECK(report.lock_release.log_syncs == 1);
  CHECK(r.msgs_by_kind.at(MsgType::Release) > 0);
}

TEST_CASE("baseline locks release at the participant's own commit record") {
  ProtocolVariant v;  // coordinator-commit-log, no release messages
  Scenario sc = make_flat_tree(2, v);
  Simulator sim(sc);
  RunResult r = sim.run_to_quiescence();
  CHECK(r.quiesced);
  const TxnReport& report = r.txns.at("t1");
  REQUIRE(report.lock_release_valid);
  CHECK(report.lock_release.hops == 3);
  CHECK(report.lock_release.log_syncs == 2);
  CHECK(r.msgs_by_kind.count(MsgType::Release) == 0);
}

TEST_CASE("clear-log policy per variant on a two-level tree") {
  auto run_variant = [](const char* text) {
    Scenario sc = make_uniform_tree(2, 2, ProtocolVariant::parse(text));
    Simulator sim(sc);
    return sim.run_to_quiescence();
  };

  SUBCASE("baseline: root and internal nodes clear asynchronously") {
    RunResult r = run_variant("coordinator-commit-log");
    CHECK(r.quiesced);
    // Root plus the one spine node of the H=2 N=2 caterpillar.
    CHECK(r.async_logs == 2);
    CHECK(r.msgs_by_kind.count(MsgType::Clear) == 0);
  }
  SUBCASE("clear-stage: every node writes a clear record, leaves included") {
    RunResult r = run_variant("clear-stage");
    CHECK(r.quiesced);
    std::size_t clear_records = 0;
    for (const auto& e : r.history.entries) {
      if (e.kind == LogEntryKind::ClearLog) ++clear_records;
    }
    CHECK(clear_records == 5);
    CHECK(r.msgs_by_kind.at(MsgType::Clear) > 0);
  }
  SUBCASE("d2pc-clear: only the root writes the clear record") {
    RunResult r = run_variant("coordinator-commit-log,d2pc-clear");
    CHECK(r.quiesced);
    CHECK(r.async_logs == 1);
    std::size_t clear_records = 0;
    for (const auto& e : r.history.entries) {
      if (e.kind == LogEntryKind::ClearLog) {
        ++clear_records;
        CHECK(e.stream == "root");
      }
    }
    CHECK(clear_records == 1);
  }
}

TEST_CASE("duplicate prepare from a second parent is answered under the rule") {
  RunResult r = run_bundled("circular_transfer");
  CHECK(r.ok);
  CHECK(trace_contains(r, "op=duplicate-prepare"));
  CHECK(trace_contains(r, "deferred until prepare record persists"));
  CHECK(trace_contains(r, "op=deferred-reply"));
}

TEST_CASE("re-delivered messages are absorbed idempotently") {
  Scenario sc = bundled("chain_commit");
  sc.expect.trace_hash.reset();
  sc.expect.counters.clear();
  // Deliver the first PrepareReq twice.
  ScheduleItem dup;
  dup.kind = ScheduleItem::Kind::DuplicateMsg;
  dup.at = 7;
  dup.ordinal = 1;
  sc.schedule.push_back(dup);
  Simulator sim(sc);
  RunResult r = sim.run_to_quiescence();
  CHECK(r.quiesced);
  CHECK(r.violations.empty());
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
}

TEST_SUITE_END();
