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

#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"
#include "tree2pc/transfer_engine.hpp"

using namespace tree2pc;
using test::bundled;
using test::latest_entry;
using test::run_bundled;

namespace {

// Minimal committed-transaction history: root R coordinating stream S, the
// txn touching one partition p homed on S. Fixture tests mutate from here.
RunHistory minimal_committed_history() {
  RunHistory h;
  h.txn_root["t1"] = "R";
  h.touched["t1"] = {"p"};
  h.initial_home["p"] = "S";

  LogEntry prep;
  prep.stream = "S";
  prep.seq = 1;
  prep.ts = 1;
  prep.kind = LogEntryKind::PrepareLog;
  prep.txn = "t1";
  prep.parent = "R";
  h.entries.push_back(prep);

  LogEntry root_commit;
  root_commit.stream = "R";
  root_commit.seq = 1;
  root_commit.ts = 10;
  root_commit.kind = LogEntryKind::CommitLog;
  root_commit.txn = "t1";
  root_commit.participants = {"S"};
  h.entries.push_back(root_commit);

  LogEntry commit;
  commit.stream = "S";
  commit.seq = 2;
  commit.ts = 12;
  commit.kind = LogEntryKind::CommitLog;
  commit.txn = "t1";
  commit.parent = "R";
  h.entries.push_back(commit);

  h.completion["t1"] = 10;
  return h;
}

// A mid-transaction move of p from S to X: durable outbound record on S at
// ts=2, inbound record on X at ts=3, both naming t1, plus the matching
// TransferRecord. S's own commit record is renumbered behind the move.
void add_move_to_x(RunHistory& h, bool record_destination) {
  LogEntry out;
  out.stream = "S";
  out.seq = 2;
  out.ts = 2;
  out.kind = LogEntryKind::TransferOutLog;
  out.partition = "p";
  out.transfer_src = "S";
  out.transfer_dst = "X";
  out.affected_txns = {"t1"};
  h.entries.push_back(out);

  LogEntry in;
  in.stream = "X";
  in.seq = 1;
  in.ts = 3;
  in.kind = LogEntryKind::TransferInLog;
  in.partition = "p";
  in.transfer_src = "S";
  in.transfer_dst = "X";
  in.affected_txns = {"t1"};
  h.entries.push_back(in);

  for (auto& e : h.entries) {
    if (e.stream == "S" && e.kind == LogEntryKind::CommitLog) {
      e.seq = 3;
      if (record_destination) e.incr_parts = {"X"};
    }
  }

  // The grafted destination terminates too.
  LogEntry x_commit;
  x_commit.stream = "X";
  x_commit.seq = 2;
  x_commit.ts = 11;
  x_commit.kind = LogEntryKind::CommitLog;
  x_commit.txn = "t1";
  x_commit.parent = "S";
  h.entries.push_back(x_commit);

  TransferRecord rec;
  rec.id = 1;
  rec.partition = "p";
  rec.src = "S";
  rec.dst = "X";
  rec.ts = 2;
  rec.applied_ts = 3;
  rec.affected = {"t1"};
  rec.completed = true;
  h.transfers.push_back(rec);
}

}  // namespace

TEST_SUITE_BEGIN("transfer_engine");

TEST_CASE("fig4: per-phase participant sets match the worked example") {
  RunResult r = run_bundled("fig4_transfer");
  CHECK(r.ok);
  const RunHistory& h = r.history;

  // Prepare phase: B had handed pbe to E, D (itself added by A's transfer
  // of pad) had handed pad on to F — both destinations ride the prepare
  // records as transfer-added participants.
  const LogEntry* b_prep = latest_entry(h, "B", LogEntryKind::PrepareLog, "t1");
  REQUIRE(b_prep != nullptr);
  CHECK(b_prep->incr_parts == std::vector<LogStreamId>{"E"});
  CHECK(b_prep->parent == LogStreamId("A"));

  const LogEntry* d_prep = latest_entry(h, "D", LogEntryKind::PrepareLog, "t1");
  REQUIRE(d_prep != nullptr);
  CHECK(d_prep->incr_parts == std::vector<LogStreamId>{"F"});
  CHECK(d_prep->parent == LogStreamId("A"));

  const LogEntry* c_prep = latest_entry(h, "C", LogEntryKind::PrepareLog, "t1");
  REQUIRE(c_prep != nullptr);
  CHECK(c_prep->incr_parts.empty());

  // Commit phase: the root's terminal record carries the initial children
  // plus D; C picked up K (post-decision transfer), K picked up G.
  const LogEntry* a_commit = latest_entry(h, "A", LogEntryKind::CommitLog, "t1");
  REQUIRE(a_commit != nullptr);
  CHECK(a_commit->participants == std::vector<LogStreamId>{"B", "C"});
  CHECK(a_commit->incr_parts == std::vector<LogStreamId>{"D"});

  const LogEntry* c_commit = latest_entry(h, "C", LogEntryKind::CommitLog, "t1");
  REQUIRE(c_commit != nullptr);
  CHECK(c_commit->incr_parts == std::vector<LogStreamId>{"K"});

  const LogEntry* k_commit = latest_entry(h, "K", LogEntryKind::CommitLog, "t1");
  REQUIRE(k_commit != nullptr);
  CHECK(k_commit->incr_parts == std::vector<LogStreamId>{"G"});
  CHECK(k_commit->parent == LogStreamId("C"));

  // All eight streams finished with a terminal record for the txn.
  for (const char* node : {"A", "B", "C", "D", "E", "F", "K", "G"}) {
    CAPTURE(node);
    CHECK(latest_entry(h, node, LogEntryKind::CommitLog, "t1") != nullptr);
  }
}

TEST_CASE("fig4: the recovered tree closes over transfer destinations") {
  RunResult r = run_bundled("fig4_transfer");
  auto tree = build_log_stream_tree(r.history, "t1");
  // Through the completion point the tree is A{B,C,D}, B{E}, D{F}; the
  // post-decision additions K and G only appear in later commit records.
  REQUIRE(tree.size() == 6);
  CHECK_FALSE(tree.at("A").parent.has_value());
  CHECK(tree.at("B").parent == LogStreamId("A"));
  CHECK(tree.at("C").parent == LogStreamId("A"));
  CHECK(tree.at("D").parent == LogStreamId("A"));
  CHECK(tree.at("E").parent == LogStreamId("B"));
  CHECK(tree.at("F").parent == LogStreamId("D"));
  CHECK(tree.at("A").recorded == std::vector<LogStreamId>{"B", "C"});
  CHECK(tree.at("A").incr == std::vector<LogStreamId>{"D"});
}

TEST_CASE("fig4 passes both recording checks") {
  RunResult r = run_bundled("fig4_transfer");
  CHECK(check_minimum_set(r.history).empty());
  CHECK(check_transfer_principle(r.history).empty());
}

TEST_CASE("cap overflow ships a stub so the destination can vote") {
  RunResult r = run_bundled("transfer_cap");
  CHECK(r.ok);
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
  // q1's move swept t1 along (cap 1 overflowed), so D was grafted into the
  // tree and terminated with the rest.
  CHECK(latest_entry(r.history, "D", LogEntryKind::CommitLog, "t1") !=
        nullptr);
  bool overflow_seen = false;
  for (const auto& t : r.history.transfers) {
    if (std::find(t.overflow_affected.begin(), t.overflow_affected.end(),
                  "t1") != t.overflow_affected.end()) {
      overflow_seen = true;
    }
  }
  CHECK(overflow_seen);
}

TEST_CASE("circular transfer chain commits and terminates") {
  RunResult r = run_bundled("circular_transfer");
  CHECK(r.ok);
  CHECK(r.quiesced);
  CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
  CHECK(check_minimum_set(r.history).empty());
  CHECK(check_transfer_principle(r.history).empty());
}

TEST_CASE("randomized transfer interleavings never trip the checks") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    CAPTURE(seed);
    Scenario sc = test::make_random_transfer_scenario(seed);
    REQUIRE(sc.validate().empty());
    Simulator sim(sc);
    RunResult r = sim.run_to_quiescence();
    CHECK(r.quiesced);
    CHECK(r.violations.empty());
    CHECK(*r.txns.at("t1").final_outcome == UserOutcome::Committed);
    CHECK(*r.txns.at("t2").final_outcome == UserOutcome::Committed);
  }
}

TEST_CASE("minimum-set check flags a home outside the recovered tree") {
  RunHistory h = minimal_committed_history();
  CHECK(check_minimum_set(h).empty());

  // Claim p actually lived on X, a stream no 2PC record ever names: the
  // write's host cannot be reached from the recovered tree.
  h.initial_home["p"] = "X";
  auto problems = check_minimum_set(h);
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("txn=t1") != std::string::npos);
  CHECK(problems[0].find("missing from the recovered tree") !=
        std::string::npos);
}

TEST_CASE("minimum-set check demands a durable outbound record per hop") {
  RunHistory h = minimal_committed_history();

  // The placement flipped S -> X before completion (the TransferRecord says
  // so) but no outbound record was ever persisted: recovery cannot follow
  // the hop.
  TransferRecord rec;
  rec.id = 1;
  rec.partition = "p";
  rec.src = "S";
  rec.dst = "X";
  rec.ts = 2;
  rec.applied_ts = 3;
  rec.affected = {"t1"};
  rec.completed = true;
  h.transfers.push_back(rec);

  auto problems = check_minimum_set(h);
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("no durable outbound record") != std::string::npos);
}

TEST_CASE("transfer-principle check flags an unrecorded destination") {
  RunHistory h = minimal_committed_history();
  // S keeps writing 2PC records after the move without ever naming X.
  add_move_to_x(h, /*record_destination=*/false);

  auto problems = check_transfer_principle(h);
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("does not name X") != std::string::npos);
}

TEST_CASE("transfer-principle check accepts a recorded destination") {
  RunHistory h = minimal_committed_history();
  add_move_to_x(h, /*record_destination=*/true);
  CHECK(check_transfer_principle(h).empty());
  CHECK(check_minimum_set(h).empty());
}

TEST_CASE("transfer-principle check flags a missed affected transaction") {
  RunHistory h = minimal_committed_history();
  add_move_to_x(h, /*record_destination=*/true);
  // Scrub t1 from the outbound sweep: the declared write of p means the
  // completeness pass must notice the omission.
  h.transfers[0].affected.clear();
  auto problems = check_transfer_principle(h);
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("missed txn=t1") != std::string::npos);
}

TEST_CASE("transfer-principle check flags sweeping a stranger") {
  RunHistory h = minimal_committed_history();
  add_move_to_x(h, /*record_destination=*/true);
  // t9 never wrote p and did not ride in on cap overflow.
  h.transfers[0].affected.push_back("t9");
  auto problems = check_transfer_principle(h);
  REQUIRE_FALSE(problems.empty());
  bool overreach = false;
  for (const auto& s : problems) {
    if (s.find("never wrote partition") != std::string::npos &&
        s.find("t9") != std::string::npos) {
      overreach = true;
    }
  }
  CHECK(overreach);
}

TEST_SUITE_END();
