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
#include "tree2pc/core_types.hpp"

using namespace tree2pc;

TEST_SUITE_BEGIN("core_types");

TEST_CASE("variant format/parse round-trips every switch combination") {
  for (int bits = 0; bits < 64; ++bits) {
    ProtocolVariant v;
    v.clear_stage = bits & 1;
    v.coordinator_commit_log = bits & 2;
    v.release_messages = bits & 4;
    v.d2pc_clear = bits & 8;
    v.unknown_states = bits & 16;
    v.tdt = bits & 32;
    ProtocolVariant back = ProtocolVariant::parse(v.format());
    CHECK(back == v);
  }
}

TEST_CASE("variant format is the documented comma list") {
  ProtocolVariant v;
  v.coordinator_commit_log = true;
  v.release_messages = true;
  CHECK(v.format() == "coordinator-commit-log,release-messages");
  CHECK(ProtocolVariant{}.format() == "coordinator-commit-log");
}

TEST_CASE("variant parse rejects unknown switches") {
  CHECK_THROWS_AS(ProtocolVariant::parse("coordinator-commit-log,warp-speed"),
                  ParseError);
}

TEST_CASE("variant validation rejects contradictory mixes") {
  ProtocolVariant v;  // baseline is fine
  CHECK(v.validate().empty());

  ProtocolVariant release_without_log;
  release_without_log.coordinator_commit_log = false;
  release_without_log.release_messages = true;
  CHECK_FALSE(release_without_log.validate().empty());

  ProtocolVariant both_logs;
  both_logs.clear_stage = true;
  both_logs.coordinator_commit_log = true;
  CHECK_FALSE(both_logs.validate().empty());

  ProtocolVariant d2pc_with_clear_stage;
  d2pc_with_clear_stage.clear_stage = true;
  d2pc_with_clear_stage.coordinator_commit_log = false;
  d2pc_with_clear_stage.d2pc_clear = true;
  CHECK_FALSE(d2pc_with_clear_stage.validate().empty());

  ProtocolVariant d2pc;
  d2pc.d2pc_clear = true;
  CHECK(d2pc.validate().empty());
}

TEST_CASE("enum renderings are stable") {
  CHECK(std::string(to_string(UserOutcome::Committed)) == "committed");
  CHECK(std::string(to_string(UserOutcome::Aborted)) == "aborted");
  CHECK(std::string(to_string(UserOutcome::TransUnknown)) == "trans-unknown");
  CHECK(std::string(to_string(VoteStatus::PrepareUnknown)) ==
        "prepare-unknown");
  CHECK(std::string(to_string(SimMode::Logged)) == "logged");
  CHECK(std::string(to_string(SimMode::Abstract)) == "abstract");
  CHECK(std::string(to_string(Granularity::LogStream)) == "log-stream");
  CHECK(std::string(to_string(Granularity::Partition)) == "partition");
}

TEST_CASE("id joins and splits are inverses") {
  std::vector<std::string> ids = {"A", "B", "C"};
  CHECK(join_ids(ids) == "A,B,C");
  CHECK(split_ids("A,B,C") == ids);
  CHECK(split_ids("").empty());
  CHECK(join_ids({}).empty());
}

TEST_CASE("trace hashing is deterministic and order-sensitive") {
  std::uint64_t h1 = fnv1a64("prepare");
  std::uint64_t h2 = fnv1a64("prepare");
  std::uint64_t h3 = fnv1a64("eraperp");
  CHECK(h1 == h2);
  CHECK(h1 != h3);
  CHECK(hex64(h1).size() == 16);
}

TEST_CASE("context vote summaries gate on every effective child") {
  TxnContext ctx;
  ctx.txn = "t";
  ctx.node = "A";
  ctx.children = {"B"};
  ctx.interm_children = {"C"};  // transfer-added, not yet persisted
  CHECK(ctx.effective_children() == std::vector<LogStreamId>{"B", "C"});

  ctx.votes["B"] = VoteStatus::Ok;
  CHECK_FALSE(ctx.all_votes_ok());  // C has not voted
  ctx.votes["C"] = VoteStatus::Ok;
  CHECK(ctx.all_votes_ok());

  ctx.votes["C"] = VoteStatus::PrepareUnknown;
  CHECK_FALSE(ctx.all_votes_ok());
  CHECK(ctx.any_vote_blocking());
  CHECK(ctx.any_vote_unknown_state());

  ctx.votes["C"] = VoteStatus::No;
  CHECK(ctx.any_vote_blocking());
  CHECK_FALSE(ctx.any_vote_unknown_state());

  // The engine primes one ack slot per effective child at fan-out time.
  ctx.acks["B"] = false;
  ctx.acks["C"] = false;
  CHECK_FALSE(ctx.all_acked());
  ctx.acks["B"] = true;
  CHECK_FALSE(ctx.all_acked());
  ctx.acks["C"] = true;
  CHECK(ctx.all_acked());
}

TEST_SUITE_END();
