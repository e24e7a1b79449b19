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

#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "tree2pc/scenario.hpp"

using namespace tree2pc;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), "cannot open " << path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE_BEGIN("scenario");

TEST_CASE("every bundled scenario validates and round-trips") {
  CHECK(bundled_scenarios().size() == 20);
  for (const auto& sc : bundled_scenarios()) {
    CAPTURE(sc.name);
    CHECK(sc.validate().empty());
    Scenario back = Scenario::parse_text(sc.format());
    CHECK(back.format() == sc.format());
    CHECK(back.name == sc.name);
    CHECK(back.config.variant == sc.config.variant);
    CHECK(back.streams.size() == sc.streams.size());
    CHECK(back.schedule.size() == sc.schedule.size());
  }
}

TEST_CASE("the scenarios/ directory mirrors the bundled corpus") {
  for (const auto& sc : bundled_scenarios()) {
    CAPTURE(sc.name);
    std::string on_disk =
        read_file(std::string(TREE2PC_SOURCE_DIR) + "/scenarios/" + sc.name +
                  ".scn");
    CHECK(on_disk == sc.format());
  }
}

TEST_CASE("parser reports the offending line") {
  std::string text =
      "tree2pc-scenario v1\n"
      "name broken\n"
      "frobnicate yes\n"
      "end\n";
  try {
    Scenario::parse_text(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("parser rejects a missing or foreign header") {
  CHECK_THROWS_AS(Scenario::parse_text("name x\nend\n"), ParseError);
  CHECK_THROWS_AS(Scenario::parse_text("tree2pc-scenario v9\nname x\nend\n"),
                  ParseError);
}

TEST_CASE("validate names the dangling reference") {
  Scenario sc = test::bundled("chain_commit");

  SUBCASE("touch on an undeclared stream") {
    sc.txns[0].touches.push_back({"Z", {"pz"}});
    std::string problem = sc.validate();
    CHECK(problem.find("Z") != std::string::npos);
  }
  SUBCASE("transfer from a stream that does not host the partition") {
    ScheduleItem item;
    item.kind = ScheduleItem::Kind::Transfer;
    item.at = 5;
    item.stream = "A";
    item.partition = "does-not-exist";
    item.dst = "B";
    sc.schedule.push_back(item);
    std::string problem = sc.validate();
    CHECK(problem.find("does-not-exist") != std::string::npos);
  }
  SUBCASE("schedule naming an unknown txn") {
    ScheduleItem item;
    item.kind = ScheduleItem::Kind::UserCommit;
    item.at = 5;
    item.txn = "ghost";
    sc.schedule.push_back(item);
    std::string problem = sc.validate();
    CHECK(problem.find("ghost") != std::string::npos);
  }
}

TEST_CASE("transfer validity follows the schedule's own ordering") {
  // p moves A -> B at 10; a second move B -> C at 20 is valid only because
  // the first one already relocated it.
  Scenario sc;
  sc.name = "chained_moves";
  sc.streams = {{"A", {"p"}}, {"B", {}}, {"C", {}}};
  TxnDecl t;
  t.id = "t1";
  t.root = "A";
  t.touches = {{"A", {"p"}}};
  sc.txns = {t};
  ScheduleItem first;
  first.kind = ScheduleItem::Kind::Transfer;
  first.at = 10;
  first.stream = "A";
  first.partition = "p";
  first.dst = "B";
  ScheduleItem second = first;
  second.at = 20;
  second.stream = "B";
  second.dst = "C";
  ScheduleItem commit;
  commit.kind = ScheduleItem::Kind::UserCommit;
  commit.at = 30;
  commit.txn = "t1";
  sc.schedule = {first, second, commit};
  CHECK(sc.validate().empty());

  // Reversing the order leaves B without the partition at t=5.
  sc.schedule[1].at = 5;
  CHECK_FALSE(sc.validate().empty());
}

TEST_CASE("uniform tree generator produces the caterpillar shape") {
  ProtocolVariant v;
  Scenario sc = make_uniform_tree(2, 3, v);
  CHECK(sc.validate().empty());
  // Root plus height*fanout participants.
  CHECK(sc.streams.size() == 1 + 2 * 3);
  REQUIRE(sc.txns.size() == 1);
  CHECK(sc.txns[0].edges.size() == 2 * 3);
  // Every stream hosts data for the transaction.
  CHECK(sc.txns[0].touches.size() == sc.streams.size());
}

TEST_CASE("flat tree generator is the height-1 caterpillar") {
  ProtocolVariant v;
  v.release_messages = true;
  Scenario sc = make_flat_tree(4, v);
  CHECK(sc.validate().empty());
  CHECK(sc.streams.size() == 5);
  CHECK(sc.txns[0].edges.size() == 4);
  for (const auto& [parent, child] : sc.txns[0].edges) {
    CHECK(parent == sc.txns[0].root);
  }
}

TEST_CASE("single stream generator hosts every partition on the root") {
  Scenario sc = make_single_stream(100, Granularity::LogStream);
  CHECK(sc.validate().empty());
  CHECK(sc.streams.size() == 1);
  CHECK(sc.streams[0].partitions.size() == 100);
  REQUIRE(sc.txns.size() == 1);
  REQUIRE(sc.txns[0].touches.size() == 1);
  CHECK(sc.txns[0].touches[0].second.size() == 100);

  Scenario per_partition = make_single_stream(100, Granularity::Partition);
  CHECK(per_partition.config.granularity == Granularity::Partition);
}

TEST_CASE("expectation lines round-trip") {
  Scenario sc = test::bundled("flat_release");
  CHECK_FALSE(sc.expect.empty());
  Scenario back = Scenario::parse_text(sc.format());
  CHECK(back.expect.outcomes == sc.expect.outcomes);
  CHECK(back.expect.counters == sc.expect.counters);
  CHECK(back.expect.no_violations == sc.expect.no_violations);
}

TEST_SUITE_END();
