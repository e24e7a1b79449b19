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

// Helpers shared across the test binaries.

#ifndef TREE2PC_TESTS_TEST_UTIL_HPP_
#define TREE2PC_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tree2pc/scenario.hpp"
#include "tree2pc/sim.hpp"
#include "tree2pc/transfer_engine.hpp"

namespace tree2pc::test {

inline const Scenario& bundled(const std::string& name) {
  const Scenario* sc = find_bundled_scenario(name);
  if (sc == nullptr) {
    throw std::runtime_error("no bundled scenario named " + name);
  }
  return *sc;
}

inline RunResult run_bundled(const std::string& name) {
  Simulator sim(bundled(name));
  return sim.run_to_quiescence();
}

inline std::set<std::string> violation_kinds(const RunResult& r) {
  std::set<std::string> kinds;
  for (const auto& v : r.violations) kinds.insert(v.kind);
  return kinds;
}

inline bool trace_contains(const RunResult& r, const std::string& needle) {
  return std::any_of(r.trace.begin(), r.trace.end(),
                     [&](const std::string& line) {
                       return line.find(needle) != std::string::npos;
                     });
}

// Latest entry on `stream` with the given kind and txn (nullptr if none).
inline const LogEntry* latest_entry(const RunHistory& h,
                                    const LogStreamId& stream,
                                    LogEntryKind kind, const TxnId& txn) {
  const LogEntry* found = nullptr;
  for (const auto& e : h.entries) {
    if (e.stream == stream && e.kind == kind && e.txn == txn) found = &e;
  }
  return found;
}

// A randomized two-stream / two-transaction / two-transfer schedule: both
// partitions that move are in active transactions, both directions cross,
// and the seed drives both the timings and the delivery jitter. Every draw
// is a valid scenario (each partition moves once, from its initial home),
// and in the absence of scheduled failures both transactions must commit
// without tripping the recording checks.
inline Scenario make_random_transfer_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](Tick lo, Tick hi) {
    return lo + static_cast<Tick>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };

  Scenario sc;
  sc.name = "random_transfer_" + std::to_string(seed);
  sc.config.mode = SimMode::Logged;
  sc.config.seed = seed;
  sc.config.jitter = 3;

  sc.streams.push_back({"A", {"p1", "p2"}});
  sc.streams.push_back({"B", {"q1", "q2"}});

  TxnDecl t1;
  t1.id = "t1";
  t1.root = "A";
  t1.edges = {{"A", "B"}};
  t1.touches = {{"A", {"p1"}}, {"B", {"q1"}}};
  TxnDecl t2;
  t2.id = "t2";
  t2.root = "B";
  t2.edges = {{"B", "A"}};
  t2.touches = {{"B", {"q2"}}, {"A", {"p2"}}};
  sc.txns = {t1, t2};

  ScheduleItem moveP;
  moveP.kind = ScheduleItem::Kind::Transfer;
  moveP.at = pick(5, 80);
  moveP.stream = "A";
  moveP.partition = "p2";
  moveP.dst = "B";
  ScheduleItem moveQ;
  moveQ.kind = ScheduleItem::Kind::Transfer;
  moveQ.at = pick(5, 80);
  moveQ.stream = "B";
  moveQ.partition = "q1";
  moveQ.dst = "A";
  ScheduleItem commit1;
  commit1.kind = ScheduleItem::Kind::UserCommit;
  commit1.at = pick(1, 90);
  commit1.txn = "t1";
  ScheduleItem commit2;
  commit2.kind = ScheduleItem::Kind::UserCommit;
  commit2.at = pick(1, 90);
  commit2.txn = "t2";
  sc.schedule = {moveP, moveQ, commit1, commit2};

  sc.expect.outcomes = {{"t1", UserOutcome::Committed},
                        {"t2", UserOutcome::Committed}};
  sc.expect.no_violations = true;
  return sc;
}

}  // namespace tree2pc::test

#endif  // TREE2PC_TESTS_TEST_UTIL_HPP_
