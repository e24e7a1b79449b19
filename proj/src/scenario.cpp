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

#include "tree2pc/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tree2pc/abstract_model.hpp"

namespace tree2pc {
namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail(int line_no, const std::string& what) {
  throw ParseError("scenario line " + std::to_string(line_no) + ": " + what);
}

std::int64_t parse_int(const std::string& tok, int line_no) {
  try {
    size_t pos = 0;
    std::int64_t v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(line_no, "expected an integer, got '" + tok + "'");
  }
}

std::uint64_t parse_uint(const std::string& tok, int line_no) {
  std::int64_t v = parse_int(tok, line_no);
  if (v < 0) fail(line_no, "expected a non-negative integer, got '" + tok + "'");
  return static_cast<std::uint64_t>(v);
}

UserOutcome parse_outcome(const std::string& tok, int line_no) {
  for (UserOutcome o : {UserOutcome::Committed, UserOutcome::Aborted,
                        UserOutcome::TransUnknown}) {
    if (tok == to_string(o)) return o;
  }
  fail(line_no, "unknown outcome '" + tok + "'");
}

const char* kind_word(ScheduleItem::Kind k) {
  switch (k) {
    case ScheduleItem::Kind::UserCommit: return "commit";
    case ScheduleItem::Kind::InternalAbort: return "internal-abort";
    case ScheduleItem::Kind::LocalNo: return "local-no";
    case ScheduleItem::Kind::Transfer: return "transfer";
    case ScheduleItem::Kind::Crash: return "crash";
    case ScheduleItem::Kind::Recover: return "recover";
    case ScheduleItem::Kind::Reclaim: return "reclaim";
    case ScheduleItem::Kind::DuplicateMsg: return "duplicate";
  }
  return "?";
}

}  // namespace

const StreamDecl* Scenario::find_stream(const LogStreamId& id) const {
  for (const auto& s : streams) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const TxnDecl* Scenario::find_txn(const TxnId& id) const {
  for (const auto& t : txns) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

Scenario Scenario::parse_text(const std::string& text) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  bool saw_end = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (auto pos = line.find('#'); pos != std::string::npos) {
      line.erase(pos);
    }
    std::vector<std::string> tok = tokenize(line);
    if (tok.empty()) continue;

    if (!saw_header) {
      if (tok.size() != 2 || tok[0] != "tree2pc-scenario" || tok[1] != "v1") {
        fail(line_no, "expected header 'tree2pc-scenario v1'");
      }
      saw_header = true;
      continue;
    }
    if (saw_end) fail(line_no, "content after 'end'");

    const std::string& key = tok[0];
    auto need = [&](size_t n) {
      if (tok.size() != n) {
        fail(line_no, "'" + key + "' expects " + std::to_string(n - 1) +
                          " argument(s)");
      }
    };

    if (key == "end") {
      need(1);
      saw_end = true;
    } else if (key == "name") {
      need(2);
      sc.name = tok[1];
    } else if (key == "mode") {
      need(2);
      if (tok[1] == "logged") {
        sc.config.mode = SimMode::Logged;
      } else if (tok[1] == "abstract") {
        sc.config.mode = SimMode::Abstract;
      } else {
        fail(line_no, "mode must be 'logged' or 'abstract'");
      }
    } else if (key == "seed") {
      need(2);
      sc.config.seed = parse_uint(tok[1], line_no);
    } else if (key == "msg-delay") {
      need(2);
      sc.config.msg_delay = parse_int(tok[1], line_no);
    } else if (key == "log-sync-delay") {
      need(2);
      sc.config.log_sync_delay = parse_int(tok[1], line_no);
    } else if (key == "jitter") {
      need(2);
      sc.config.jitter = parse_int(tok[1], line_no);
    } else if (key == "retry-interval") {
      need(2);
      sc.config.retry_interval = parse_int(tok[1], line_no);
    } else if (key == "variant") {
      need(2);
      try {
        sc.config.variant =
            ProtocolVariant::parse(tok[1] == "none" ? "" : tok[1]);
      } catch (const ParseError& e) {
        fail(line_no, e.what());
      }
    } else if (key == "granularity") {
      need(2);
      if (tok[1] == "log-stream") {
        sc.config.granularity = Granularity::LogStream;
      } else if (tok[1] == "partition") {
        sc.config.granularity = Granularity::Partition;
      } else {
        fail(line_no, "granularity must be 'log-stream' or 'partition'");
      }
    } else if (key == "tdt-retention") {
      need(2);
      sc.config.tdt_retention = parse_int(tok[1], line_no);
    } else if (key == "max-events") {
      need(2);
      sc.config.max_events = parse_uint(tok[1], line_no);
    } else if (key == "partition-cap") {
      need(2);
      sc.config.max_recorded_partitions =
          static_cast<int>(parse_int(tok[1], line_no));
    } else if (key == "stream") {
      if (tok.size() != 2 && tok.size() != 4) {
        fail(line_no, "'stream' expects: stream <id> [partitions <p,..>]");
      }
      StreamDecl s;
      s.id = tok[1];
      if (tok.size() == 4) {
        if (tok[2] != "partitions") fail(line_no, "expected 'partitions'");
        s.partitions = split_ids(tok[3]);
      }
      sc.streams.push_back(std::move(s));
    } else if (key == "txn") {
      need(4);
      if (tok[2] != "root") fail(line_no, "expected 'root'");
      TxnDecl t;
      t.id = tok[1];
      t.root = tok[3];
      sc.txns.push_back(std::move(t));
    } else if (key == "edge") {
      need(4);
      for (auto& t : sc.txns) {
        if (t.id == tok[1]) {
          t.edges.emplace_back(tok[2], tok[3]);
          goto edge_done;
        }
      }
      fail(line_no, "edge before its 'txn' declaration: " + tok[1]);
    edge_done:;
    } else if (key == "touch") {
      need(4);
      for (auto& t : sc.txns) {
        if (t.id == tok[1]) {
          t.touches.emplace_back(tok[2], split_ids(tok[3]));
          goto touch_done;
        }
      }
      fail(line_no, "touch before its 'txn' declaration: " + tok[1]);
    touch_done:;
    } else if (key == "drop-user-response") {
      need(2);
      sc.drop_user_response.insert(tok[1]);
    } else if (key == "at") {
      if (tok.size() < 3) fail(line_no, "'at' expects: at <tick> <action> ..");
      ScheduleItem item;
      item.at = parse_int(tok[1], line_no);
      const std::string& act = tok[2];
      auto need_act = [&](size_t n) {
        if (tok.size() != n) {
          fail(line_no, "'" + act + "' has the wrong argument count");
        }
      };
      if (act == "commit") {
        need_act(4);
        item.kind = ScheduleItem::Kind::UserCommit;
        item.txn = tok[3];
      } else if (act == "internal-abort") {
        need_act(5);
        item.kind = ScheduleItem::Kind::InternalAbort;
        item.stream = tok[3];
        item.txn = tok[4];
      } else if (act == "local-no") {
        need_act(5);
        item.kind = ScheduleItem::Kind::LocalNo;
        item.stream = tok[3];
        item.txn = tok[4];
      } else if (act == "transfer") {
        need_act(6);
        item.kind = ScheduleItem::Kind::Transfer;
        item.partition = tok[3];
        item.stream = tok[4];
        item.dst = tok[5];
      } else if (act == "crash") {
        need_act(4);
        item.kind = ScheduleItem::Kind::Crash;
        item.stream = tok[3];
      } else if (act == "recover") {
        need_act(4);
        item.kind = ScheduleItem::Kind::Recover;
        item.stream = tok[3];
      } else if (act == "reclaim") {
        need_act(5);
        item.kind = ScheduleItem::Kind::Reclaim;
        item.stream = tok[3];
        item.txn = tok[4];
      } else if (act == "duplicate") {
        need_act(4);
        item.kind = ScheduleItem::Kind::DuplicateMsg;
        item.ordinal = parse_uint(tok[3], line_no);
      } else {
        fail(line_no, "unknown schedule action '" + act + "'");
      }
      sc.schedule.push_back(std::move(item));
    } else if (key == "expect") {
      if (tok.size() < 2) fail(line_no, "'expect' expects a sub-kind");
      const std::string& what = tok[1];
      if (what == "outcome") {
        need(4);
        sc.expect.outcomes[tok[2]] = parse_outcome(tok[3], line_no);
      } else if (what == "violation") {
        need(3);
        sc.expect.violations.push_back(tok[2]);
      } else if (what == "no-violations") {
        need(2);
        sc.expect.no_violations = true;
      } else if (what == "hash") {
        need(3);
        sc.expect.trace_hash = tok[2];
      } else if (what == "counter") {
        need(4);
        sc.expect.counters[tok[2]] = parse_int(tok[3], line_no);
      } else {
        fail(line_no, "unknown expectation '" + what + "'");
      }
    } else {
      fail(line_no, "unknown directive '" + key + "'");
    }
  }

  if (!saw_header) fail(line_no, "empty scenario (missing header)");
  if (!saw_end) fail(line_no, "missing 'end' marker");
  return sc;
}

Scenario Scenario::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

std::string Scenario::format() const {
  std::ostringstream out;
  out << "tree2pc-scenario v1\n";
  out << "name " << name << '\n';
  out << "mode " << to_string(config.mode) << '\n';
  out << "seed " << config.seed << '\n';
  out << "msg-delay " << config.msg_delay << '\n';
  out << "log-sync-delay " << config.log_sync_delay << '\n';
  out << "jitter " << config.jitter << '\n';
  out << "retry-interval " << config.retry_interval << '\n';
  std::string flags = config.variant.format();
  out << "variant " << (flags.empty() ? "none" : flags) << '\n';
  out << "granularity " << to_string(config.granularity) << '\n';
  out << "tdt-retention " << config.tdt_retention << '\n';
  out << "partition-cap " << config.max_recorded_partitions << '\n';
  out << "max-events " << config.max_events << '\n';
  for (const auto& s : streams) {
    out << "stream " << s.id;
    if (!s.partitions.empty()) out << " partitions " << join_ids(s.partitions);
    out << '\n';
  }
  for (const auto& t : txns) {
    out << "txn " << t.id << " root " << t.root << '\n';
    for (const auto& [p, c] : t.edges) {
      out << "edge " << t.id << ' ' << p << ' ' << c << '\n';
    }
    for (const auto& [s, parts] : t.touches) {
      out << "touch " << t.id << ' ' << s << ' ' << join_ids(parts) << '\n';
    }
  }
  for (const auto& txn : drop_user_response) {
    out << "drop-user-response " << txn << '\n';
  }
  for (const auto& i : schedule) {
    out << "at " << i.at << ' ' << kind_word(i.kind);
    switch (i.kind) {
      case ScheduleItem::Kind::UserCommit: out << ' ' << i.txn; break;
      case ScheduleItem::Kind::InternalAbort:
      case ScheduleItem::Kind::LocalNo:
      case ScheduleItem::Kind::Reclaim:
        out << ' ' << i.stream << ' ' << i.txn;
        break;
      case ScheduleItem::Kind::Transfer:
        out << ' ' << i.partition << ' ' << i.stream << ' ' << i.dst;
        break;
      case ScheduleItem::Kind::Crash:
      case ScheduleItem::Kind::Recover:
        out << ' ' << i.stream;
        break;
      case ScheduleItem::Kind::DuplicateMsg: out << ' ' << i.ordinal; break;
    }
    out << '\n';
  }
  for (const auto& [txn, o] : expect.outcomes) {
    out << "expect outcome " << txn << ' ' << to_string(o) << '\n';
  }
  for (const auto& v : expect.violations) {
    out << "expect violation " << v << '\n';
  }
  if (expect.no_violations) out << "expect no-violations\n";
  if (expect.trace_hash) out << "expect hash " << *expect.trace_hash << '\n';
  for (const auto& [k, v] : expect.counters) {
    out << "expect counter " << k << ' ' << v << '\n';
  }
  out << "end\n";
  return out.str();
}

std::string Scenario::validate() const {
  if (name.empty()) return "scenario has no name";
  if (std::string err = config.variant.validate(); !err.empty()) return err;
  if (config.msg_delay < 0 || config.log_sync_delay < 0 || config.jitter < 0 ||
      config.tdt_retention < 0 || config.retry_interval <= 0) {
    return "delays, jitter, retention must be >= 0 and retry-interval > 0";
  }
  if (config.max_events == 0) return "max-events must be positive";
  if (config.max_recorded_partitions <= 0) {
    return "partition-cap must be positive";
  }

  std::set<LogStreamId> stream_ids;
  std::map<PartitionId, LogStreamId> home;
  for (const auto& s : streams) {
    if (s.id.empty()) return "empty stream id";
    if (!stream_ids.insert(s.id).second) return "duplicate stream " + s.id;
    for (const auto& p : s.partitions) {
      if (!home.emplace(p, s.id).second) {
        return "partition " + p + " hosted by more than one stream";
      }
    }
  }
  if (streams.empty()) return "no streams declared";

  std::set<TxnId> txn_ids;
  for (const auto& t : txns) {
    if (!txn_ids.insert(t.id).second) return "duplicate txn " + t.id;
    if (!stream_ids.count(t.root)) {
      return "txn " + t.id + " root references unknown stream " + t.root;
    }
    // Participant streams must be reachable from the root through declared
    // edges; streams entered only through transfers need no declaration.
    std::set<LogStreamId> reachable{t.root};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [p, c] : t.edges) {
        if (reachable.count(p) && reachable.insert(c).second) grew = true;
      }
    }
    for (const auto& [p, c] : t.edges) {
      if (!stream_ids.count(p) || !stream_ids.count(c)) {
        return "txn " + t.id + " edge references an unknown stream";
      }
      if (p == c) return "txn " + t.id + " has a self edge at " + p;
      if (c == t.root) {
        return "txn " + t.id + " declares an edge into its own root " +
               "(loops form through transfers, not initial edges)";
      }
      if (!reachable.count(p)) {
        return "txn " + t.id + " edge parent " + p +
               " is not reachable from the root";
      }
    }
    std::set<PartitionId> touched;
    for (const auto& [s, parts] : t.touches) {
      if (!reachable.count(s)) {
        return "txn " + t.id + " touches stream " + s +
               " outside its participant tree";
      }
      for (const auto& p : parts) {
        auto it = home.find(p);
        if (it == home.end()) {
          return "txn " + t.id + " touches unknown partition " + p;
        }
        if (it->second != s) {
          return "txn " + t.id + " touch of " + p + " names stream " + s +
                 " but the partition is hosted by " + it->second;
        }
        if (!touched.insert(p).second) {
          return "txn " + t.id + " touches partition " + p + " twice";
        }
      }
    }
  }

  // Replay the schedule's own ordering to check every transfer leaves from
  // the partition's current home.
  std::vector<const ScheduleItem*> ordered;
  ordered.reserve(schedule.size());
  for (const auto& i : schedule) ordered.push_back(&i);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ScheduleItem* a, const ScheduleItem* b) {
                     return a->at < b->at;
                   });
  std::map<PartitionId, LogStreamId> moving = home;
  for (const ScheduleItem* i : ordered) {
    if (i->at < 0) return "schedule entries must not be scheduled before 0";
    switch (i->kind) {
      case ScheduleItem::Kind::UserCommit:
      case ScheduleItem::Kind::InternalAbort:
      case ScheduleItem::Kind::LocalNo:
      case ScheduleItem::Kind::Reclaim:
        if (!txn_ids.count(i->txn)) {
          return "schedule references unknown txn " + i->txn;
        }
        break;
      default: break;
    }
    switch (i->kind) {
      case ScheduleItem::Kind::InternalAbort:
      case ScheduleItem::Kind::LocalNo:
      case ScheduleItem::Kind::Reclaim:
      case ScheduleItem::Kind::Crash:
      case ScheduleItem::Kind::Recover:
        if (!stream_ids.count(i->stream)) {
          return "schedule references unknown stream " + i->stream;
        }
        break;
      case ScheduleItem::Kind::Transfer: {
        if (!stream_ids.count(i->stream) || !stream_ids.count(i->dst)) {
          return "transfer references an unknown stream";
        }
        if (i->stream == i->dst) return "transfer with src == dst";
        auto it = moving.find(i->partition);
        if (it == moving.end()) {
          return "transfer of unknown partition " + i->partition;
        }
        if (it->second != i->stream) {
          return "transfer of " + i->partition + " from " + i->stream +
                 " but its home at that point is " + it->second;
        }
        it->second = i->dst;
        break;
      }
      case ScheduleItem::Kind::DuplicateMsg:
        if (i->ordinal == 0) return "duplicate ordinal is 1-based";
        break;
      default: break;
    }
  }

  for (const auto& txn : drop_user_response) {
    if (!txn_ids.count(txn)) {
      return "drop-user-response references unknown txn " + txn;
    }
  }
  for (const auto& [txn, o] : expect.outcomes) {
    (void)o;
    if (!txn_ids.count(txn)) {
      return "expected outcome references unknown txn " + txn;
    }
  }
  if (expect.no_violations && !expect.violations.empty()) {
    return "expect no-violations conflicts with expected violations";
  }

  if (config.mode == SimMode::Abstract) {
    if (txns.size() != 1) return "abstract mode runs exactly one txn";
    if (streams.size() > static_cast<size_t>(kMaxNodes)) {
      return "abstract mode supports at most " + std::to_string(kMaxNodes) +
             " streams";
    }
    if (config.granularity != Granularity::LogStream) {
      return "abstract mode models log-stream granularity only";
    }
    if (!drop_user_response.empty()) {
      return "abstract mode has no user-response channel to drop";
    }
    for (const auto& i : schedule) {
      switch (i.kind) {
        case ScheduleItem::Kind::Crash:
        case ScheduleItem::Kind::Recover:
        case ScheduleItem::Kind::Reclaim:
        case ScheduleItem::Kind::LocalNo:
          return "abstract mode does not model crash/recover/reclaim/local-no";
        default: break;
      }
    }
  }
  return "";
}

namespace {

ScheduleItem user_commit(Tick at, const TxnId& txn) {
  ScheduleItem item;
  item.kind = ScheduleItem::Kind::UserCommit;
  item.at = at;
  item.txn = txn;
  return item;
}

}  // namespace

Scenario make_flat_tree(int fanout, const ProtocolVariant& v) {
  Scenario sc;
  sc.name = "flat-n" + std::to_string(fanout);
  sc.config.variant = v;
  sc.config.seed = 1;
  TxnDecl t;
  t.id = "t1";
  t.root = "r";
  sc.streams.push_back({"r", {"p_r"}});
  t.touches.push_back({"r", {"p_r"}});
  for (int i = 1; i <= fanout; ++i) {
    LogStreamId id = "a" + std::to_string(i);
    sc.streams.push_back({id, {"p_" + id}});
    t.edges.emplace_back("r", id);
    t.touches.push_back({id, {"p_" + id}});
  }
  sc.txns.push_back(std::move(t));
  sc.schedule.push_back(user_commit(0, "t1"));
  return sc;
}

Scenario make_uniform_tree(int height, int fanout, const ProtocolVariant& v) {
  Scenario sc;
  sc.name = "uniform-h" + std::to_string(height) + "-n" +
            std::to_string(fanout);
  sc.config.variant = v;
  sc.config.seed = 1;
  TxnDecl t;
  t.id = "t1";
  t.root = "r";
  sc.streams.push_back({"r", {"p_r"}});
  t.touches.push_back({"r", {"p_r"}});
  // Caterpillar spine: each level has `fanout` children of the previous
  // spine node; the first child continues the spine until the last level.
  LogStreamId parent = "r";
  for (int level = 1; level <= height; ++level) {
    LogStreamId next_spine;
    for (int k = 1; k <= fanout; ++k) {
      LogStreamId id = (k == 1 && level < height)
                           ? "s" + std::to_string(level)
                           : "l" + std::to_string(level) + "_" +
                                 std::to_string(k);
      sc.streams.push_back({id, {"p_" + id}});
      t.edges.emplace_back(parent, id);
      t.touches.push_back({id, {"p_" + id}});
      if (k == 1) next_spine = id;
    }
    parent = next_spine;
  }
  sc.txns.push_back(std::move(t));
  sc.schedule.push_back(user_commit(0, "t1"));
  return sc;
}

Scenario make_single_stream(int partitions, Granularity granularity) {
  Scenario sc;
  sc.name = "single-stream-" + std::to_string(partitions);
  sc.config.granularity = granularity;
  sc.config.seed = 1;
  StreamDecl s;
  s.id = "r";
  TxnDecl t;
  t.id = "t1";
  t.root = "r";
  std::vector<PartitionId> parts;
  for (int i = 1; i <= partitions; ++i) {
    parts.push_back("p" + std::to_string(i));
  }
  s.partitions = parts;
  t.touches.push_back({"r", parts});
  sc.streams.push_back(std::move(s));
  sc.txns.push_back(std::move(t));
  sc.schedule.push_back(user_commit(0, "t1"));
  return sc;
}

namespace {

// Bundled corpus. The same texts ship as files under scenarios/; a test pins
// the two copies together.
const std::pair<const char*, const char*> kBundledTexts[] = {
    {"chain_commit", R"(tree2pc-scenario v1
name chain_commit
# Three-stream chain: the root drives one intermediate with one leaf below.
seed 1
stream C partitions pc
stream A partitions pa
stream B partitions pb
txn t1 root C
edge t1 C A
edge t1 A B
touch t1 C pc
touch t1 A pa
touch t1 B pb
at 0 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"flat_release", R"(tree2pc-scenario v1
name flat_release
# Four flat participants under the commit-point release optimization:
# 5N messages, 2N+1 synchronous logs, one asynchronous clear log.
seed 1
variant coordinator-commit-log,release-messages
stream R partitions pr
stream P1 partitions p1
stream P2 partitions p2
stream P3 partitions p3
stream P4 partitions p4
txn t1 root R
edge t1 R P1
edge t1 R P2
edge t1 R P3
edge t1 R P4
touch t1 R pr
touch t1 P1 p1
touch t1 P2 p2
touch t1 P3 p3
touch t1 P4 p4
at 0 commit t1
expect outcome t1 committed
expect no-violations
expect counter msgs_total 20
expect counter sync_logs 9
expect counter async_logs 1
expect counter response_roundtrips 2
expect counter response_log_syncs 1
end
)"},
    {"one_phase_commit", R"(tree2pc-scenario v1
name one_phase_commit
# A childless root degenerates to one-phase commit: no messages, one
# synchronous commit log, reply after it persists.
seed 1
stream R partitions p1
txn t1 root R
touch t1 R p1
at 0 commit t1
expect outcome t1 committed
expect no-violations
expect counter msgs_total 0
expect counter sync_logs 1
expect counter response_roundtrips 0
expect counter response_log_syncs 1
end
)"},
    {"fig4_transfer", R"(tree2pc-scenario v1
name fig4_transfer
# Participant evolution under concurrent partition transfer: three initial
# participants; three transfers while RUNNING hand off to D, E and F; two
# more during PREPARE stage K and G, which join only for the commit phase.
seed 1
stream A partitions pa,pad
stream B partitions pb,pbe
stream C partitions pc,pck
stream D
stream E
stream F
stream K
stream G
txn t1 root A
edge t1 A B
edge t1 A C
touch t1 A pa,pad
touch t1 B pb,pbe
touch t1 C pc,pck
at 10 transfer pad A D
at 30 transfer pbe B E
at 50 transfer pad D F
at 100 commit t1
at 110 transfer pck C K
at 120 transfer pck K G
expect outcome t1 committed
expect no-violations
end
)"},
    {"circular_transfer", R"(tree2pc-scenario v1
name circular_transfer
# A partition hops A -> B -> A, so A and B each become the other's child.
# The long log-sync delay makes the deferred duplicate-prepare reply visible:
# A answers B only once A's own prepare log has persisted.
seed 1
msg-delay 2
log-sync-delay 9
stream C partitions pc
stream A partitions pa,pb
stream B
txn t1 root C
edge t1 C A
touch t1 C pc
touch t1 A pa,pb
at 10 transfer pb A B
at 40 transfer pb B A
at 100 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"internal_abort", R"(tree2pc-scenario v1
name internal_abort
# The leaf aborts locally before the commit request reaches it; its orphan
# NO answer rolls the whole transaction back.
seed 1
stream C partitions pc
stream A partitions pa
stream B partitions pb
txn t1 root C
edge t1 C A
edge t1 A B
touch t1 C pc
touch t1 A pa
touch t1 B pb
at 20 internal-abort B t1
at 100 commit t1
expect outcome t1 aborted
expect no-violations
end
)"},
    {"local_no_vote", R"(tree2pc-scenario v1
name local_no_vote
# One participant's own status flips to NO, so it votes NO after preparing.
seed 1
stream C partitions pc
stream P1 partitions p1
stream P2 partitions p2
txn t1 root C
edge t1 C P1
edge t1 C P2
touch t1 C pc
touch t1 P1 p1
touch t1 P2 p2
at 10 local-no P2 t1
at 100 commit t1
expect outcome t1 aborted
expect no-violations
end
)"},
    {"crash_replay_commit", R"(tree2pc-scenario v1
name crash_replay_commit
# The leaf crashes after voting but before its commit log persists; recovery
# rebuilds PREPARE from the prepare log and the parent's re-driven commit
# request completes the transaction.
seed 1
stream C partitions pc
stream A partitions pa
stream B partitions pb
txn t1 root C
edge t1 C A
edge t1 A B
touch t1 C pc
touch t1 A pa
touch t1 B pb
at 0 commit t1
at 34 crash B
at 200 recover B
expect outcome t1 committed
expect no-violations
end
)"},
    {"crash_lost_context", R"(tree2pc-scenario v1
name crash_lost_context
# The leaf crashes before anything persisted: its context is gone, the
# retried prepare hits the orphan path and the transaction aborts.
seed 1
stream C partitions pc
stream A partitions pa
stream B partitions pb
txn t1 root C
edge t1 C A
edge t1 A B
touch t1 C pc
touch t1 A pa
touch t1 B pb
at 0 commit t1
at 11 crash B
at 200 recover B
expect outcome t1 aborted
expect no-violations
end
)"},
    {"transfer_cap", R"(tree2pc-scenario v1
name transfer_cap
# With the recorded-partition cap at one, the context overflows and every
# transfer out of A conservatively adds its destination as a participant,
# even though the moved partition is untouched by the transaction.
seed 1
partition-cap 1
stream A partitions p1,p2,q1
stream D
txn t1 root A
touch t1 A p1,p2
at 10 transfer q1 A D
at 100 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"fig6_lying_baseline", R"(tree2pc-scenario v1
name fig6_lying_baseline
# The committed transaction's response to the user is lost; after all
# contexts and logs are reclaimed the user retries, the participants lie
# with NO, and the user is told ABORTED for a committed transaction.
seed 1
stream C partitions pc
stream P1 partitions p1
stream P2 partitions p2
txn t1 root C
edge t1 C P1
edge t1 C P2
touch t1 C pc
touch t1 P1 p1
touch t1 P2 p2
drop-user-response t1
at 0 commit t1
at 600 reclaim C t1
at 620 reclaim P1 t1
at 640 reclaim P2 t1
at 1000 commit t1
expect outcome t1 aborted
expect violation outcome-contradiction
expect violation commit-abort-divergence
end
)"},
    {"fig7_unknown", R"(tree2pc-scenario v1
name fig7_unknown
# Identical schedule with unknown states on: the reclaimed participants
# answer prepare-unknown and the recreated coordinator reports
# trans-unknown instead of lying.
seed 1
variant coordinator-commit-log,unknown-states
stream C partitions pc
stream P1 partitions p1
stream P2 partitions p2
txn t1 root C
edge t1 C P1
edge t1 C P2
touch t1 C pc
touch t1 P1 p1
touch t1 P2 p2
drop-user-response t1
at 0 commit t1
at 600 reclaim C t1
at 620 reclaim P1 t1
at 640 reclaim P2 t1
at 1000 commit t1
expect outcome t1 trans-unknown
expect no-violations
end
)"},
    {"fig6_lying_tdt", R"(tree2pc-scenario v1
name fig6_lying_tdt
# Same schedule again with the transaction data table: the retried request
# finds the decided outcome within retention and the user sees COMMITTED.
seed 1
variant coordinator-commit-log,unknown-states,tdt
stream C partitions pc
stream P1 partitions p1
stream P2 partitions p2
txn t1 root C
edge t1 C P1
edge t1 C P2
touch t1 C pc
touch t1 P1 p1
touch t1 P2 p2
drop-user-response t1
at 0 commit t1
at 600 reclaim C t1
at 620 reclaim P1 t1
at 640 reclaim P2 t1
at 1000 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"tdt_expired", R"(tree2pc-scenario v1
name tdt_expired
# The retention window has passed by the time the user retries, so the
# table no longer answers and the unknown path takes over.
seed 1
variant coordinator-commit-log,unknown-states,tdt
tdt-retention 100
stream C partitions pc
stream P1 partitions p1
stream P2 partitions p2
txn t1 root C
edge t1 C P1
edge t1 C P2
touch t1 C pc
touch t1 P1 p1
touch t1 P2 p2
drop-user-response t1
at 0 commit t1
at 600 reclaim C t1
at 620 reclaim P1 t1
at 640 reclaim P2 t1
at 1000 commit t1
expect outcome t1 trans-unknown
expect no-violations
end
)"},
    {"abs_chain_commit", R"(tree2pc-scenario v1
name abs_chain_commit
mode abstract
seed 1
stream r
stream a
stream b
txn t1 root r
edge t1 r a
edge t1 a b
at 0 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"abs_star_commit", R"(tree2pc-scenario v1
name abs_star_commit
mode abstract
seed 1
stream r
stream a
stream b
stream c
txn t1 root r
edge t1 r a
edge t1 r b
edge t1 r c
at 0 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"abs_internal_abort", R"(tree2pc-scenario v1
name abs_internal_abort
mode abstract
seed 1
stream r
stream a
stream b
txn t1 root r
edge t1 r a
edge t1 r b
at 0 commit t1
at 3 internal-abort a t1
expect outcome t1 aborted
expect no-violations
end
)"},
    {"abs_duplicate_commit", R"(tree2pc-scenario v1
name abs_duplicate_commit
mode abstract
seed 1
stream r
stream a
txn t1 root r
edge t1 r a
at 0 commit t1
at 40 duplicate 3
expect outcome t1 committed
expect no-violations
end
)"},
    {"abs_transfer_add", R"(tree2pc-scenario v1
name abs_transfer_add
# A transfer while RUNNING adds c under a; c participates from PREPARE on.
mode abstract
seed 1
stream r
stream a partitions pa
stream c
txn t1 root r
edge t1 r a
at 2 transfer pa a c
at 10 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
    {"abs_dag_double_parent", R"(tree2pc-scenario v1
name abs_dag_double_parent
# b is both the root's child and, through a transfer, a's pending child:
# the second prepare request takes the duplicate path.
mode abstract
seed 1
stream r
stream a partitions pab
stream b
txn t1 root r
edge t1 r a
edge t1 r b
at 2 transfer pab a b
at 10 commit t1
expect outcome t1 committed
expect no-violations
end
)"},
};

}  // namespace

const std::vector<Scenario>& bundled_scenarios() {
  static const std::vector<Scenario> all = [] {
    std::vector<Scenario> out;
    for (const auto& [name, text] : kBundledTexts) {
      Scenario sc = Scenario::parse_text(text);
      if (sc.name != name) {
        throw ParseError(std::string("bundled scenario name mismatch: ") +
                         name);
      }
      if (std::string err = sc.validate(); !err.empty()) {
        throw ValidationError(std::string("bundled scenario ") + name + ": " +
                              err);
      }
      out.push_back(std::move(sc));
    }
    return out;
  }();
  return all;
}

const Scenario* find_bundled_scenario(const std::string& name) {
  for (const auto& sc : bundled_scenarios()) {
    if (sc.name == name) return &sc;
  }
  return nullptr;
}

}  // namespace tree2pc
