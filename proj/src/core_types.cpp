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

#include "tree2pc/core_types.hpp"

#include <algorithm>
#include <sstream>

namespace tree2pc {

const char* to_string(TxnState s) {
  switch (s) {
    case TxnState::Running: return "RUNNING";
    case TxnState::Prepare: return "PREPARE";
    case TxnState::Commit: return "COMMIT";
    case TxnState::Abort: return "ABORT";
    case TxnState::Tombstone: return "TOMBSTONE";
  }
  return "?";
}

const char* to_string(VoteStatus v) {
  switch (v) {
    case VoteStatus::Unknown: return "unknown";
    case VoteStatus::Ok: return "ok";
    case VoteStatus::No: return "no";
    case VoteStatus::PrepareUnknown: return "prepare-unknown";
  }
  return "?";
}

const char* to_string(UserOutcome o) {
  switch (o) {
    case UserOutcome::Committed: return "committed";
    case UserOutcome::Aborted: return "aborted";
    case UserOutcome::TransUnknown: return "trans-unknown";
  }
  return "?";
}

const char* to_string(Provenance p) {
  return p == Provenance::Fresh ? "fresh" : "recreated";
}

const char* to_string(SimMode m) {
  return m == SimMode::Abstract ? "abstract" : "logged";
}

const char* to_string(Granularity g) {
  return g == Granularity::LogStream ? "log-stream" : "partition";
}

const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::PrepareReq: return "PrepareReq";
    case MsgType::PrepareResp: return "PrepareResp";
    case MsgType::Commit: return "Commit";
    case MsgType::Abort: return "Abort";
    case MsgType::Ack: return "Ack";
    case MsgType::Release: return "Release";
    case MsgType::Clear: return "Clear";
  }
  return "?";
}

const char* to_string(LogEntryKind k) {
  switch (k) {
    case LogEntryKind::PrepareLog: return "PrepareLog";
    case LogEntryKind::CommitLog: return "CommitLog";
    case LogEntryKind::AbortLog: return "AbortLog";
    case LogEntryKind::ClearLog: return "ClearLog";
    case LogEntryKind::TransferOutLog: return "TransferOutLog";
    case LogEntryKind::TransferInLog: return "TransferInLog";
  }
  return "?";
}

const char* to_string(OwnStatus s) { return s == OwnStatus::Ok ? "OK" : "NO"; }

std::string ProtocolVariant::validate() const {
  if (clear_stage && coordinator_commit_log) {
    return "clear-stage and coordinator-commit-log are alternative designs "
           "and cannot both be on";
  }
  if (release_messages && !coordinator_commit_log) {
    return "release-messages requires coordinator-commit-log (the commit "
           "point is only durable through the coordinator's commit log)";
  }
  if (d2pc_clear && clear_stage) {
    return "d2pc-clear replaces per-node clear logs and conflicts with "
           "clear-stage";
  }
  if (d2pc_clear && !coordinator_commit_log) {
    return "d2pc-clear requires coordinator-commit-log";
  }
  if (tdt && !unknown_states) {
    return "tdt requires unknown-states";
  }
  return "";
}

namespace {

struct FlagName {
  const char* name;
  bool ProtocolVariant::*field;
};

constexpr FlagName kFlagNames[] = {
    {"clear-stage", &ProtocolVariant::clear_stage},
    {"coordinator-commit-log", &ProtocolVariant::coordinator_commit_log},
    {"release-messages", &ProtocolVariant::release_messages},
    {"d2pc-clear", &ProtocolVariant::d2pc_clear},
    {"unknown-states", &ProtocolVariant::unknown_states},
    {"tdt", &ProtocolVariant::tdt},
};

}  // namespace

std::string ProtocolVariant::format() const {
  std::string out;
  for (const auto& f : kFlagNames) {
    if (this->*(f.field)) {
      if (!out.empty()) out += ',';
      out += f.name;
    }
  }
  if (out.empty()) out = "none";
  return out;
}

ProtocolVariant ProtocolVariant::parse(const std::string& text) {
  ProtocolVariant v;
  v.coordinator_commit_log = false;  // parse from an empty baseline
  if (text == "none" || text.empty()) return v;
  for (const auto& part : split_ids(text)) {
    bool found = false;
    for (const auto& f : kFlagNames) {
      if (part == f.name) {
        v.*(f.field) = true;
        found = true;
        break;
      }
    }
    if (!found) throw ParseError("unknown variant flag: " + part);
  }
  return v;
}

std::vector<LogStreamId> TxnContext::effective_children() const {
  std::vector<LogStreamId> out = children;
  for (const auto& c : incr_children) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  // Volatile transfer additions take effect immediately for fan-out and vote
  // gating; the incr split only controls what the next log record carries.
  for (const auto& c : interm_children) {
    if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

bool TxnContext::all_votes_ok() const {
  for (const auto& [child, vote] : votes) {
    if (vote != VoteStatus::Ok) return false;
  }
  return true;
}

bool TxnContext::any_vote_blocking() const {
  for (const auto& [child, vote] : votes) {
    if (vote == VoteStatus::No || vote == VoteStatus::PrepareUnknown)
      return true;
  }
  return false;
}

bool TxnContext::any_vote_unknown_state() const {
  for (const auto& [child, vote] : votes) {
    if (vote == VoteStatus::PrepareUnknown) return true;
  }
  return false;
}

bool TxnContext::all_acked() const {
  for (const auto& [child, acked] : acks) {
    if (!acked) return false;
  }
  return true;
}

std::string encode_fields(
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out;
  for (const auto& [k, v] : fields) {
    if (!out.empty()) out += ' ';
    out += k;
    out += '=';
    out += v.empty() ? "-" : v;
  }
  return out;
}

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ',';
    out += id;
  }
  return out;
}

std::vector<std::string> split_ids(const std::string& text, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == delim) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string Message::encode() const {
  std::vector<std::pair<std::string, std::string>> fields = {
      {"msg", to_string(type)},
      {"txn", txn},
      {"src", src},
      {"dst", dst},
  };
  if (type == MsgType::PrepareResp) fields.emplace_back("vote", to_string(vote));
  return encode_fields(fields);
}

std::string LogEntry::encode() const {
  std::vector<std::pair<std::string, std::string>> fields = {
      {"log", to_string(kind)},
      {"stream", stream},
      {"seq", std::to_string(seq)},
      {"ts", std::to_string(ts)},
  };
  if (!txn.empty()) fields.emplace_back("txn", txn);
  switch (kind) {
    case LogEntryKind::PrepareLog:
    case LogEntryKind::CommitLog:
    case LogEntryKind::AbortLog:
      fields.emplace_back("participants", join_ids(participants));
      fields.emplace_back("incr", join_ids(incr_parts));
      fields.emplace_back("parent", parent ? *parent : "-");
      break;
    case LogEntryKind::ClearLog:
      break;
    case LogEntryKind::TransferOutLog:
    case LogEntryKind::TransferInLog:
      fields.emplace_back("partition", partition);
      fields.emplace_back("src", transfer_src);
      fields.emplace_back("dst", transfer_dst);
      fields.emplace_back("affected", join_ids(affected_txns));
      break;
  }
  if (reclaimed) fields.emplace_back("reclaimed", "1");
  return encode_fields(fields);
}

std::string TxnContext::encode() const {
  std::vector<std::string> vote_parts;
  for (const auto& [child, vote] : votes)
    vote_parts.push_back(child + ":" + to_string(vote));
  std::vector<std::string> ack_parts;
  for (const auto& [child, acked] : acks)
    ack_parts.push_back(child + ":" + (acked ? "1" : "0"));
  std::vector<LogStreamId> sorted_children = children;
  std::sort(sorted_children.begin(), sorted_children.end());
  std::vector<LogStreamId> sorted_incr = incr_children;
  std::sort(sorted_incr.begin(), sorted_incr.end());
  std::vector<LogStreamId> sorted_interm = interm_children;
  std::sort(sorted_interm.begin(), sorted_interm.end());
  return encode_fields({
      {"ctx", node},
      {"txn", txn},
      {"state", to_string(state)},
      {"own", to_string(own_status)},
      {"prov", to_string(provenance)},
      {"parent", parent ? *parent : "-"},
      {"children", join_ids(sorted_children)},
      {"incr", join_ids(sorted_incr)},
      {"interm", join_ids(sorted_interm)},
      {"votes", join_ids(vote_parts)},
      {"acks", join_ids(ack_parts)},
      {"plp", prepare_log_persisted ? "1" : "0"},
      {"blocked", blocked_from_logging ? "1" : "0"},
      {"last2pc", std::to_string(last_2pc_log_ts)},
  });
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace tree2pc
