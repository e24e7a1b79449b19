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

#include "tree2pc/abstract_model.hpp"

#include <cassert>
#include <sstream>

namespace tree2pc {

namespace {

constexpr NodeMask bit(int node) { return static_cast<NodeMask>(1u << node); }

// Merges intermediate participants into the active child list; the vote/ack
// bookkeeping for the merged list is reset by the caller as the phase entry
// demands.
void apply_merge(AbstractWorld& w, int node) {
  w.children[node] = w.merged_children(node);
  w.interm[node] = 0;
}

// Parent is only recorded once; later senders do not overwrite it.
void record_parent(AbstractWorld& w, int node, int src) {
  if (w.parent[node] < 0) w.parent[node] = static_cast<std::int8_t>(src);
}

void reset_votes(AbstractWorld& w, int node) { w.votes[node].fill(0); }

void reset_acks(AbstractWorld& w, int node) { w.acks[node] = 0; }

void send(AbstractWorld& w, AbstractMsgKind kind, int src, int dst) {
  w.msgs.set(msg_index(kind, src, dst));
}

void send_to_merged(AbstractWorld& w, AbstractMsgKind kind, int src,
                    NodeMask dsts) {
  for (int c = 0; c < w.n; ++c) {
    if (dsts & bit(c)) send(w, kind, src, c);
  }
}

bool has_msg(const AbstractWorld& w, AbstractMsgKind kind, int src, int dst) {
  return w.msgs.test(msg_index(kind, src, dst));
}

}  // namespace

bool AbstractWorld::all_votes_ok(int node) const {
  for (int c = 0; c < n; ++c) {
    if ((children[node] & bit(c)) && votes[node][c] != kVoteOk) return false;
  }
  return true;
}

bool AbstractWorld::any_vote_no(int node) const {
  for (int c = 0; c < n; ++c) {
    if ((children[node] & bit(c)) && votes[node][c] == kVoteNo) return true;
  }
  return false;
}

bool AbstractWorld::all_acked(int node) const {
  for (int c = 0; c < n; ++c) {
    if ((children[node] & bit(c)) && !(acks[node] & bit(c))) return false;
  }
  return true;
}

std::string AbstractWorld::to_key() const {
  std::string key;
  const int msg_bits = kAbstractMsgKinds * n * n;
  key.reserve(static_cast<std::size_t>(n) * (8 + n) + (msg_bits + 7) / 8 + 1);
  for (int i = 0; i < n; ++i) {
    key.push_back(static_cast<char>(rm[i]));
    key.push_back(static_cast<char>(parent[i]));
    key.push_back(static_cast<char>(children[i] & 0xff));
    key.push_back(static_cast<char>((children[i] >> 8) & 0xff));
    key.push_back(static_cast<char>(interm[i] & 0xff));
    key.push_back(static_cast<char>((interm[i] >> 8) & 0xff));
    key.push_back(static_cast<char>(acks[i] & 0xff));
    key.push_back(static_cast<char>((acks[i] >> 8) & 0xff));
    for (int c = 0; c < n; ++c) key.push_back(static_cast<char>(votes[i][c]));
  }
  // Message pool: only the (kind, src < n, dst < n) flags, packed 8 per byte.
  int pos = 0;
  unsigned char packed = 0;
  for (int k = 0; k < kAbstractMsgKinds; ++k) {
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if (msgs.test(msg_index(static_cast<AbstractMsgKind>(k), s, d))) {
          packed |= static_cast<unsigned char>(1u << (pos & 7));
        }
        if ((pos & 7) == 7) {
          key.push_back(static_cast<char>(packed));
          packed = 0;
        }
        ++pos;
      }
    }
  }
  if (pos & 7) key.push_back(static_cast<char>(packed));
  key.push_back(static_cast<char>(adds_used));
  return key;
}

AbstractWorld AbstractWorld::from_key(int n, const std::string& key) {
  AbstractWorld w;
  w.n = n;
  std::size_t at = 0;
  auto byte = [&]() { return static_cast<unsigned char>(key.at(at++)); };
  for (int i = 0; i < n; ++i) {
    w.rm[i] = byte();
    w.parent[i] = static_cast<std::int8_t>(byte());
    w.children[i] = static_cast<NodeMask>(byte());
    w.children[i] |= static_cast<NodeMask>(byte() << 8);
    w.interm[i] = static_cast<NodeMask>(byte());
    w.interm[i] |= static_cast<NodeMask>(byte() << 8);
    w.acks[i] = static_cast<NodeMask>(byte());
    w.acks[i] |= static_cast<NodeMask>(byte() << 8);
    for (int c = 0; c < n; ++c) w.votes[i][c] = byte();
  }
  int pos = 0;
  unsigned char packed = 0;
  for (int k = 0; k < kAbstractMsgKinds; ++k) {
    for (int s = 0; s < n; ++s) {
      for (int d = 0; d < n; ++d) {
        if ((pos & 7) == 0) packed = byte();
        if (packed & (1u << (pos & 7))) {
          w.msgs.set(msg_index(static_cast<AbstractMsgKind>(k), s, d));
        }
        ++pos;
      }
    }
  }
  w.adds_used = byte();
  return w;
}

int ModelConfig::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

AbstractWorld init_world(const ModelConfig& config) {
  assert(config.names.size() <= static_cast<std::size_t>(kMaxNodes));
  assert(config.init_children.size() == config.names.size());
  AbstractWorld w;
  w.n = static_cast<int>(config.names.size());
  for (int i = 0; i < w.n; ++i) {
    w.rm[i] = static_cast<std::uint8_t>(TxnState::Running);
    w.parent[i] = -1;
    for (int c : config.init_children[i]) w.children[i] |= bit(c);
  }
  return w;
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::RootStartToCommit: return "RootStartToCommit";
    case ActionKind::PrepareRequest: return "PrepareRequest";
    case ActionKind::DuplicatePrepareRequest: return "DuplicatePrepareRequest";
    case ActionKind::OrphanPrepareRequest: return "OrphanPrepareRequest";
    case ActionKind::PrepareResponse: return "PrepareResponse";
    case ActionKind::CommitDecided: return "CommitDecided";
    case ActionKind::AbortDecided: return "AbortDecided";
    case ActionKind::CommitRequest: return "CommitRequest";
    case ActionKind::AbortRequest: return "AbortRequest";
    case ActionKind::OrphanCommitRequest: return "OrphanCommitRequest";
    case ActionKind::OrphanAbortRequest: return "OrphanAbortRequest";
    case ActionKind::InternalAbort: return "InternalAbort";
    case ActionKind::AckResponse: return "AckResponse";
    case ActionKind::ForgetCtx: return "ForgetCtx";
    case ActionKind::AddIntermediateParticipant:
      return "AddIntermediateParticipant";
  }
  return "?";
}

std::optional<ActionKind> action_kind_from_string(const std::string& name) {
  static constexpr ActionKind kAll[] = {
      ActionKind::RootStartToCommit,
      ActionKind::PrepareRequest,
      ActionKind::DuplicatePrepareRequest,
      ActionKind::OrphanPrepareRequest,
      ActionKind::PrepareResponse,
      ActionKind::CommitDecided,
      ActionKind::AbortDecided,
      ActionKind::CommitRequest,
      ActionKind::AbortRequest,
      ActionKind::OrphanCommitRequest,
      ActionKind::OrphanAbortRequest,
      ActionKind::InternalAbort,
      ActionKind::AckResponse,
      ActionKind::ForgetCtx,
      ActionKind::AddIntermediateParticipant,
  };
  for (ActionKind k : kAll) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string AbstractAction::describe(const ModelConfig& config) const {
  std::ostringstream out;
  out << to_string(kind) << " node=" << config.names.at(node);
  if (other >= 0) {
    const char* role =
        kind == ActionKind::AddIntermediateParticipant ? "child" : "src";
    out << ' ' << role << '=' << config.names.at(other);
  }
  if (kind == ActionKind::PrepareResponse) {
    out << " vote=" << (aux == kVoteNo ? "no" : "ok");
  }
  return out.str();
}

std::vector<AbstractAction> enabled_actions(const AbstractWorld& world,
                                            const ModelConfig& config) {
  std::vector<AbstractAction> out;
  const int root = config.root;

  auto each_msg_from = [&](AbstractMsgKind kind, int dst, auto&& fn) {
    for (int src = 0; src < world.n; ++src) {
      if (has_msg(world, kind, src, dst)) fn(src);
    }
  };

  if (world.state_of(root) == TxnState::Running) {
    out.push_back({ActionKind::RootStartToCommit, root, -1, 0});
  }

  for (int node = 0; node < world.n; ++node) {
    const TxnState st = world.state_of(node);
    const bool is_root = node == root;

    if (st == TxnState::Running) {
      each_msg_from(AbstractMsgKind::PrepareReq, node, [&](int src) {
        out.push_back({ActionKind::PrepareRequest, node, src, 0});
      });
      out.push_back({ActionKind::InternalAbort, node, -1, 0});
    }

    if (st == TxnState::Prepare) {
      each_msg_from(AbstractMsgKind::PrepareReq, node, [&](int src) {
        if (src != world.parent[node]) {
          out.push_back({ActionKind::DuplicatePrepareRequest, node, src, 0});
        }
      });
      each_msg_from(AbstractMsgKind::PrepareRespOk, node, [&](int src) {
        if ((world.children[node] & bit(src)) &&
            world.votes[node][src] == kVoteUnknown) {
          out.push_back({ActionKind::PrepareResponse, node, src, kVoteOk});
        }
      });
      each_msg_from(AbstractMsgKind::PrepareRespNo, node, [&](int src) {
        if ((world.children[node] & bit(src)) &&
            world.votes[node][src] == kVoteUnknown) {
          out.push_back({ActionKind::PrepareResponse, node, src, kVoteNo});
        }
      });
      bool commit_guard = world.all_votes_ok(node);
      if (config.mutation == Mutation::CommitOnNo) {
        // Seeded defect: a NO vote no longer blocks the commit decision.
        commit_guard = commit_guard || world.any_vote_no(node);
      }
      if (commit_guard && (is_root || world.parent[node] >= 0)) {
        out.push_back({ActionKind::CommitDecided, node, -1, 0});
      }
    }

    if ((st == TxnState::Prepare || (is_root && st == TxnState::Running)) &&
        world.any_vote_no(node) && (is_root || world.parent[node] >= 0)) {
      out.push_back({ActionKind::AbortDecided, node, -1, 0});
    }

    if (st == TxnState::Abort || st == TxnState::Tombstone) {
      each_msg_from(AbstractMsgKind::PrepareReq, node, [&](int src) {
        out.push_back({ActionKind::OrphanPrepareRequest, node, src, 0});
      });
    }

    if (!is_root) {
      if (st == TxnState::Running || st == TxnState::Prepare) {
        each_msg_from(AbstractMsgKind::Commit, node, [&](int src) {
          out.push_back({ActionKind::CommitRequest, node, src, 0});
        });
        each_msg_from(AbstractMsgKind::Abort, node, [&](int src) {
          out.push_back({ActionKind::AbortRequest, node, src, 0});
        });
      }
      if (st == TxnState::Commit || st == TxnState::Tombstone) {
        each_msg_from(AbstractMsgKind::Commit, node, [&](int src) {
          out.push_back({ActionKind::OrphanCommitRequest, node, src, 0});
        });
      }
      if (st == TxnState::Abort || st == TxnState::Tombstone) {
        each_msg_from(AbstractMsgKind::Abort, node, [&](int src) {
          out.push_back({ActionKind::OrphanAbortRequest, node, src, 0});
        });
      }
    }

    if (st == TxnState::Commit || st == TxnState::Abort) {
      each_msg_from(AbstractMsgKind::Ack, node, [&](int src) {
        if ((world.children[node] & bit(src)) &&
            !(world.acks[node] & bit(src))) {
          out.push_back({ActionKind::AckResponse, node, src, 0});
        }
      });
      if (world.all_acked(node)) {
        out.push_back({ActionKind::ForgetCtx, node, -1, 0});
      }
    }

    if (st != TxnState::Tombstone &&
        world.adds_used < config.max_dynamic_adds) {
      auto add_ok = [&](int c) {
        if (c == node) return false;
        if (world.children[node] & bit(c)) return false;
        if (world.interm[node] & bit(c)) return false;
        if (!config.designated_adds.empty()) {
          for (const auto& [from, to] : config.designated_adds) {
            if (from == node && to == c) return true;
          }
          return false;
        }
        return true;
      };
      for (int c = 0; c < world.n; ++c) {
        if (add_ok(c)) {
          out.push_back({ActionKind::AddIntermediateParticipant, node, c, 0});
        }
      }
    }
  }
  return out;
}

AbstractWorld apply(const AbstractWorld& world, const ModelConfig& config,
                    const AbstractAction& action) {
  AbstractWorld w = world;
  const int node = action.node;
  const int src = action.other;
  const int root = config.root;

  switch (action.kind) {
    case ActionKind::RootStartToCommit: {
      assert(node == root && w.state_of(node) == TxnState::Running);
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Prepare);
      NodeMask mc = w.merged_children(node);
      apply_merge(w, node);
      reset_votes(w, node);
      send_to_merged(w, AbstractMsgKind::PrepareReq, node, mc);
      break;
    }
    case ActionKind::PrepareRequest: {
      assert(w.state_of(node) == TxnState::Running);
      // The first prepare request installs its sender as parent outright.
      w.parent[node] = static_cast<std::int8_t>(src);
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Prepare);
      NodeMask mc = w.merged_children(node);
      apply_merge(w, node);
      reset_votes(w, node);
      send_to_merged(w, AbstractMsgKind::PrepareReq, node, mc);
      break;
    }
    case ActionKind::DuplicatePrepareRequest: {
      assert(w.state_of(node) == TxnState::Prepare &&
             src != w.parent[node]);
      // A second coordinator path reached this participant (the tree has
      // become a DAG); it is already prepared, so vote OK to the extra
      // parent without re-preparing.
      send(w, AbstractMsgKind::PrepareRespOk, node, src);
      break;
    }
    case ActionKind::OrphanPrepareRequest: {
      assert(w.state_of(node) == TxnState::Abort ||
             w.state_of(node) == TxnState::Tombstone);
      record_parent(w, node, src);
      send(w, AbstractMsgKind::PrepareRespNo, node, src);
      break;
    }
    case ActionKind::PrepareResponse: {
      assert(w.state_of(node) == TxnState::Prepare);
      w.votes[node][src] = action.aux;
      break;
    }
    case ActionKind::CommitDecided: {
      assert(w.state_of(node) == TxnState::Prepare);
      if (node == root) {
        w.rm[node] = static_cast<std::uint8_t>(TxnState::Commit);
        NodeMask mc = w.merged_children(node);
        apply_merge(w, node);
        reset_acks(w, node);
        send_to_merged(w, AbstractMsgKind::Commit, node, mc);
      } else {
        // Interior nodes only report their aggregated vote; the state stays
        // PREPARE until the root's decision arrives.
        send(w, AbstractMsgKind::PrepareRespOk, node, w.parent[node]);
      }
      break;
    }
    case ActionKind::AbortDecided: {
      if (node == root) {
        w.rm[node] = static_cast<std::uint8_t>(TxnState::Abort);
        NodeMask mc = w.merged_children(node);
        apply_merge(w, node);
        reset_acks(w, node);
        send_to_merged(w, AbstractMsgKind::Abort, node, mc);
      } else {
        send(w, AbstractMsgKind::PrepareRespNo, node, w.parent[node]);
      }
      break;
    }
    case ActionKind::CommitRequest: {
      assert(node != root && (w.state_of(node) == TxnState::Running ||
                              w.state_of(node) == TxnState::Prepare));
      record_parent(w, node, src);
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Commit);
      NodeMask mc = w.merged_children(node);
      apply_merge(w, node);
      reset_acks(w, node);
      send_to_merged(w, AbstractMsgKind::Commit, node, mc);
      send(w, AbstractMsgKind::Ack, node, src);
      break;
    }
    case ActionKind::AbortRequest: {
      assert(node != root && (w.state_of(node) == TxnState::Running ||
                              w.state_of(node) == TxnState::Prepare));
      record_parent(w, node, src);
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Abort);
      NodeMask mc = w.merged_children(node);
      apply_merge(w, node);
      reset_acks(w, node);
      send_to_merged(w, AbstractMsgKind::Abort, node, mc);
      send(w, AbstractMsgKind::Ack, node, src);
      break;
    }
    case ActionKind::OrphanCommitRequest:
    case ActionKind::OrphanAbortRequest: {
      send(w, AbstractMsgKind::Ack, node, src);
      break;
    }
    case ActionKind::InternalAbort: {
      assert(w.state_of(node) == TxnState::Running);
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Abort);
      NodeMask mc = w.merged_children(node);
      apply_merge(w, node);
      reset_acks(w, node);
      send_to_merged(w, AbstractMsgKind::Abort, node, mc);
      if (world.parent[node] >= 0) {
        send(w, AbstractMsgKind::PrepareRespNo, node, world.parent[node]);
      }
      break;
    }
    case ActionKind::AckResponse: {
      assert(w.state_of(node) == TxnState::Commit ||
             w.state_of(node) == TxnState::Abort);
      w.acks[node] |= bit(src);
      break;
    }
    case ActionKind::ForgetCtx: {
      assert((w.state_of(node) == TxnState::Commit ||
              w.state_of(node) == TxnState::Abort) &&
             w.all_acked(node));
      w.rm[node] = static_cast<std::uint8_t>(TxnState::Tombstone);
      break;
    }
    case ActionKind::AddIntermediateParticipant: {
      assert(w.state_of(node) != TxnState::Tombstone && src != node &&
             !(w.children[node] & bit(src)) && !(w.interm[node] & bit(src)));
      w.interm[node] |= bit(src);
      w.adds_used++;
      break;
    }
  }
  return w;
}

bool consistency_holds(const AbstractWorld& world) {
  bool any_commit = false;
  bool any_abort = false;
  for (int i = 0; i < world.n; ++i) {
    if (world.state_of(i) == TxnState::Commit) any_commit = true;
    if (world.state_of(i) == TxnState::Abort) any_abort = true;
  }
  return !(any_commit && any_abort);
}

bool decision_stable(const AbstractWorld& before, const AbstractWorld& after) {
  for (int i = 0; i < before.n; ++i) {
    const TxnState b = before.state_of(i);
    const TxnState a = after.state_of(i);
    if (b == TxnState::Commit && a != TxnState::Commit &&
        a != TxnState::Tombstone) {
      return false;
    }
    if (b == TxnState::Abort && a != TxnState::Abort &&
        a != TxnState::Tombstone) {
      return false;
    }
    if (b == TxnState::Tombstone && a != TxnState::Tombstone) return false;
  }
  return true;
}

bool all_tombstone(const AbstractWorld& world) {
  for (int i = 0; i < world.n; ++i) {
    if (world.state_of(i) != TxnState::Tombstone) return false;
  }
  return true;
}

std::string encode_abstract_world(const AbstractWorld& world,
                                  const ModelConfig& config) {
  std::ostringstream out;
  auto mask_names = [&](NodeMask mask) {
    std::string joined;
    for (int c = 0; c < world.n; ++c) {
      if (!(mask & bit(c))) continue;
      if (!joined.empty()) joined += '+';
      joined += config.names[c];
    }
    return joined.empty() ? std::string("-") : joined;
  };

  out << "rm=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':' << to_string(world.state_of(i));
  }
  out << " parent=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':'
        << (world.parent[i] < 0 ? std::string("-")
                                : config.names[world.parent[i]]);
  }
  out << " children=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':' << mask_names(world.children[i]);
  }
  out << " interm=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':' << mask_names(world.interm[i]);
  }
  out << " votes=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':';
    std::string row;
    for (int c = 0; c < world.n; ++c) {
      if (!(world.children[i] & bit(c))) continue;
      if (!row.empty()) row += '+';
      row += config.names[c];
      row += '=';
      row += (world.votes[i][c] == kVoteOk
                  ? "ok"
                  : world.votes[i][c] == kVoteNo ? "no" : "unknown");
    }
    out << (row.empty() ? "-" : row);
  }
  out << " acks=";
  for (int i = 0; i < world.n; ++i) {
    if (i) out << ',';
    out << config.names[i] << ':';
    std::string row;
    for (int c = 0; c < world.n; ++c) {
      if (!(world.children[i] & bit(c))) continue;
      if (!row.empty()) row += '+';
      row += config.names[c];
      row += '=';
      row += (world.acks[i] & bit(c)) ? '1' : '0';
    }
    out << (row.empty() ? "-" : row);
  }
  out << " msgs=";
  std::string msgs;
  static constexpr const char* kKindNames[kAbstractMsgKinds] = {
      "PrepareReq", "PrepareResp.ok", "PrepareResp.no",
      "Commit",     "Abort",          "Ack"};
  for (int k = 0; k < kAbstractMsgKinds; ++k) {
    for (int s = 0; s < world.n; ++s) {
      for (int d = 0; d < world.n; ++d) {
        if (!world.msgs.test(
                msg_index(static_cast<AbstractMsgKind>(k), s, d))) {
          continue;
        }
        if (!msgs.empty()) msgs += ',';
        msgs += kKindNames[k];
        msgs += ':';
        msgs += config.names[s];
        msgs += '>';
        msgs += config.names[d];
      }
    }
  }
  out << (msgs.empty() ? "-" : msgs);
  return out.str();
}

}  // namespace tree2pc
