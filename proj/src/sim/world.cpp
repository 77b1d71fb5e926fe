#include "kadmap/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kadmap::sim {

namespace {

double approx_value(const Distance& d) {
  double v = 0.0;
  for (int w = 0; w < 4; ++w) v = v * 18446744073709551616.0 + double(d.word(w));
  return v;
}

}  // namespace

std::string Address::to_string() const {
  return "/ip4/" + std::to_string(ip >> 24) + "." +
         std::to_string((ip >> 16) & 0xff) + "." +
         std::to_string((ip >> 8) & 0xff) + "." + std::to_string(ip & 0xff) +
         "/tcp/" + std::to_string(port);
}

Address World::address_of(NodeIndex i, Reachability r) {
  if (r == Reachability::kPrivate) {
    return {0xC0A80000u | (i & 0xffffu), 4001};
  }
  return {0x2D000000u + i, 4001};
}

World::World(SimConfig config) : config_(config), rng_(config.seed) {
  config_.validate();
  schedule(config_.tick_interval, EventKind::kTick, 0);
}

World World::from_ground_truth(const GroundTruth& gt, SimConfig config) {
  config.bootstrap_count = gt.bootnode_count;
  World w(config);
  w.clock_ = gt.time;
  for (std::size_t j = 0; j < gt.nodes.size(); ++j) {
    const GraphNode& g = gt.nodes[j];
    const NodeIndex i = w.spawn_node_with_id(g.id, g.role, g.reachability);
    if (j < gt.bootnode_count) {
      w.nodes_[i].bootnode = true;
      w.bootnodes_.push_back(i);
    }
    w.set_online(i);
  }
  // Bucket order inside a restored table is not recorded; lookups rank by
  // distance, so it does not affect any answer.
  for (const OverlayLink& l : gt.links) {
    w.restore_connection(l.a, l.b, l.a_reflects, l.b_reflects, 0.0);
  }
  return w;
}

// --- population ------------------------------------------------------------

NodeIndex World::spawn_node(Role role, Reachability reachability) {
  for (;;) {
    Digest key{};
    for (std::size_t i = 0; i < key.size(); i += 8) {
      const std::uint64_t r = rng_();
      for (int b = 0; b < 8; ++b) key[i + b] = static_cast<std::uint8_t>(r >> (8 * b));
    }
    const NodeId id = Id::hash_of(key);
    if (by_id_.contains(id)) continue;
    const NodeIndex i = spawn_node_with_id(id, role, reachability);
    nodes_[i].public_key = key;
    return i;
  }
}

NodeIndex World::spawn_node_with_id(const NodeId& id, Role role,
                                    Reachability reachability) {
  if (by_id_.contains(id)) {
    throw std::invalid_argument("world: duplicate node id " + id.hex());
  }
  const auto i = static_cast<NodeIndex>(nodes_.size());
  SimNode n;
  n.id = id;
  n.role = role;
  n.reachability = reachability;
  nodes_.push_back(std::move(n));
  by_id_.emplace(id, i);
  mark_.push_back(0);
  generation_.push_back(0);
  return i;
}

void World::populate() {
  const std::size_t boots = std::min(config_.bootstrap_count, config_.n_servers);
  std::vector<NodeIndex> joiners;
  for (std::size_t s = 0; s < config_.n_servers; ++s) {
    const bool boot = s < boots;
    const bool priv = !boot && config_.nat_fraction > 0.0 &&
                      std::bernoulli_distribution(config_.nat_fraction)(rng_);
    const NodeIndex i = spawn_node(
        Role::kServer, priv ? Reachability::kPrivate : Reachability::kPublic);
    if (boot) {
      nodes_[i].bootnode = true;
      bootnodes_.push_back(i);
    } else {
      joiners.push_back(i);
    }
  }
  for (std::size_t c = 0; c < config_.n_clients; ++c) {
    const bool priv = config_.nat_fraction > 0.0 &&
                      std::bernoulli_distribution(config_.nat_fraction)(rng_);
    joiners.push_back(spawn_node(
        Role::kClient, priv ? Reachability::kPrivate : Reachability::kPublic));
  }

  for (NodeIndex b : bootnodes_) schedule(clock_, EventKind::kArrive, b);
  if (config_.churn.enabled) {
    for (NodeIndex i : joiners) {
      schedule(clock_ + config_.churn.draw_arrival(rng_), EventKind::kArrive, i);
    }
  } else {
    std::shuffle(joiners.begin(), joiners.end(), rng_);
    for (std::size_t j = 0; j < joiners.size(); ++j) {
      schedule(clock_ + double(j + 1) * config_.join_interval,
               EventKind::kArrive, joiners[j]);
    }
  }
}

std::optional<NodeIndex> World::find(const NodeId& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

NodeIndex World::index_of(const NodeId& id) const {
  auto i = find(id);
  if (!i) throw std::out_of_range("world: unknown node " + id.hex());
  return *i;
}

std::size_t World::online_count(std::optional<Role> role) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [&](const SimNode& n) {
        return n.online && (!role || n.role == *role);
      }));
}

void World::set_online(NodeIndex i) {
  SimNode& n = nodes_.at(i);
  if (n.online) return;
  n.online = true;
  n.online_since = clock_;
  if (n.is_server()) n.routing.emplace(n.id, config_.k);
  ++generation_[i];
}

void World::set_offline(NodeIndex i) {
  SimNode& n = nodes_.at(i);
  if (!n.online) return;
  while (!n.links.empty()) disconnect(n.links.back().connection);
  n.online = false;
  n.routing.reset();
  n.provider_records.clear();
  n.wantlist.clear();
}

// --- connections -----------------------------------------------------------

std::optional<ConnectionId> World::connection_between(NodeIndex a,
                                                      NodeIndex b) const {
  const auto& links = nodes_.at(a).links;
  auto it = std::lower_bound(
      links.begin(), links.end(), b,
      [](const SimNode::Link& l, NodeIndex p) { return l.peer < p; });
  if (it == links.end() || it->peer != b) return std::nullopt;
  return it->connection;
}

void World::add_link(NodeIndex self, NodeIndex peer, ConnectionId c) {
  auto& links = nodes_[self].links;
  auto it = std::lower_bound(
      links.begin(), links.end(), peer,
      [](const SimNode::Link& l, NodeIndex p) { return l.peer < p; });
  links.insert(it, {peer, c});
}

void World::drop_link(NodeIndex self, NodeIndex peer) {
  auto& links = nodes_[self].links;
  auto it = std::lower_bound(
      links.begin(), links.end(), peer,
      [](const SimNode::Link& l, NodeIndex p) { return l.peer < p; });
  if (it != links.end() && it->peer == peer) links.erase(it);
}

bool World::reflect(NodeIndex self, NodeIndex peer) {
  SimNode& n = nodes_[self];
  if (!n.routing || !nodes_[peer].is_server()) return false;
  return n.routing->insert(nodes_[peer].id) == InsertOutcome::kAccepted;
}

ConnectResult World::connect(NodeIndex from, NodeIndex to) {
  ConnectResult r;
  if (from == to) {
    r.error = ConnectError::kSelf;
    return r;
  }
  if (!nodes_.at(from).online || !nodes_.at(to).online) {
    r.error = ConnectError::kOffline;
    return r;
  }
  if (auto existing = connection_between(from, to)) {
    r.connection = existing;
    return r;
  }
  if (nodes_[to].reachability == Reachability::kPrivate) {
    r.error = ConnectError::kUnreachable;
    return r;
  }
  ConnectionId c;
  if (!free_.empty()) {
    c = free_.back();
    free_.pop_back();
  } else {
    c = static_cast<ConnectionId>(conns_.size());
    conns_.emplace_back();
    conn_live_.push_back(false);
  }
  Connection& conn = conns_[c];
  conn = Connection{from, to, clock_, false, false};
  conn_live_[c] = true;
  add_link(from, to, c);
  add_link(to, from, c);
  conn.initiator_reflects = reflect(from, to);
  conn.acceptor_reflects = reflect(to, from);
  emit(WorldEvent::Type::kConnect, from, to);
  r.connection = c;
  r.created = true;
  return r;
}

ConnectionId World::restore_connection(NodeIndex initiator, NodeIndex acceptor,
                                       bool initiator_reflects,
                                       bool acceptor_reflects,
                                       double established_at) {
  if (initiator == acceptor || !nodes_.at(initiator).online ||
      !nodes_.at(acceptor).online ||
      connection_between(initiator, acceptor)) {
    throw std::invalid_argument("world: cannot restore connection");
  }
  const auto c = static_cast<ConnectionId>(conns_.size());
  conns_.push_back(
      {initiator, acceptor, established_at, false, false});
  conn_live_.push_back(true);
  add_link(initiator, acceptor, c);
  add_link(acceptor, initiator, c);
  const auto restore_side = [&](NodeIndex self, NodeIndex peer, bool want) {
    if (!want) return false;
    if (!reflect(self, peer)) {
      throw std::invalid_argument("world: recorded bucket entry " +
                                  nodes_[peer].id.hex() + " does not fit at " +
                                  nodes_[self].id.hex());
    }
    return true;
  };
  conns_[c].initiator_reflects =
      restore_side(initiator, acceptor, initiator_reflects);
  conns_[c].acceptor_reflects =
      restore_side(acceptor, initiator, acceptor_reflects);
  return c;
}

void World::disconnect(ConnectionId c) {
  if (c >= conns_.size() || !conn_live_[c]) {
    throw std::invalid_argument("world: no such connection");
  }
  const Connection conn = conns_[c];
  if (conn.initiator_reflects) {
    nodes_[conn.initiator].routing->remove(nodes_[conn.acceptor].id);
  }
  if (conn.acceptor_reflects) {
    nodes_[conn.acceptor].routing->remove(nodes_[conn.initiator].id);
  }
  drop_link(conn.initiator, conn.acceptor);
  drop_link(conn.acceptor, conn.initiator);
  conn_live_[c] = false;
  free_.push_back(c);
  emit(WorldEvent::Type::kDisconnect, conn.initiator, conn.acceptor);
}

std::size_t World::connection_manager_tick(NodeIndex i) {
  const SimNode& n = nodes_.at(i);
  const std::size_t limit = config_.limit_for(n.bootnode);
  if (n.links.size() <= limit) return 0;
  std::vector<ConnectionId> eligible;
  for (const auto& l : n.links) {
    if (clock_ - conns_[l.connection].established_at > config_.grace_seconds) {
      eligible.push_back(l.connection);
    }
  }
  const std::size_t excess = n.links.size() - limit;
  const std::size_t evict = std::min(excess, eligible.size());
  // Successive uniform picks without replacement.
  for (std::size_t j = 0; j < evict; ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, eligible.size() - 1);
    std::swap(eligible[j], eligible[pick(rng_)]);
    const Connection& conn = conns_[eligible[j]];
    emit(WorldEvent::Type::kEvict, i, conn.other(i));
    disconnect(eligible[j]);
  }
  return evict;
}

// --- DHT -------------------------------------------------------------------

std::optional<std::vector<NodeId>> World::closest_known(
    NodeIndex receiver, const Id& target) const {
  const SimNode& n = nodes_.at(receiver);
  if (!n.online || !n.routing) return std::nullopt;
  return n.routing->closest(target, config_.k);
}

std::optional<std::vector<PeerInfo>> World::handle_find_node(
    NodeIndex receiver, std::span<const std::uint8_t> raw_target) const {
  auto ids = closest_known(receiver, Id::hash_of(raw_target));
  if (!ids) return std::nullopt;
  std::vector<PeerInfo> out;
  out.reserve(ids->size());
  for (const NodeId& id : *ids) {
    const NodeIndex j = by_id_.at(id);
    out.push_back({id, address_of(j, nodes_[j].reachability)});
  }
  return out;
}

LookupResult World::iterative_lookup(NodeIndex origin, const Id& target) {
  LookupResult result;
  if (!nodes_.at(origin).online) return result;

  enum class State : std::uint8_t { kFresh, kResponded, kFailed };
  struct Candidate {
    Distance distance;
    NodeIndex node;
    State state;
  };
  std::vector<Candidate> candidates;
  ++epoch_;
  mark_[origin] = epoch_;

  const auto add = [&](NodeIndex j) {
    if (mark_[j] == epoch_) return;
    mark_[j] = epoch_;
    Candidate c{xor_distance(nodes_[j].id, target), j, State::kFresh};
    auto at = std::lower_bound(
        candidates.begin(), candidates.end(), c,
        [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
    candidates.insert(at, c);
  };

  const SimNode& self = nodes_[origin];
  if (self.routing) {
    for (const NodeId& id : self.routing->closest(target, config_.k)) {
      add(by_id_.at(id));
    }
  }
  if (candidates.size() < config_.k) {
    std::vector<NodeIndex> servers;
    for (const auto& l : self.links) {
      if (nodes_[l.peer].is_server()) servers.push_back(l.peer);
    }
    std::sort(servers.begin(), servers.end(), [&](NodeIndex a, NodeIndex b) {
      return xor_distance(nodes_[a].id, target) <
             xor_distance(nodes_[b].id, target);
    });
    if (servers.size() > config_.k) servers.resize(config_.k);
    for (NodeIndex j : servers) add(j);
  }

  // Query the alpha closest unqueried nodes among the current k best until
  // all of the k best have answered or failed.
  std::vector<std::size_t> batch;
  for (;;) {
    batch.clear();
    std::size_t live = 0;
    for (std::size_t c = 0; c < candidates.size() && live < config_.k; ++c) {
      if (candidates[c].state == State::kFailed) continue;
      ++live;
      if (candidates[c].state == State::kFresh && batch.size() < config_.alpha) {
        batch.push_back(candidates[c].node);
      }
    }
    if (batch.empty()) break;
    ++result.rounds;
    std::vector<NodeIndex> learned;
    for (NodeIndex peer : batch) {
      auto it = std::find_if(candidates.begin(), candidates.end(),
                             [&](const Candidate& c) { return c.node == peer; });
      ++result.queried;
      auto response = connection_between(origin, peer)
                          ? closest_known(peer, target)
                          : std::nullopt;
      if (!response) {
        it->state = State::kFailed;
        continue;
      }
      it->state = State::kResponded;
      for (const NodeId& id : *response) {
        const NodeIndex j = by_id_.at(id);
        if (mark_[j] != epoch_) learned.push_back(j);
      }
    }
    // Connect to every newly discovered node; those that refuse cannot be
    // queried and are dropped.
    for (NodeIndex j : learned) {
      if (mark_[j] == epoch_) continue;
      ++result.discovered;
      if (connect(origin, j)) {
        add(j);
      } else {
        mark_[j] = epoch_;
      }
    }
  }

  for (const Candidate& c : candidates) {
    if (result.closest.size() == config_.k) break;
    if (c.state == State::kResponded) result.closest.push_back(nodes_[c.node].id);
  }
  return result;
}

Id World::random_id() {
  Digest d{};
  for (std::size_t i = 0; i < d.size(); i += 8) {
    const std::uint64_t r = rng_();
    for (int b = 0; b < 8; ++b) d[i + b] = static_cast<std::uint8_t>(r >> (8 * b));
  }
  return Id::from_bytes(d);
}

Id World::random_id_with_cpl(const Id& base, int cpl) {
  Digest out = random_id().bytes();
  for (int bit = 0; bit <= cpl; ++bit) {
    const int byte = bit / 8;
    const auto mask = static_cast<std::uint8_t>(0x80u >> (bit % 8));
    const bool want = bit < cpl ? base.bit(bit) : !base.bit(bit);
    out[byte] = want ? (out[byte] | mask) : (out[byte] & ~mask);
  }
  return Id::from_bytes(out);
}

int World::bootstrap_depth(const NodeId& self, const LookupResult& own) const {
  double log2n;
  if (own.closest.size() < config_.k) {
    log2n = std::log2(double(own.closest.size()) + 1.0);
  } else {
    // The k-th closest neighbour sits at distance ~ k * 2^256 / N.
    const double d = approx_value(xor_distance(self, own.closest.back()));
    log2n = std::log2(double(config_.k)) + 256.0 - std::log2(d);
  }
  const int depth = static_cast<int>(std::ceil(std::max(0.0, log2n))) +
                    config_.bootstrap_margin;
  return std::clamp(depth, 0, Id::kBits - 1);
}

void World::bootstrap(NodeIndex i) {
  if (!nodes_.at(i).online) return;
  for (NodeIndex b : bootnodes_) {
    if (b != i) connect(i, b);
  }
  const NodeId self = nodes_[i].id;
  const LookupResult own = iterative_lookup(i, self);
  const int depth = bootstrap_depth(self, own);
  for (int cpl = 0; cpl <= depth; ++cpl) {
    iterative_lookup(i, random_id_with_cpl(self, cpl));
  }
}

void World::refresh_buckets(NodeIndex i) {
  if (!nodes_.at(i).online) return;
  const NodeId self = nodes_[i].id;
  const LookupResult own = iterative_lookup(i, self);
  const int depth = bootstrap_depth(self, own);
  for (int cpl = 0; cpl <= depth; ++cpl) {
    const SimNode& n = nodes_[i];
    const KBucket* b = n.routing ? n.routing->bucket(cpl) : nullptr;
    if (b != nullptr && b->full()) continue;
    iterative_lookup(i, random_id_with_cpl(self, cpl));
  }
}

// --- content ---------------------------------------------------------------

std::vector<NodeId> World::publish_provider(NodeIndex origin, const Key& key) {
  SimNode& o = nodes_.at(origin);
  if (!o.online) return {};
  o.provided_keys.insert(key);
  std::vector<NodeId> holders = iterative_lookup(origin, key).closest;
  if (o.is_server()) {
    holders.push_back(o.id);
    std::sort(holders.begin(), holders.end(), [&](const Id& a, const Id& b) {
      return xor_distance(a, key) < xor_distance(b, key);
    });
    if (holders.size() > config_.k) holders.resize(config_.k);
  }
  for (const NodeId& h : holders) {
    nodes_[by_id_.at(h)].provider_records[key].insert(o.id);
  }
  return holders;
}

RetrieveOutcome World::retrieve(NodeIndex origin, const Key& key,
                                RetrieveMode mode) {
  RetrieveOutcome out;
  if (!nodes_.at(origin).online) return out;

  // Both strategies start together, so the broadcast reaches the peers
  // connected before the DHT lookup adds any.
  std::vector<NodeIndex> neighbours;
  for (const auto& l : nodes_[origin].links) neighbours.push_back(l.peer);

  const auto holds = [&](NodeIndex j) {
    return nodes_[j].online && nodes_[j].provided_keys.contains(key);
  };

  if (mode != RetrieveMode::kBroadcastOnly) {
    std::vector<NodeIndex> record_holders;
    for (const NodeId& id : iterative_lookup(origin, key).closest) {
      record_holders.push_back(by_id_.at(id));
    }
    if (nodes_[origin].is_server()) record_holders.push_back(origin);
    std::set<NodeId> listed;
    for (NodeIndex h : record_holders) {
      if (!nodes_[h].online) continue;
      auto rec = nodes_[h].provider_records.find(key);
      if (rec != nodes_[h].provider_records.end()) {
        listed.insert(rec->second.begin(), rec->second.end());
      }
    }
    for (const NodeId& p : listed) {
      auto j = find(p);
      if (!j || *j == origin || !holds(*j)) continue;
      if (connect(origin, *j)) {
        out.via_dht = true;
        out.providers.insert(p);
      }
    }
  }

  if (mode != RetrieveMode::kDhtOnly) {
    for (NodeIndex j : neighbours) {
      if (holds(j) && connection_between(origin, j)) {
        out.via_broadcast = true;
        out.providers.insert(nodes_[j].id);
      }
    }
  }
  return out;
}

void World::sybil_overwrite(const Key& key, std::span<const NodeId> sybils) {
  const std::set<NodeId> replacement(sybils.begin(), sybils.end());
  for (SimNode& n : nodes_) {
    auto rec = n.provider_records.find(key);
    if (rec != n.provider_records.end()) rec->second = replacement;
  }
}

// --- time ------------------------------------------------------------------

void World::schedule(double time, EventKind kind, NodeIndex node,
                     std::uint32_t generation) {
  queue_.push({time, seq_++, kind, node, generation});
}

void World::run_until(double t) {
  while (!queue_.empty() && queue_.top().time < t) {
    const Event e = queue_.top();
    queue_.pop();
    clock_ = std::max(clock_, e.time);
    handle(e);
  }
  clock_ = std::max(clock_, t);
}

void World::emit(WorldEvent::Type type, NodeIndex a, NodeIndex b) {
  if (sink_) sink_({type, clock_, a, b});
}

void World::arrive(NodeIndex i) {
  if (nodes_[i].online) return;
  set_online(i);
  emit(WorldEvent::Type::kArrive, i, i);
  const std::uint32_t gen = generation_[i];
  if (config_.churn.enabled && !nodes_[i].bootnode) {
    const double length = config_.churn.draw_session(rng_);
    sessions_.push_back({i, clock_, length});
    schedule(clock_ + length, EventKind::kDepart, i, gen);
  }
  if (config_.refresh_interval > 0.0) {
    schedule(clock_ + config_.refresh_interval, EventKind::kRefresh, i, gen);
  }
  bootstrap(i);
}

void World::depart(NodeIndex i) {
  emit(WorldEvent::Type::kDepart, i, i);
  set_offline(i);
  schedule(clock_ + config_.churn.draw_intersession(rng_), EventKind::kArrive, i);
}

void World::handle(const Event& e) {
  switch (e.kind) {
    case EventKind::kArrive:
      arrive(e.node);
      break;
    case EventKind::kDepart:
      if (nodes_[e.node].online && generation_[e.node] == e.generation) {
        depart(e.node);
      }
      break;
    case EventKind::kRefresh:
      if (nodes_[e.node].online && generation_[e.node] == e.generation) {
        refresh_buckets(e.node);
        schedule(clock_ + config_.refresh_interval, EventKind::kRefresh, e.node,
                 e.generation);
      }
      break;
    case EventKind::kTick:
      for (NodeIndex i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].online) connection_manager_tick(i);
      }
      schedule(clock_ + config_.tick_interval, EventKind::kTick, 0);
      break;
  }
}

// --- inspection ------------------------------------------------------------

GroundTruth World::ground_truth() const {
  GroundTruth gt;
  gt.time = clock_;
  std::vector<std::uint32_t> local(nodes_.size(), UINT32_MAX);
  const auto add_node = [&](NodeIndex i) {
    local[i] = static_cast<std::uint32_t>(gt.nodes.size());
    gt.nodes.push_back({nodes_[i].id, nodes_[i].role, nodes_[i].reachability});
  };
  for (NodeIndex b : bootnodes_) {
    if (nodes_[b].online) add_node(b);
  }
  gt.bootnode_count = gt.nodes.size();
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].online && !nodes_[i].bootnode) add_node(i);
  }
  for (ConnectionId c = 0; c < conns_.size(); ++c) {
    if (!conn_live_[c]) continue;
    const Connection& conn = conns_[c];
    gt.links.push_back({local[conn.initiator], local[conn.acceptor],
                        conn.initiator_reflects, conn.acceptor_reflects});
  }
  return gt;
}

std::optional<std::string> World::check_invariants() const {
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    const SimNode& n = nodes_[i];
    if (!n.online) {
      if (!n.links.empty()) return "offline node " + n.id.hex() + " has links";
      continue;
    }
    if (n.is_server() != n.routing.has_value()) {
      return "routing table presence mismatch at " + n.id.hex();
    }
    std::size_t reflected = 0;
    for (const auto& l : n.links) {
      const Connection& c = conns_[l.connection];
      if (!conn_live_[l.connection] || c.other(i) != l.peer) {
        return "dangling link at " + n.id.hex();
      }
      if (c.acceptor == i && n.reachability == Reachability::kPrivate) {
        return "private node " + n.id.hex() + " accepted a connection";
      }
      const bool in_bucket = n.routing && n.routing->contains(nodes_[l.peer].id);
      if (in_bucket != c.reflects_at(i)) {
        return "reflection flag mismatch at " + n.id.hex();
      }
      if (in_bucket && !nodes_[l.peer].is_server()) {
        return "client stored in bucket of " + n.id.hex();
      }
      reflected += in_bucket ? 1 : 0;
    }
    if (n.routing) {
      if (n.routing->size() != reflected) {
        return "bucket entry without connection at " + n.id.hex();
      }
      for (const auto& [index, bucket] : n.routing->buckets()) {
        if (bucket.size() > config_.k) return "overfull bucket at " + n.id.hex();
      }
    }
  }
  return std::nullopt;
}

}  // namespace kadmap::sim
