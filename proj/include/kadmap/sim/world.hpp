#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kadmap/id.hpp"
#include "kadmap/routing_table.hpp"
#include "kadmap/sim/config.hpp"
#include "kadmap/sim/ground_truth.hpp"
#include "kadmap/sim/types.hpp"

namespace kadmap::sim {

using NodeIndex = std::uint32_t;
using ConnectionId = std::uint32_t;

struct Address {
  std::uint32_t ip = 0;
  std::uint16_t port = 4001;
  std::string to_string() const;
};

struct PeerInfo {
  NodeId id;
  Address address;
};

/// A transport connection. `initiator` dialed `acceptor`; each side records
/// whether it reflected the other in its buckets.
struct Connection {
  NodeIndex initiator = 0;
  NodeIndex acceptor = 0;
  double established_at = 0.0;
  bool initiator_reflects = false;
  bool acceptor_reflects = false;

  NodeIndex other(NodeIndex self) const {
    return self == initiator ? acceptor : initiator;
  }
  bool reflects_at(NodeIndex self) const {
    return self == initiator ? initiator_reflects : acceptor_reflects;
  }
};

struct SimNode {
  NodeId id;
  Digest public_key{};
  Role role = Role::kServer;
  Reachability reachability = Reachability::kPublic;
  bool online = false;
  bool bootnode = false;
  std::optional<RoutingTable> routing;  // servers only

  // Peer links sorted by peer index.
  struct Link {
    NodeIndex peer;
    ConnectionId connection;
  };
  std::vector<Link> links;

  std::set<Key> provided_keys;
  std::map<Key, std::set<NodeId>> provider_records;
  std::set<Key> wantlist;

  double online_since = 0.0;

  bool is_server() const { return role == Role::kServer; }
  std::size_t connection_count() const { return links.size(); }
};

enum class ConnectError { kSelf, kOffline, kUnreachable };

struct ConnectResult {
  std::optional<ConnectionId> connection;
  bool created = false;
  std::optional<ConnectError> error;
  explicit operator bool() const { return connection.has_value(); }
};

struct LookupResult {
  std::vector<NodeId> closest;  // ascending distance, responders only
  int rounds = 0;
  int queried = 0;
  int discovered = 0;
};

enum class RetrieveMode { kDhtOnly, kBroadcastOnly, kCombined };

struct RetrieveOutcome {
  bool via_dht = false;
  bool via_broadcast = false;
  std::set<NodeId> providers;  // verified holders of the item
  bool success() const { return via_dht || via_broadcast; }
};

/// Completed or in-progress online session, for churn validation.
struct SessionRecord {
  NodeIndex node;
  double start;
  double planned_length;
};

enum class EventKind { kArrive, kDepart, kTick, kRefresh };

/// Observable world changes; attach a sink to log them.
struct WorldEvent {
  enum class Type { kArrive, kDepart, kConnect, kDisconnect, kEvict };
  Type type;
  double time;
  NodeIndex a;
  NodeIndex b;  // equal to `a` for node events
};

/// Deterministic discrete-event model of the IPFS overlay.
///
/// One event loop owns all state; the same config (including seed) always
/// yields the same trajectory. Lookups, bootstraps and crawler requests run
/// to completion at the instant they are issued.
class World {
 public:
  explicit World(SimConfig config);

  /// Static world rebuilt from an export: every node online, every
  /// connection restored with its recorded bucket reflection.
  static World from_ground_truth(const GroundTruth& gt, SimConfig config);

  const SimConfig& config() const { return config_; }
  double now() const { return clock_; }
  Rng& rng() { return rng_; }

  // --- population -------------------------------------------------------
  NodeIndex spawn_node(Role role, Reachability reachability);
  NodeIndex spawn_node_with_id(const NodeId& id, Role role,
                               Reachability reachability);
  /// Spawns bootnodes, servers and clients per config and schedules their
  /// arrivals (staggered joins, or churn draws when churn is enabled).
  void populate();

  std::size_t size() const { return nodes_.size(); }
  const SimNode& node(NodeIndex i) const { return nodes_.at(i); }
  std::optional<NodeIndex> find(const NodeId& id) const;
  NodeIndex index_of(const NodeId& id) const;
  std::vector<NodeIndex> bootnodes() const { return bootnodes_; }
  std::size_t online_count(std::optional<Role> role = std::nullopt) const;

  /// Marks a node online without bootstrapping it.
  void set_online(NodeIndex i);
  /// Drops every connection and all volatile state of the node.
  void set_offline(NodeIndex i);

  // --- connections ------------------------------------------------------
  ConnectResult connect(NodeIndex from, NodeIndex to);
  void disconnect(ConnectionId c);
  std::optional<ConnectionId> connection_between(NodeIndex a,
                                                 NodeIndex b) const;
  const Connection& connection(ConnectionId c) const { return conns_.at(c); }
  std::size_t live_connections() const { return conns_.size() - free_.size(); }
  /// Rebuilds a recorded connection with the given reflection outcome.
  ConnectionId restore_connection(NodeIndex initiator, NodeIndex acceptor,
                                  bool initiator_reflects,
                                  bool acceptor_reflects,
                                  double established_at);
  /// Overrides a connection's age; for tests and replay.
  void set_established_at(ConnectionId c, double t) {
    conns_.at(c).established_at = t;
  }

  /// Enforces the connection limit on one node; returns evictions.
  std::size_t connection_manager_tick(NodeIndex i);

  // --- DHT --------------------------------------------------------------
  /// FindNode as IPFS handles it: the receiver hashes `raw_target` and
  /// answers with its k closest bucket entries. nullopt models a timeout
  /// (receiver offline or not a DHT server).
  std::optional<std::vector<PeerInfo>> handle_find_node(
      NodeIndex receiver, std::span<const std::uint8_t> raw_target) const;
  /// Same lookup, with the target already in ID space.
  std::optional<std::vector<NodeId>> closest_known(NodeIndex receiver,
                                                   const Id& target) const;

  LookupResult iterative_lookup(NodeIndex origin, const Id& target);
  void bootstrap(NodeIndex i);
  void refresh_buckets(NodeIndex i);

  // --- content ----------------------------------------------------------
  void provide(NodeIndex i, const Key& key) {
    nodes_.at(i).provided_keys.insert(key);
  }
  /// Returns the servers that now hold the record.
  std::vector<NodeId> publish_provider(NodeIndex origin, const Key& key);
  RetrieveOutcome retrieve(NodeIndex origin, const Key& key,
                           RetrieveMode mode = RetrieveMode::kCombined);
  void sybil_overwrite(const Key& key, std::span<const NodeId> sybils);

  // --- time -------------------------------------------------------------
  /// Processes events in [now, now + duration) and advances the clock.
  void run(double duration) { run_until(clock_ + duration); }
  void run_until(double t);
  bool has_pending_events() const { return !queue_.empty(); }

  GroundTruth ground_truth() const;

  /// Every bucket entry backed by a live, reflected connection and vice
  /// versa. Returns a description of the first violation, if any.
  std::optional<std::string> check_invariants() const;

  const std::vector<SessionRecord>& session_log() const { return sessions_; }
  void set_event_sink(std::function<void(const WorldEvent&)> sink) {
    sink_ = std::move(sink);
  }

  static Address address_of(NodeIndex i, Reachability r);

 private:
  struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    NodeIndex node;
    std::uint32_t generation;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  void schedule(double time, EventKind kind, NodeIndex node,
                std::uint32_t generation = 0);
  void handle(const Event& e);
  void arrive(NodeIndex i);
  void depart(NodeIndex i);
  void emit(WorldEvent::Type type, NodeIndex a, NodeIndex b);

  void add_link(NodeIndex self, NodeIndex peer, ConnectionId c);
  void drop_link(NodeIndex self, NodeIndex peer);
  bool reflect(NodeIndex self, NodeIndex peer);
  Id random_id();
  Id random_id_with_cpl(const Id& base, int cpl);
  int bootstrap_depth(const NodeId& self, const LookupResult& own) const;

  SimConfig config_;
  Rng rng_;
  double clock_ = 0.0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  bool tick_scheduled_ = false;

  std::vector<SimNode> nodes_;
  std::unordered_map<NodeId, NodeIndex> by_id_;
  std::vector<NodeIndex> bootnodes_;
  std::vector<std::uint32_t> generation_;  // bumped on every arrival

  std::vector<Connection> conns_;
  std::vector<bool> conn_live_;
  std::vector<ConnectionId> free_;

  // Per-lookup scratch marks, indexed by node.
  std::vector<std::uint32_t> mark_;
  std::uint32_t epoch_ = 0;

  std::vector<SessionRecord> sessions_;
  std::function<void(const WorldEvent&)> sink_;
};

}  // namespace kadmap::sim
