#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kadmap/id.hpp"
#include "kadmap/preimage.hpp"
#include "kadmap/sim/world.hpp"

namespace kadmap::crawler {

struct CrawlNode {
  NodeId id;
  bool reachable = false;
  std::vector<std::string> addresses;
};

/// Directed view G' = (V', E') collected by one crawl. Nodes are sorted by
/// id; edges are (src, dst) indices into `nodes`, sorted and unique.
struct CrawlSnapshot {
  std::uint64_t crawl_id = 0;
  double started_at = 0.0;
  double finished_at = 0.0;
  bool failed = false;
  std::vector<CrawlNode> nodes;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  std::optional<std::uint32_t> index_of(const NodeId& id) const;
  std::size_t reachable_count() const;
  /// Edges as id pairs, sorted.
  std::vector<std::pair<NodeId, NodeId>> edge_ids() const;

  /// Header `C <crawl_id> <start> <end> <ok|failed>`, then `N <id_hex> <0|1>
  /// [addr...]` and `E <src_hex> <dst_hex>` lines.
  void write(const std::filesystem::path& file) const;
  static CrawlSnapshot read(const std::filesystem::path& file);

  bool same_graph(const CrawlSnapshot& other) const;
};

struct CrawlRunConfig {
  std::vector<sim::NodeIndex> bootstrap_peers;  // empty: the world's bootnodes
  const PreimageTable* preimages = nullptr;
  std::size_t max_parallel_rpcs = 64;
  double per_node_timeout = 5.0;  // seconds charged for an unreachable peer
  // A sweep ends after this many consecutive responses without a new peer.
  int idle_sweeps_to_stop = 1;
  std::uint64_t seed = 1;  // crawler identities
};

struct NodeCrawl {
  std::vector<sim::PeerInfo> neighbors;  // first-seen order
  bool reachable = false;
  int requests = 0;
};

/// Sweeps one peer with FindNode targets of increasing CPL until the
/// responses stop adding peers. Throws std::out_of_range if the sweep needs
/// more prefix bits than the table has.
NodeCrawl crawl_node(const sim::World& world, const PreimageTable& table,
                     sim::NodeIndex peer, int idle_sweeps_to_stop = 1);

/// Observer called after each peer is crawled, at the world time of the
/// batch that contained it.
using CrawlObserver =
    std::function<void(sim::NodeIndex peer, const NodeCrawl& result, double time)>;

class Crawler {
 public:
  explicit Crawler(CrawlRunConfig config);

  /// BFS from the bootstrap peers. Advances the world clock by the time the
  /// batches take.
  CrawlSnapshot run(sim::World& world);
  std::vector<CrawlSnapshot> run_repeated(sim::World& world, std::size_t count,
                                          double interval = 0.0);

  void set_observer(CrawlObserver observer) { observer_ = std::move(observer); }
  /// Id used by the most recent crawl.
  const NodeId& last_identity() const { return identity_; }

 private:
  CrawlRunConfig config_;
  sim::Rng rng_;
  NodeId identity_;
  std::uint64_t crawls_ = 0;
  CrawlObserver observer_;
};

inline CrawlSnapshot run_crawl(sim::World& world, const CrawlRunConfig& config) {
  return Crawler(config).run(world);
}

/// Back-to-back crawls; with `interval` > 0 each crawl starts at least
/// `interval` seconds after the previous one started.
inline std::vector<CrawlSnapshot> repeated_crawls(sim::World& world,
                                                  const CrawlRunConfig& config,
                                                  std::size_t count,
                                                  double interval = 0.0) {
  return Crawler(config).run_repeated(world, count, interval);
}

struct Session {
  double start;
  double end;
  double length() const { return end - start; }
};

using SessionTable = std::map<NodeId, std::vector<Session>>;

/// A session opens at the start of the first snapshot where a node is
/// reachable and closes at the start of the first later snapshot where it is
/// absent or unreachable. Sessions still open at the last snapshot close one
/// mean crawl interval after its start. Needs at least two snapshots.
SessionTable build_session_table(const std::vector<CrawlSnapshot>& snapshots);

std::vector<double> session_lengths(const SessionTable& table);

}  // namespace kadmap::crawler
