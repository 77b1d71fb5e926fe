#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "kadmap/id.hpp"
#include "kadmap/sim/types.hpp"

namespace kadmap::sim {

struct GraphNode {
  NodeId id;
  Role role = Role::kServer;
  Reachability reachability = Reachability::kPublic;
};

/// Undirected overlay connection between `nodes[a]` and `nodes[b]`, with the
/// bucket reflection observed at each end.
struct OverlayLink {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  bool a_reflects = false;
  bool b_reflects = false;
};

using DirectedEdge = std::pair<std::uint32_t, std::uint32_t>;

/// Exported state of the overlay at one instant.
///
/// `links` is the full overlay including clients; the server-only graph and
/// the directed bucket graph are derived from it. Bootnodes come first in
/// `nodes`.
struct GroundTruth {
  double time = 0.0;
  std::vector<GraphNode> nodes;
  std::vector<OverlayLink> links;
  std::size_t bootnode_count = 0;

  std::size_t server_count() const;
  /// Links with both endpoints DHT servers.
  std::vector<OverlayLink> server_links() const;
  /// (u, v) for every v held in a bucket of u; sorted.
  std::vector<DirectedEdge> bucket_edges() const;

  /// Writes nodes.txt, overlay.edges, servers.edges and buckets.edges.
  void write(const std::filesystem::path& dir) const;
  /// Reads nodes.txt and overlay.edges back.
  static GroundTruth read(const std::filesystem::path& dir);
};

}  // namespace kadmap::sim
