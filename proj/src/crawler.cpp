#include "kadmap/crawler.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "kadmap/text.hpp"

namespace kadmap::crawler {

using sim::NodeIndex;
using sim::World;

// --- snapshot --------------------------------------------------------------

std::optional<std::uint32_t> CrawlSnapshot::index_of(const NodeId& id) const {
  const auto it = std::lower_bound(
      nodes.begin(), nodes.end(), id,
      [](const CrawlNode& n, const NodeId& v) { return n.id < v; });
  if (it == nodes.end() || it->id != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - nodes.begin());
}

std::size_t CrawlSnapshot::reachable_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const CrawlNode& n) { return n.reachable; }));
}

std::vector<std::pair<NodeId, NodeId>> CrawlSnapshot::edge_ids() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(edges.size());
  for (const auto& [s, d] : edges) out.emplace_back(nodes[s].id, nodes[d].id);
  return out;  // already sorted: node order is id order
}

bool CrawlSnapshot::same_graph(const CrawlSnapshot& other) const {
  if (nodes.size() != other.nodes.size() || edges != other.edges) return false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id != other.nodes[i].id ||
        nodes[i].reachable != other.nodes[i].reachable) {
      return false;
    }
  }
  return true;
}

void CrawlSnapshot::write(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "C " << crawl_id << ' ' << format_number(started_at) << ' '
      << format_number(finished_at) << ' ' << (failed ? "failed" : "ok") << '\n';
  for (const CrawlNode& n : nodes) {
    out << "N " << n.id.hex() << ' ' << (n.reachable ? 1 : 0);
    for (const std::string& a : n.addresses) out << ' ' << a;
    out << '\n';
  }
  for (const auto& [s, d] : edges) {
    out << "E " << nodes[s].id.hex() << ' ' << nodes[d].id.hex() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

CrawlSnapshot CrawlSnapshot::read(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  CrawlSnapshot snap;
  std::vector<std::pair<NodeId, NodeId>> raw_edges;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  const auto fail = [&](const std::string& what) {
    throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": " +
                             what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto f = split_ws(line);
    if (f.empty() || f[0][0] == '#') continue;
    try {
      if (f[0] == "C") {
        if (f.size() < 4) fail("header needs 'C <id> <start> <end>'");
        snap.crawl_id = std::stoull(f[1]);
        snap.started_at = parse_number(f[2]);
        snap.finished_at = parse_number(f[3]);
        snap.failed = f.size() > 4 && f[4] == "failed";
        header = true;
      } else if (f[0] == "N") {
        if (f.size() < 3 || (f[2] != "0" && f[2] != "1")) {
          fail("expected 'N <id_hex> <0|1>'");
        }
        CrawlNode n{Id::from_hex(f[1]), f[2] == "1", {}};
        n.addresses.assign(f.begin() + 3, f.end());
        snap.nodes.push_back(std::move(n));
      } else if (f[0] == "E") {
        if (f.size() != 3) fail("expected 'E <src_hex> <dst_hex>'");
        raw_edges.emplace_back(Id::from_hex(f[1]), Id::from_hex(f[2]));
      } else {
        fail("unknown record '" + f[0] + "'");
      }
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!header) throw std::runtime_error(file.string() + ": missing 'C' header");
  std::sort(snap.nodes.begin(), snap.nodes.end(),
            [](const CrawlNode& a, const CrawlNode& b) { return a.id < b.id; });
  for (const auto& [s, d] : raw_edges) {
    const auto si = snap.index_of(s);
    const auto di = snap.index_of(d);
    if (!si || !di) {
      throw std::runtime_error(file.string() + ": edge endpoint not listed as node");
    }
    snap.edges.emplace_back(*si, *di);
  }
  std::sort(snap.edges.begin(), snap.edges.end());
  snap.edges.erase(std::unique(snap.edges.begin(), snap.edges.end()),
                   snap.edges.end());
  return snap;
}

// --- crawling --------------------------------------------------------------

NodeCrawl crawl_node(const World& world, const PreimageTable& table,
                     NodeIndex peer, int idle_sweeps_to_stop) {
  NodeCrawl out;
  const sim::SimNode& n = world.node(peer);
  // The crawler dials in, so NATed peers never answer.
  if (n.reachability == sim::Reachability::kPrivate) return out;

  std::unordered_set<NodeId> seen;
  int idle = 0;
  for (int cpl = 0;; ++cpl) {
    const auto target = table.target_for_cpl(n.id, cpl);
    const auto response = world.handle_find_node(peer, target);
    ++out.requests;
    if (!response) {
      out.neighbors.clear();
      return out;
    }
    out.reachable = true;
    bool learned = false;
    for (const sim::PeerInfo& p : *response) {
      if (seen.insert(p.id).second) {
        out.neighbors.push_back(p);
        learned = true;
      }
    }
    idle = learned ? 0 : idle + 1;
    if (idle >= idle_sweeps_to_stop) break;
  }
  return out;
}

Crawler::Crawler(CrawlRunConfig config)
    : config_(std::move(config)), rng_(config_.seed) {
  if (config_.preimages == nullptr) {
    throw std::invalid_argument("crawler: no pre-image table");
  }
  if (config_.max_parallel_rpcs == 0) {
    throw std::invalid_argument("crawler: max_parallel_rpcs must be >= 1");
  }
  if (config_.idle_sweeps_to_stop < 1) {
    throw std::invalid_argument("crawler: idle_sweeps_to_stop must be >= 1");
  }
  if (config_.per_node_timeout < 0.0) {
    throw std::invalid_argument("crawler: per_node_timeout must be >= 0");
  }
}

CrawlSnapshot Crawler::run(World& world) {
  // Fresh identity per crawl. Remote peers never store it: FindNode
  // handling does not touch the receiver's buckets.
  Digest key{};
  for (std::size_t i = 0; i < key.size(); i += 8) {
    const std::uint64_t r = rng_();
    for (int b = 0; b < 8; ++b) key[i + b] = static_cast<std::uint8_t>(r >> (8 * b));
  }
  identity_ = Id::hash_of(key);

  CrawlSnapshot snap;
  snap.crawl_id = ++crawls_;
  snap.started_at = world.now();

  std::vector<NodeIndex> frontier = config_.bootstrap_peers;
  if (frontier.empty()) frontier = world.bootnodes();
  if (frontier.empty()) {
    throw std::invalid_argument("crawler: at least one bootstrap peer required");
  }

  struct Seen {
    bool reachable = false;
    std::vector<std::string> addresses;
  };
  std::unordered_map<NodeIndex, Seen> seen;
  for (NodeIndex b : frontier) {
    seen[b].addresses = {World::address_of(b, world.node(b).reachability).to_string()};
  }
  const std::size_t boot_count = frontier.size();
  std::vector<std::pair<NodeIndex, NodeIndex>> edges;

  std::size_t head = 0;
  while (head < frontier.size()) {
    const std::size_t end =
        std::min(frontier.size(), head + config_.max_parallel_rpcs);
    double batch_time = 0.0;
    for (; head < end; ++head) {
      const NodeIndex peer = frontier[head];
      NodeCrawl r = crawl_node(world, *config_.preimages, peer,
                               config_.idle_sweeps_to_stop);
      seen[peer].reachable = r.reachable;
      batch_time = std::max(batch_time, r.reachable
                                            ? r.requests * world.config().rtt()
                                            : config_.per_node_timeout);
      for (const sim::PeerInfo& p : r.neighbors) {
        const NodeIndex j = world.index_of(p.id);
        edges.emplace_back(peer, j);
        auto [it, fresh] = seen.try_emplace(j);
        if (fresh) {
          it->second.addresses = {p.address.to_string()};
          frontier.push_back(j);
        }
      }
      if (observer_) observer_(peer, r, world.now());
    }
    world.run(batch_time);
  }
  snap.finished_at = world.now();

  const bool any_boot = std::any_of(
      frontier.begin(), frontier.begin() + static_cast<std::ptrdiff_t>(boot_count),
      [&](NodeIndex b) { return seen[b].reachable; });
  if (!any_boot) {
    snap.failed = true;
    return snap;
  }

  std::vector<NodeIndex> order;
  order.reserve(seen.size());
  for (const auto& [i, s] : seen) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) {
    return world.node(a).id < world.node(b).id;
  });
  std::unordered_map<NodeIndex, std::uint32_t> pos;
  for (NodeIndex i : order) {
    pos.emplace(i, static_cast<std::uint32_t>(snap.nodes.size()));
    Seen& s = seen[i];
    snap.nodes.push_back({world.node(i).id, s.reachable, std::move(s.addresses)});
  }
  snap.edges.reserve(edges.size());
  for (const auto& [a, b] : edges) snap.edges.emplace_back(pos[a], pos[b]);
  std::sort(snap.edges.begin(), snap.edges.end());
  snap.edges.erase(std::unique(snap.edges.begin(), snap.edges.end()),
                   snap.edges.end());
  return snap;
}

std::vector<CrawlSnapshot> Crawler::run_repeated(World& world, std::size_t count,
                                                 double interval) {
  if (count == 0) throw std::invalid_argument("crawler: count must be >= 1");
  std::vector<CrawlSnapshot> out;
  out.reserve(count);
  for (std::size_t c = 0; c < count; ++c) {
    const double start = world.now();
    out.push_back(run(world));
    if (interval > 0.0 && c + 1 < count && world.now() < start + interval) {
      world.run_until(start + interval);
    }
  }
  return out;
}

// --- sessions --------------------------------------------------------------

SessionTable build_session_table(const std::vector<CrawlSnapshot>& snapshots) {
  std::vector<const CrawlSnapshot*> usable;
  for (const CrawlSnapshot& s : snapshots) {
    if (!s.failed) usable.push_back(&s);
  }
  if (usable.size() < 2) {
    throw std::invalid_argument("sessions: need at least two successful snapshots");
  }
  std::stable_sort(usable.begin(), usable.end(),
                   [](const CrawlSnapshot* a, const CrawlSnapshot* b) {
                     return a->started_at < b->started_at;
                   });
  const double mean_interval =
      (usable.back()->started_at - usable.front()->started_at) /
      double(usable.size() - 1);

  SessionTable table;
  std::map<NodeId, double> open;  // node -> session start
  for (const CrawlSnapshot* s : usable) {
    for (auto it = open.begin(); it != open.end();) {
      const auto idx = s->index_of(it->first);
      if (idx && s->nodes[*idx].reachable) {
        ++it;
        continue;
      }
      table[it->first].push_back({it->second, s->started_at});
      it = open.erase(it);
    }
    for (const CrawlNode& n : s->nodes) {
      if (n.reachable) open.try_emplace(n.id, s->started_at);
    }
  }
  const double closing = usable.back()->started_at + mean_interval;
  for (const auto& [id, start] : open) table[id].push_back({start, closing});
  return table;
}

std::vector<double> session_lengths(const SessionTable& table) {
  std::vector<double> out;
  for (const auto& [id, sessions] : table) {
    for (const Session& s : sessions) out.push_back(s.length());
  }
  return out;
}

}  // namespace kadmap::crawler
