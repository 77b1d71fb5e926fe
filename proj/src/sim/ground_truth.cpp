#include "kadmap/sim/ground_truth.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace kadmap::sim {

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::string flags(bool a, bool b) {
  return std::string{a ? '1' : '0', b ? '1' : '0'};
}

[[noreturn]] void parse_error(const std::filesystem::path& p, std::size_t line,
                              const std::string& what) {
  throw std::runtime_error(p.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::size_t GroundTruth::server_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(),
                    [](const GraphNode& n) { return n.role == Role::kServer; }));
}

std::vector<OverlayLink> GroundTruth::server_links() const {
  std::vector<OverlayLink> out;
  for (const OverlayLink& l : links) {
    if (nodes[l.a].role == Role::kServer && nodes[l.b].role == Role::kServer) {
      out.push_back(l);
    }
  }
  return out;
}

std::vector<DirectedEdge> GroundTruth::bucket_edges() const {
  std::vector<DirectedEdge> out;
  for (const OverlayLink& l : links) {
    if (l.a_reflects) out.emplace_back(l.a, l.b);
    if (l.b_reflects) out.emplace_back(l.b, l.a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// nodes.txt:      <id_hex> <server|client> <public|private>, bootnodes first
// *.edges:        <src_hex> <dst_hex> <flags>, flags = two digits telling
//                 whether src holds dst in a bucket and whether dst holds src
void GroundTruth::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "nodes.txt");
    out << "# time " << time << " bootnodes " << bootnode_count << '\n';
    for (const GraphNode& n : nodes) {
      out << n.id.hex() << ' ' << to_string(n.role) << ' '
          << to_string(n.reachability) << '\n';
    }
  }
  const auto write_links = [&](const std::filesystem::path& p,
                               const std::vector<OverlayLink>& ls) {
    auto out = open_out(p);
    for (const OverlayLink& l : ls) {
      out << nodes[l.a].id.hex() << ' ' << nodes[l.b].id.hex() << ' '
          << flags(l.a_reflects, l.b_reflects) << '\n';
    }
  };
  write_links(dir / "overlay.edges", links);
  write_links(dir / "servers.edges", server_links());
  {
    auto out = open_out(dir / "buckets.edges");
    for (const OverlayLink& l : links) {
      if (l.a_reflects) {
        out << nodes[l.a].id.hex() << ' ' << nodes[l.b].id.hex() << ' '
            << flags(true, l.b_reflects) << '\n';
      }
      if (l.b_reflects) {
        out << nodes[l.b].id.hex() << ' ' << nodes[l.a].id.hex() << ' '
            << flags(true, l.a_reflects) << '\n';
      }
    }
  }
}

GroundTruth GroundTruth::read(const std::filesystem::path& dir) {
  GroundTruth gt;
  std::unordered_map<NodeId, std::uint32_t> index;
  {
    const auto path = dir / "nodes.txt";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      std::istringstream ss(line);
      if (line[0] == '#') {
        std::string tag;
        ss >> tag >> tag >> gt.time >> tag >> gt.bootnode_count;
        continue;
      }
      std::string id, role, reach;
      if (!(ss >> id >> role >> reach)) parse_error(path, n, "expected 3 fields");
      try {
        GraphNode g{Id::from_hex(id), parse_role(role), parse_reachability(reach)};
        if (!index.emplace(g.id, gt.nodes.size()).second) {
          parse_error(path, n, "duplicate node");
        }
        gt.nodes.push_back(g);
      } catch (const std::invalid_argument& e) {
        parse_error(path, n, e.what());
      }
    }
  }
  {
    const auto path = dir / "overlay.edges";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string a, b, f;
      if (!(ss >> a >> b >> f) || f.size() != 2) {
        parse_error(path, n, "expected '<src> <dst> <flags>'");
      }
      try {
        const auto ia = index.find(Id::from_hex(a));
        const auto ib = index.find(Id::from_hex(b));
        if (ia == index.end() || ib == index.end()) {
          parse_error(path, n, "edge references unknown node");
        }
        gt.links.push_back({ia->second, ib->second, f[0] == '1', f[1] == '1'});
      } catch (const std::invalid_argument& e) {
        parse_error(path, n, e.what());
      }
    }
  }
  return gt;
}

}  // namespace kadmap::sim
