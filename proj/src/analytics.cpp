#include "kadmap/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kadmap/text.hpp"

namespace kadmap::analytics {

double expected_bucket_entries(double n, double k) {
  if (n < 0) throw std::invalid_argument("expected_bucket_entries: N < 0");
  double sum = 0.0;
  for (int i = 1; i <= 256; ++i) sum += std::min(k, std::ldexp(n, -i));
  return sum;
}

Digraph Digraph::from_snapshot(const crawler::CrawlSnapshot& s) {
  Digraph g;
  g.reachable.reserve(s.nodes.size());
  for (const auto& n : s.nodes) g.reachable.push_back(n.reachable);
  g.edges = s.edges;
  return g;
}

Digraph Digraph::from_ground_truth(const sim::GroundTruth& gt) {
  Digraph g;
  std::vector<std::uint32_t> local(gt.nodes.size(), UINT32_MAX);
  for (std::size_t i = 0; i < gt.nodes.size(); ++i) {
    if (gt.nodes[i].role != sim::Role::kServer) continue;
    local[i] = static_cast<std::uint32_t>(g.reachable.size());
    g.reachable.push_back(gt.nodes[i].reachability == sim::Reachability::kPublic);
  }
  for (const auto& [a, b] : gt.bucket_edges()) {
    g.edges.emplace_back(local[a], local[b]);
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::string to_string(DegreeKind k) {
  switch (k) {
    case DegreeKind::kIn: return "in";
    case DegreeKind::kOut: return "out";
    case DegreeKind::kTotal: return "total";
  }
  return "?";
}

std::vector<std::size_t> degrees(const Digraph& g, DegreeKind kind) {
  std::vector<std::size_t> d(g.node_count(), 0);
  for (const auto& [s, t] : g.edges) {
    if (kind != DegreeKind::kIn) ++d.at(s);
    if (kind != DegreeKind::kOut) ++d.at(t);
  }
  return d;
}

Summary summarize(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("degree statistics of an empty graph");
  std::sort(v.begin(), v.end());
  Summary s;
  s.min = v.front();
  s.max = v.back();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / double(v.size());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
  return s;
}

DegreeStats degree_stats(const Digraph& g) {
  const auto as_double = [&](DegreeKind k) {
    const auto d = degrees(g, k);
    return std::vector<double>(d.begin(), d.end());
  };
  return {summarize(as_double(DegreeKind::kIn)),
          summarize(as_double(DegreeKind::kOut)),
          summarize(as_double(DegreeKind::kTotal))};
}

Histogram degree_distribution(const Digraph& g, DegreeKind kind,
                              bool reachable_only) {
  Histogram h;
  const auto d = degrees(g, kind);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!reachable_only || g.reachable[i]) ++h[d[i]];
  }
  return h;
}

double loglog_slope(const Histogram& h) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& [deg, count] : h) {
    if (deg == 0 || count == 0) continue;
    const double x = std::log(double(deg));
    const double y = std::log(double(count));
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  const double denom = double(n) * sxx - sx * sx;
  if (n < 2 || denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (double(n) * sxy - sx * sy) / denom;
}

double bucket_coverage(const sim::GroundTruth& gt) {
  std::size_t total = 0, reflected = 0;
  for (const auto& l : gt.links) {
    if (gt.nodes[l.a].role != sim::Role::kServer ||
        gt.nodes[l.b].role != sim::Role::kServer) {
      continue;
    }
    ++total;
    if (l.a_reflects || l.b_reflects) ++reflected;
  }
  if (total == 0) throw std::invalid_argument("bucket_coverage: no server links");
  return double(reflected) / double(total);
}

double mean_bucket_entries(const sim::GroundTruth& gt) {
  const std::size_t servers = gt.server_count();
  if (servers == 0) throw std::invalid_argument("mean_bucket_entries: no servers");
  return double(gt.bucket_edges().size()) / double(servers);
}

std::vector<double> default_session_thresholds() {
  return {300, 600, 1800, 3600, 86400, 6 * 86400};
}

std::vector<SessionRow> inverse_cumulative_sessions(
    const std::vector<double>& lengths, const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("session thresholds must be ascending");
  }
  std::vector<double> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  std::vector<SessionRow> rows;
  for (double t : thresholds) {
    const auto longer = static_cast<std::size_t>(
        sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    const double pct = sorted.empty() ? 0.0 : 100.0 * double(longer) / double(sorted.size());
    rows.push_back({t, longer, pct});
  }
  return rows;
}

Persistence top_degree_persistence(
    const std::vector<crawler::CrawlSnapshot>& snapshots, double fraction) {
  if (snapshots.empty()) {
    throw std::invalid_argument("top_degree_persistence: no snapshots");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("top_degree_persistence: fraction must be in (0, 1]");
  }
  std::map<NodeId, std::size_t> picks;
  for (const auto& s : snapshots) {
    if (s.nodes.empty()) continue;
    const auto total = degrees(Digraph::from_snapshot(s), DegreeKind::kTotal);
    std::vector<std::uint32_t> order(s.nodes.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto take = std::min<std::size_t>(
        order.size(),
        static_cast<std::size_t>(std::ceil(fraction * double(s.nodes.size()))));
    // Node order is id order, so the index breaks ties by id.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), [&](std::uint32_t a, std::uint32_t b) {
                        return total[a] != total[b] ? total[a] > total[b] : a < b;
                      });
    for (std::size_t j = 0; j < take; ++j) ++picks[s.nodes[order[j]].id];
  }
  Persistence p;
  std::vector<double> shares;
  for (const auto& [id, n] : picks) {
    const double share = double(n) / double(snapshots.size());
    p.share.emplace(id, share);
    shares.push_back(share);
  }
  std::sort(shares.begin(), shares.end());
  for (std::size_t i = 0; i < shares.size(); ++i) {
    if (i + 1 < shares.size() && shares[i + 1] == shares[i]) continue;
    p.ecdf.emplace_back(shares[i], double(i + 1) / double(shares.size()));
  }
  return p;
}

std::vector<NodeCount> nodes_over_time(
    const std::vector<crawler::CrawlSnapshot>& snapshots) {
  std::vector<NodeCount> out;
  out.reserve(snapshots.size());
  for (const auto& s : snapshots) {
    out.push_back({s.started_at, s.nodes.size(), s.reachable_count()});
  }
  return out;
}

// --- output -----------------------------------------------------------------

void write_table(std::ostream& out,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0) {
        out << std::left << std::setw(int(width[c])) << r[c];
      } else {
        out << "  " << std::right << std::setw(int(width[c])) << r[c];
      }
    }
    out << '\n';
  }
  out << std::left;
}

void write_csv(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) out << ',';
      out << r[c];
    }
    out << '\n';
  }
}

namespace {
std::string fixed(double v) { return format_fixed(v, 2); }
}  // namespace

std::vector<std::vector<std::string>> degree_stats_rows(const DegreeStats& s) {
  std::vector<std::vector<std::string>> rows{{"degree", "min", "mean", "median", "max"}};
  const auto add = [&](const char* name, const Summary& x) {
    rows.push_back({name, fixed(x.min), fixed(x.mean), fixed(x.median), fixed(x.max)});
  };
  add("total", s.total);
  add("in", s.in);
  add("out", s.out);
  return rows;
}

std::string format_duration(double seconds) {
  if (seconds >= 86400 && std::fmod(seconds, 86400) == 0) {
    return format_number(seconds / 86400) + " d";
  }
  if (seconds >= 3600 && std::fmod(seconds, 3600) == 0) {
    return format_number(seconds / 3600) + " h";
  }
  if (seconds >= 60 && std::fmod(seconds, 60) == 0) {
    return format_number(seconds / 60) + " min";
  }
  return format_number(seconds) + " s";
}

std::vector<std::vector<std::string>> session_rows(
    const std::vector<SessionRow>& rows) {
  std::vector<std::vector<std::string>> out{{"session duration", "count", "percent"}};
  for (const auto& r : rows) {
    out.push_back({format_duration(r.threshold), std::to_string(r.count),
                   fixed(r.percent) + "%"});
  }
  return out;
}

}  // namespace kadmap::analytics
