#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "kadmap/crawler.hpp"
#include "kadmap/sim/ground_truth.hpp"

namespace kadmap::analytics {

/// Sum over i = 1..256 of min(k, N * 2^-i).
double expected_bucket_entries(double n, double k = 20.0);

/// Minimal directed graph view shared by snapshots and ground truth.
struct Digraph {
  std::vector<bool> reachable;  // one flag per node
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // unique

  std::size_t node_count() const { return reachable.size(); }
  static Digraph from_snapshot(const crawler::CrawlSnapshot& s);
  /// Servers only, with E' as edges. Public servers count as reachable.
  static Digraph from_ground_truth(const sim::GroundTruth& gt);
};

enum class DegreeKind { kIn, kOut, kTotal };
std::string to_string(DegreeKind k);

struct Summary {
  double min = 0, mean = 0, median = 0, max = 0;
};

struct DegreeStats {
  Summary in, out, total;
};

/// Per-node degrees. Reciprocal edges count once in each direction, so
/// they add 2 to the total degree.
std::vector<std::size_t> degrees(const Digraph& g, DegreeKind kind);

/// Throws std::invalid_argument on an empty graph.
Summary summarize(std::vector<double> values);
DegreeStats degree_stats(const Digraph& g);
inline DegreeStats degree_stats(const crawler::CrawlSnapshot& s) {
  return degree_stats(Digraph::from_snapshot(s));
}

using Histogram = std::map<std::size_t, std::size_t>;  // degree -> nodes
Histogram degree_distribution(const Digraph& g, DegreeKind kind,
                              bool reachable_only = false);

/// Least-squares slope of log(count) against log(degree), zero degrees
/// excluded. NaN with fewer than two usable points.
double loglog_slope(const Histogram& h);

/// |E' as unordered pairs| / |E| over server-server links.
/// Throws std::invalid_argument when there are no server links.
double bucket_coverage(const sim::GroundTruth& gt);

/// Mean number of bucket entries per server.
double mean_bucket_entries(const sim::GroundTruth& gt);

struct SessionRow {
  double threshold;
  std::size_t count;
  double percent;
};

std::vector<double> default_session_thresholds();
/// Sessions strictly longer than each threshold. Thresholds must ascend.
std::vector<SessionRow> inverse_cumulative_sessions(
    const std::vector<double>& lengths,
    const std::vector<double>& thresholds = default_session_thresholds());

struct Persistence {
  std::map<NodeId, double> share;                // node -> selections / crawls
  std::vector<std::pair<double, double>> ecdf;   // (share, F(share))
};

/// Per snapshot, the ceil(fraction * |V'|) nodes of highest total degree
/// (ties broken by smaller id) are selected.
Persistence top_degree_persistence(
    const std::vector<crawler::CrawlSnapshot>& snapshots,
    double fraction = 0.0005);

struct NodeCount {
  double time;
  std::size_t all;
  std::size_t reachable;
};
std::vector<NodeCount> nodes_over_time(
    const std::vector<crawler::CrawlSnapshot>& snapshots);

// --- output -----------------------------------------------------------------

/// Aligned text table; the first row is the header.
void write_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows);
void write_csv(std::ostream& out, const std::vector<std::vector<std::string>>& rows);

std::vector<std::vector<std::string>> degree_stats_rows(const DegreeStats& s);
std::vector<std::vector<std::string>> session_rows(
    const std::vector<SessionRow>& rows);
std::string format_duration(double seconds);

}  // namespace kadmap::analytics
