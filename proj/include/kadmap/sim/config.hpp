#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace kadmap::sim {

using Rng = std::mt19937_64;

/// Alternating on/off renewal process per node.
///
/// Session lengths are log-normal; the defaults put ~57% of sessions above
/// five minutes and ~26% above ten, the shape of the measured IPFS session
/// table. Off periods are exponential. Initial arrivals are uniform over
/// `arrival_window`.
struct ChurnModel {
  bool enabled = false;
  double session_log_mean = 5.853;  // median ~348 s
  double session_log_sd = 0.846;
  double intersession_mean = 600.0;
  double arrival_window = 600.0;

  double draw_session(Rng& rng) const {
    return std::lognormal_distribution<double>(session_log_mean,
                                               session_log_sd)(rng);
  }
  double draw_intersession(Rng& rng) const {
    return std::exponential_distribution<double>(1.0 / intersession_mean)(rng);
  }
  double draw_arrival(Rng& rng) const {
    return std::uniform_real_distribution<double>(0.0, arrival_window)(rng);
  }
  /// Probability that a session outlasts `seconds` under the model.
  double session_survival(double seconds) const;
  /// Expected fraction of the pool online once the process is stationary.
  double online_fraction() const;
};

struct SimConfig {
  std::uint64_t seed = 1;

  std::size_t n_servers = 1000;  // includes the bootnodes
  std::size_t n_clients = 0;
  double nat_fraction = 0.0;     // share of non-boot nodes that are private
  std::size_t bootstrap_count = 4;

  std::size_t k = 20;
  std::size_t alpha = 3;
  double rpc_latency = 0.05;     // one way, seconds
  int bootstrap_margin = 4;      // extra bucket depths probed at bootstrap

  std::size_t connection_limit = 900;
  // Bootnodes are operated with their own limit; 0 means no trimming.
  std::size_t bootnode_connection_limit = 0;
  double grace_seconds = 30.0;
  double tick_interval = 10.0;

  double join_interval = 0.1;    // spacing of arrivals when churn is off
  double refresh_interval = 0.0; // periodic bucket refresh; 0 disables

  ChurnModel churn;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  double rtt() const { return 2.0 * rpc_latency; }
  std::size_t limit_for(bool bootnode) const {
    if (!bootnode) return connection_limit;
    return bootnode_connection_limit == 0 ? SIZE_MAX : bootnode_connection_limit;
  }
};

}  // namespace kadmap::sim
