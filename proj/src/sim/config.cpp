#include "kadmap/sim/config.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kadmap::sim {

double ChurnModel::session_survival(double seconds) const {
  if (seconds <= 0.0) return 1.0;
  const double z = (std::log(seconds) - session_log_mean) / session_log_sd;
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

double ChurnModel::online_fraction() const {
  const double mean_session =
      std::exp(session_log_mean + 0.5 * session_log_sd * session_log_sd);
  return mean_session / (mean_session + intersession_mean);
}

void SimConfig::validate() const {
  const auto fail = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (connection_limit < 1) fail("connection_limit must be >= 1");
  if (grace_seconds < 0.0) fail("grace_seconds must be >= 0");
  if (tick_interval <= 0.0) fail("tick_interval must be > 0");
  if (k < 1) fail("k must be >= 1");
  if (alpha < 1) fail("alpha must be >= 1");
  if (rpc_latency < 0.0) fail("rpc_latency must be >= 0");
  if (nat_fraction < 0.0 || nat_fraction > 1.0) {
    fail("nat_fraction must be in [0, 1]");
  }
  if (join_interval < 0.0) fail("join_interval must be >= 0");
  if (refresh_interval < 0.0) fail("refresh_interval must be >= 0");
  if (churn.session_log_sd <= 0.0) fail("churn.session_log_sd must be > 0");
  if (churn.intersession_mean <= 0.0) fail("churn.intersession_mean must be > 0");
  if (churn.arrival_window < 0.0) fail("churn.arrival_window must be >= 0");
}

}  // namespace kadmap::sim
