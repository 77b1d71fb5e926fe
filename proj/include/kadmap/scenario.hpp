#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kadmap/id.hpp"
#include "kadmap/sim/config.hpp"
#include "kadmap/sim/world.hpp"

namespace kadmap {

/// Parse or validation failure in a scenario file; `what()` carries
/// `source:line: message`.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct CrawlSettings {
  std::size_t count = 1;
  double interval = 0.0;  // minimum spacing between crawl starts
  std::size_t max_parallel_rpcs = 64;
  double per_node_timeout = 5.0;
  int idle_sweeps_to_stop = 1;
  std::optional<int> prefix_bits;  // unset: sized from the population
};

struct SybilSettings {
  std::size_t keys = 20;
  std::size_t sybils = 20;
};

/// Scenario file, sections [scenario] [world] [churn] [run] [crawl] [sybil]
/// holding `key = value` lines. `world.servers` may list several sizes
/// separated by commas, which makes a sweep.
struct Scenario {
  std::string name = "default";
  std::uint64_t seed = 1;
  sim::SimConfig sim;
  std::vector<std::size_t> server_sweep{1000};
  std::optional<double> duration;  // unset: joins plus `settle`
  double settle = 60.0;
  CrawlSettings crawl;
  SybilSettings sybil;

  static Scenario parse(std::string_view text, const std::string& source = "<config>");
  static Scenario load(const std::filesystem::path& path);

  /// Simulated seconds the world runs before export or crawling.
  double run_length(std::size_t n_servers) const;
  /// Simulation config for one sweep point, seeded from the scenario seed.
  sim::SimConfig sim_config(std::size_t n_servers) const;
};

/// First 8 bytes (little endian) of SHA-256("kadmap/<subsystem>/<seed>").
std::uint64_t derive_seed(std::uint64_t seed, std::string_view subsystem);

/// Populates and runs a world for one sweep point.
sim::World build_world(const Scenario& scenario, std::size_t n_servers);

struct SybilTrial {
  Key key;
  NodeId provider;
  NodeId requester;
  bool requester_connected = false;  // direct link to the provider
  bool before_dht = false;
  bool before_combined = false;
  bool after_dht = false;
  bool after_combined = false;
};

/// Publishes `keys` items from random public servers, retrieves them, then
/// replaces every provider record with Sybil ids and retrieves again.
/// Requesters are picked among the provider's direct neighbours when it
/// has any.
std::vector<SybilTrial> run_sybil_scenario(sim::World& world,
                                           const SybilSettings& settings,
                                           std::uint64_t seed);

}  // namespace kadmap
