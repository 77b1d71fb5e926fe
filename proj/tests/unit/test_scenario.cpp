#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kadmap/scenario.hpp"

using namespace kadmap;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    Scenario::parse(text, "t.cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("t.cfg:", 0) == 0);
    return e.line();
  }
  FAIL("expected a config error");
  return 0;
}

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("defaults") {
    const Scenario s = Scenario::parse("");
    CHECK(s.server_sweep == std::vector<std::size_t>{1000});
    CHECK(s.sim.k == 20);
    CHECK(s.sim.alpha == 3);
    CHECK(s.sim.connection_limit == 900);
    CHECK(s.sim.grace_seconds == 30.0);
    CHECK(s.sim.tick_interval == 10.0);
    CHECK(s.crawl.max_parallel_rpcs == 64);
    CHECK(s.sybil.keys == 20);
    CHECK_FALSE(s.duration.has_value());
  }

  TEST_CASE("full file") {
    const Scenario s = Scenario::parse(R"(
# comment line
[scenario]
name = churny   # trailing comment
seed = 99
[world]
servers = 500, 2000
clients = 10
nat_fraction = 0.25
connection_limit = 100
[churn]
enabled = true
intersession_mean = 300
[run]
duration = 1234.5
[crawl]
count = 7
interval = 60
prefix_bits = 16
[sybil]
keys = 5
)");
    CHECK(s.name == "churny");
    CHECK(s.seed == 99);
    CHECK(s.server_sweep == std::vector<std::size_t>{500, 2000});
    CHECK(s.sim.n_clients == 10);
    CHECK(s.sim.nat_fraction == 0.25);
    CHECK(s.sim.connection_limit == 100);
    CHECK(s.sim.churn.enabled);
    CHECK(s.sim.churn.intersession_mean == 300);
    CHECK(*s.duration == 1234.5);
    CHECK(s.crawl.count == 7);
    CHECK(s.crawl.interval == 60);
    CHECK(*s.crawl.prefix_bits == 16);
    CHECK(s.sybil.keys == 5);
    CHECK(s.sim_config(2000).n_servers == 2000);
    CHECK(s.run_length(500) == 1234.5);
  }

  TEST_CASE("errors name the offending line") {
    CHECK(error_line("[world]\nservers = 10\nbogus = 1\n") == 3);
    CHECK(error_line("[nope]\n") == 1);
    CHECK(error_line("servers = 3\n") == 1);
    CHECK(error_line("[world]\n\nservers\n") == 3);
    CHECK(error_line("[world]\nnat_fraction = lots\n") == 2);
    CHECK(error_line("[churn]\nenabled = maybe\n") == 2);
    CHECK(error_line("[world\n") == 1);
    CHECK(error_line("[world]\nservers = -4\n") == 2);
    CHECK(error_line("[crawl]\ncount = 0\n") > 0);
    CHECK(error_line("[world]\nnat_fraction = 1.5\n") > 0);
  }

  TEST_CASE("run length") {
    Scenario s = Scenario::parse("[world]\nservers = 100\nbootnodes = 4\nclients = 6\n[run]\nsettle = 10\n");
    CHECK(s.run_length(100) == doctest::Approx(102 * s.sim.join_interval + 10));
    s.sim.churn.enabled = true;
    CHECK(s.run_length(100) == s.sim.churn.arrival_window + 10);
  }

  TEST_CASE("seed derivation") {
    // Reference values from an independent SHA-256 implementation.
    CHECK(derive_seed(1, "sim") == 5514400396843922169ULL);
    CHECK(derive_seed(42, "crawler") == 9569270313607221957ULL);
    CHECK(derive_seed(7, "sybil") == 2251185224621582036ULL);
    CHECK(Scenario::parse("[scenario]\nseed = 1\n").sim_config(10).seed == 5514400396843922169ULL);
  }

  TEST_CASE("load from disk") {
    const auto p = std::filesystem::temp_directory_path() / "kadmap_scenario.cfg";
    {
      std::ofstream out(p);
      out << "[world]\nservers = 42\n";
    }
    CHECK(Scenario::load(p).server_sweep == std::vector<std::size_t>{42});
    std::filesystem::remove(p);
    CHECK_THROWS_AS(Scenario::load(p), std::runtime_error);
  }

  TEST_CASE("sybil scenario on a small world") {
    Scenario s = Scenario::parse("[world]\nservers = 300\n");
    sim::World w = build_world(s, 300);
    const auto trials = run_sybil_scenario(w, {5, 20}, 3);
    REQUIRE(trials.size() == 5);
    for (const auto& t : trials) {
      CHECK(t.before_dht);
      CHECK(t.before_combined);
      CHECK_FALSE(t.after_dht);
      CHECK(t.after_combined == t.requester_connected);
    }
  }
}
