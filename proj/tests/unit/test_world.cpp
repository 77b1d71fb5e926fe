#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "kadmap/analytics.hpp"
#include "kadmap/sim/world.hpp"

using namespace kadmap;
using namespace kadmap::sim;

namespace {

SimConfig quiet_config(std::uint64_t seed = 1) {
  SimConfig c;
  c.seed = seed;
  c.n_servers = 0;
  return c;
}

NodeIndex online_server(World& w, Reachability r = Reachability::kPublic) {
  const NodeIndex i = w.spawn_node(Role::kServer, r);
  w.set_online(i);
  return i;
}

Id id_with_cpl(const Id& base, int cpl, std::mt19937_64& rng) {
  Id r = testutil::random_id(rng);
  for (int i = 0; i <= cpl; ++i) {
    const bool want = i < cpl ? base.bit(i) : !base.bit(i);
    if (r.bit(i) != want) r = r.with_bit_flipped(i);
  }
  return r;
}

std::vector<Id> brute_closest(const std::vector<Id>& ids, const Id& target,
                              std::size_t k) {
  std::vector<Id> v = ids;
  std::sort(v.begin(), v.end(), [&](const Id& a, const Id& b) {
    return xor_distance(a, target).hex() < xor_distance(b, target).hex();
  });
  if (v.size() > k) v.resize(k);
  return v;
}

std::vector<Id> online_server_ids(const World& w) {
  std::vector<Id> out;
  for (NodeIndex i = 0; i < w.size(); ++i) {
    if (w.node(i).online && w.node(i).is_server()) out.push_back(w.node(i).id);
  }
  return out;
}

// Kolmogorov distribution tail, P(K > lambda).
double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k < 100; ++k) {
    sum += (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

using LinkSet = std::set<std::tuple<Id, Id, bool, bool>>;

LinkSet link_set(const GroundTruth& gt) {
  LinkSet s;
  for (const auto& l : gt.links) {
    // Normalise endpoint order so restored worlds compare equal.
    const Id& a = gt.nodes[l.a].id;
    const Id& b = gt.nodes[l.b].id;
    if (a < b) s.emplace(a, b, l.a_reflects, l.b_reflects);
    else s.emplace(b, a, l.b_reflects, l.a_reflects);
  }
  return s;
}

}  // namespace

TEST_SUITE("world") {
  TEST_CASE("config validation") {
    SimConfig c;
    c.connection_limit = 0;
    CHECK_THROWS_AS(World{c}, std::invalid_argument);
    c = SimConfig{};
    c.grace_seconds = -1;
    CHECK_THROWS_AS(World{c}, std::invalid_argument);
    c = SimConfig{};
    c.nat_fraction = 1.5;
    CHECK_THROWS_AS(World{c}, std::invalid_argument);
  }

  TEST_CASE("spawned nodes: unique ids, offline, clients without tables") {
    World w(quiet_config());
    std::set<Id> ids;
    for (int i = 0; i < 1000; ++i) {
      const NodeIndex n = w.spawn_node(Role::kServer, Reachability::kPublic);
      ids.insert(w.node(n).id);
      CHECK_FALSE(w.node(n).online);
      CHECK(w.node(n).id == Id::hash_of(w.node(n).public_key));
    }
    CHECK(ids.size() == 1000);
    const NodeIndex c = w.spawn_node(Role::kClient, Reachability::kPublic);
    w.set_online(c);
    CHECK_FALSE(w.node(c).routing.has_value());
    CHECK_THROWS_AS(w.spawn_node_with_id(w.node(c).id, Role::kServer, Reachability::kPublic),
                    std::invalid_argument);
  }

  TEST_CASE("connect: fresh servers reflect each other") {
    World w(quiet_config());
    const NodeIndex a = online_server(w), b = online_server(w);
    const auto r = w.connect(a, b);
    REQUIRE(r);
    CHECK(r.created);
    const Connection& c = w.connection(*r.connection);
    CHECK(c.initiator_reflects);
    CHECK(c.acceptor_reflects);
    CHECK(w.node(a).routing->contains(w.node(b).id));
    CHECK(w.node(b).routing->contains(w.node(a).id));
    // Second attempt reuses the connection.
    const auto again = w.connect(b, a);
    CHECK(again.connection == r.connection);
    CHECK_FALSE(again.created);
  }

  TEST_CASE("connect: refusals") {
    World w(quiet_config());
    const NodeIndex a = online_server(w);
    const NodeIndex priv = online_server(w, Reachability::kPrivate);
    const NodeIndex off = w.spawn_node(Role::kServer, Reachability::kPublic);
    CHECK(w.connect(a, a).error == ConnectError::kSelf);
    CHECK(w.connect(a, priv).error == ConnectError::kUnreachable);
    CHECK(w.connect(a, off).error == ConnectError::kOffline);
    // A private node may still dial out.
    const auto out = w.connect(priv, a);
    REQUIRE(out);
    CHECK(w.connection(*out.connection).acceptor == a);
  }

  TEST_CASE("connect: full bucket gives one-sided reflection") {
    World w(quiet_config());
    std::mt19937_64 rng(11);
    const NodeIndex hub = online_server(w);
    const Id hub_id = w.node(hub).id;
    for (int i = 0; i < 20; ++i) {
      const NodeIndex p = w.spawn_node_with_id(id_with_cpl(hub_id, 0, rng), Role::kServer,
                                               Reachability::kPublic);
      w.set_online(p);
      REQUIRE(w.connect(p, hub));
    }
    const NodeIndex late = w.spawn_node_with_id(id_with_cpl(hub_id, 0, rng), Role::kServer,
                                                Reachability::kPublic);
    w.set_online(late);
    const auto r = w.connect(late, hub);
    REQUIRE(r);
    const Connection& c = w.connection(*r.connection);
    CHECK(c.initiator_reflects);        // late's table was empty
    CHECK_FALSE(c.acceptor_reflects);   // hub's bucket 0 was full
    CHECK(w.node(hub).routing->bucket(0)->size() == 20);
    CHECK_FALSE(w.check_invariants().has_value());
  }

  TEST_CASE("connect: clients are never inserted") {
    World w(quiet_config());
    const NodeIndex s = online_server(w);
    const NodeIndex c = w.spawn_node(Role::kClient, Reachability::kPublic);
    w.set_online(c);
    const auto r = w.connect(c, s);
    REQUIRE(r);
    CHECK_FALSE(w.connection(*r.connection).initiator_reflects);
    CHECK_FALSE(w.connection(*r.connection).acceptor_reflects);
    CHECK(w.node(s).routing->empty());
  }

  TEST_CASE("disconnect tears down both sides") {
    World w(quiet_config());
    const NodeIndex a = online_server(w), b = online_server(w);
    const auto r = w.connect(a, b);
    const std::size_t edges_before = w.ground_truth().bucket_edges().size();
    w.disconnect(*r.connection);
    CHECK_FALSE(w.connection_between(a, b));
    CHECK_FALSE(w.connection_between(b, a));
    CHECK(w.node(a).routing->empty());
    CHECK(w.node(b).routing->empty());
    CHECK(edges_before - w.ground_truth().bucket_edges().size() == 2);
    CHECK_THROWS_AS(w.disconnect(*r.connection), std::invalid_argument);
  }

  TEST_CASE("connection manager: limit and grace") {
    for (const bool old : {true, false}) {
      World w(quiet_config());
      w.run_until(100.0);
      const NodeIndex hub = online_server(w);
      for (int i = 0; i < 905; ++i) {
        const NodeIndex p = online_server(w);
        const auto r = w.connect(p, hub);
        if (old) w.set_established_at(*r.connection, 0.0);
      }
      const std::size_t evicted = w.connection_manager_tick(hub);
      CHECK(w.node(hub).connection_count() == (old ? 900u : 905u));
      CHECK(evicted == (old ? 5u : 0u));
      CHECK_FALSE(w.check_invariants().has_value());
    }
  }

  TEST_CASE("connection manager: only old connections are eligible") {
    World w(quiet_config());
    w.run_until(100.0);
    const NodeIndex hub = online_server(w);
    std::vector<NodeIndex> young;
    for (int i = 0; i < 903; ++i) {
      const NodeIndex p = online_server(w);
      const auto r = w.connect(p, hub);
      if (i < 2) {
        w.set_established_at(*r.connection, 0.0);
      } else {
        young.push_back(p);
      }
    }
    CHECK(w.connection_manager_tick(hub) == 2);
    CHECK(w.node(hub).connection_count() == 901);
    for (NodeIndex p : young) CHECK(w.connection_between(hub, p));
  }

  TEST_CASE("connection manager: eviction is uniform (chi-square)") {
    SimConfig c = quiet_config(5);
    c.connection_limit = 10;
    World w(c);
    w.run_until(100.0);
    const NodeIndex hub = online_server(w);
    std::vector<NodeIndex> peers;
    for (int i = 0; i < 11; ++i) {
      peers.push_back(online_server(w));
      w.set_established_at(*w.connect(peers.back(), hub).connection, 0.0);
    }
    std::map<NodeIndex, int> hits;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
      REQUIRE(w.connection_manager_tick(hub) == 1);
      for (NodeIndex p : peers) {
        if (!w.connection_between(hub, p)) {
          ++hits[p];
          w.set_established_at(*w.connect(p, hub).connection, 0.0);
        }
      }
    }
    const double expect = double(trials) / double(peers.size());
    double chi2 = 0.0;
    for (NodeIndex p : peers) chi2 += std::pow(hits[p] - expect, 2) / expect;
    const boost::math::chi_squared dist(double(peers.size() - 1));
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
  }

  TEST_CASE("handle_find_node") {
    World w(quiet_config());
    const NodeIndex r = online_server(w);
    std::vector<NodeIndex> peers;
    for (int i = 0; i < 3; ++i) {
      peers.push_back(online_server(w));
      w.connect(peers.back(), r);
    }
    const std::uint8_t raw[] = {1, 2, 3};
    auto resp = w.handle_find_node(r, raw);
    REQUIRE(resp);
    CHECK(resp->size() == 3);

    const NodeIndex client = w.spawn_node(Role::kClient, Reachability::kPublic);
    w.set_online(client);
    CHECK_FALSE(w.handle_find_node(client, raw));
    const NodeIndex off = w.spawn_node(Role::kServer, Reachability::kPublic);
    CHECK_FALSE(w.handle_find_node(off, raw));
  }

  TEST_CASE("handle_find_node matches brute force on a bootstrapped world") {
    World w = testutil::static_world(300, 21);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const NodeIndex r = NodeIndex(rng() % w.size());
      std::array<std::uint8_t, 8> raw{};
      for (auto& b : raw) b = std::uint8_t(rng());
      const auto resp = w.handle_find_node(r, raw);
      REQUIRE(resp);
      CHECK(resp->size() <= 20);
      std::vector<Id> got;
      for (const auto& p : *resp) got.push_back(p.id);
      CHECK(got == brute_closest(w.node(r).routing->all_entries(), Id::hash_of(raw), 20));
    }
  }

  TEST_CASE("iterative lookup finds the global k closest") {
    World w = testutil::static_world(500, 22);
    const auto servers = online_server_ids(w);
    std::mt19937_64 rng(5);
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const NodeIndex origin = NodeIndex(rng() % w.size());
      const Id target = testutil::random_id(rng);
      std::vector<Id> others;
      for (const Id& s : servers) {
        if (s != w.node(origin).id) others.push_back(s);
      }
      const auto res = w.iterative_lookup(origin, target);
      exact += res.closest == brute_closest(others, target, 20) ? 1 : 0;
    }
    CHECK(exact >= 99);
  }

  TEST_CASE("lookup with one known peer queries it once") {
    World w(quiet_config());
    const NodeIndex a = online_server(w), b = online_server(w);
    w.connect(a, b);
    const auto res = w.iterative_lookup(a, w.node(b).id);
    CHECK(res.queried == 1);
    CHECK(res.closest == std::vector<Id>{w.node(b).id});
  }

  TEST_CASE("lookup connects to every discovered node") {
    World w = testutil::static_world(400, 23);
    const NodeIndex origin = online_server(w);
    w.connect(origin, w.bootnodes().front());
    std::size_t connects = 0;
    w.set_event_sink([&](const WorldEvent& e) {
      if (e.type == WorldEvent::Type::kConnect && e.a == origin) ++connects;
    });
    const std::size_t before = w.node(origin).connection_count();
    std::mt19937_64 rng(6);
    const auto res = w.iterative_lookup(origin, testutil::random_id(rng));
    CHECK(res.discovered > 0);
    CHECK(w.node(origin).connection_count() == before + connects);
    CHECK(connects == std::size_t(res.discovered));  // no NAT in this world
    for (const Id& id : res.closest) CHECK(w.connection_between(origin, w.index_of(id)));
  }

  TEST_CASE("bootstrap fills the direct neighbourhood") {
    World w = testutil::static_world(1000, 24);
    const auto servers = online_server_ids(w);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
      const NodeIndex v = NodeIndex(rng() % w.size());
      const Id self = w.node(v).id;
      // Servers sharing at least ceil(log2 N) leading bits with v.
      for (const Id& s : servers) {
        if (s != self && common_prefix_length(s, self) >= 10) {
          CHECK(w.node(v).routing->contains(s));
        }
      }
    }
  }

  TEST_CASE("bucket entries follow the occupancy formula at N = 500") {
    World w = testutil::static_world(500, 25);
    const double mean = analytics::mean_bucket_entries(w.ground_truth());
    CHECK(std::abs(mean / analytics::expected_bucket_entries(500) - 1.0) < 0.10);
  }

  TEST_CASE("clients connect but never enter buckets") {
    World w = testutil::static_world(200, 26, 50);
    std::size_t client_links = 0;
    for (NodeIndex i = 0; i < w.size(); ++i) {
      if (!w.node(i).is_server()) client_links += w.node(i).connection_count();
    }
    CHECK(client_links > 0);
    const auto gt = w.ground_truth();
    for (const auto& [a, b] : gt.bucket_edges()) {
      CHECK(gt.nodes[a].role == Role::kServer);
      CHECK(gt.nodes[b].role == Role::kServer);
    }
    CHECK_FALSE(w.check_invariants().has_value());
  }

  TEST_CASE("NATed nodes never accept connections") {
    World w = testutil::static_world(300, 27, 20, 0.5);
    for (NodeIndex i = 0; i < w.size(); ++i) {
      if (w.node(i).reachability != Reachability::kPrivate) continue;
      for (const auto& l : w.node(i).links) {
        CHECK(w.connection(l.connection).initiator == i);
      }
    }
    CHECK_FALSE(w.check_invariants().has_value());
  }

  TEST_CASE("provider records land on the k closest servers") {
    World w = testutil::static_world(400, 28);
    const auto servers = online_server_ids(w);
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const NodeIndex origin = NodeIndex(rng() % w.size());
      const Key key = testutil::random_id(rng);
      auto holders = w.publish_provider(origin, key);
      std::sort(holders.begin(), holders.end());
      auto expect = brute_closest(servers, key, 20);
      std::sort(expect.begin(), expect.end());
      CHECK(holders == expect);
      std::size_t stored = 0;
      for (NodeIndex i = 0; i < w.size(); ++i) {
        const auto it = w.node(i).provider_records.find(key);
        if (it != w.node(i).provider_records.end()) {
          ++stored;
          CHECK(it->second == std::set<NodeId>{w.node(origin).id});
        }
      }
      CHECK(stored == 20);
      // Republishing keeps set semantics.
      w.publish_provider(origin, key);
      for (const Id& h : holders) {
        CHECK(w.node(w.index_of(h)).provider_records.at(key).size() == 1);
      }
    }
  }

  TEST_CASE("single server world stores its own record") {
    World w(quiet_config());
    const NodeIndex s = online_server(w);
    std::mt19937_64 rng(9);
    const Key key = testutil::random_id(rng);
    CHECK(w.publish_provider(s, key) == std::vector<NodeId>{w.node(s).id});
    CHECK(w.node(s).provider_records.at(key).contains(w.node(s).id));
  }

  TEST_CASE("retrieve strategies") {
    World w = testutil::static_world(300, 29);
    std::mt19937_64 rng(10);
    const NodeIndex provider = 10;
    const Key key = testutil::random_id(rng);
    w.provide(provider, key);

    SUBCASE("broadcast finds a connected provider without DHT records") {
      const NodeIndex origin = w.node(provider).links.front().peer;
      const auto r = w.retrieve(origin, key);
      CHECK(r.success());
      CHECK(r.via_broadcast);
      CHECK_FALSE(r.via_dht);
    }
    SUBCASE("DHT finds a registered provider that is not a neighbour") {
      w.publish_provider(provider, key);
      NodeIndex origin = 0;
      while (origin == provider || w.connection_between(origin, provider)) ++origin;
      const auto r = w.retrieve(origin, key, RetrieveMode::kDhtOnly);
      CHECK(r.via_dht);
      CHECK(r.providers == std::set<NodeId>{w.node(provider).id});
    }
    SUBCASE("unknown key fails") {
      const Key other = testutil::random_id(rng);
      CHECK_FALSE(w.retrieve(5, other).success());
    }
  }

  TEST_CASE("Sybil overwrite defeats the DHT but not the broadcast") {
    World w = testutil::static_world(300, 30);
    std::mt19937_64 rng(11);
    std::vector<NodeId> sybils;
    for (int i = 0; i < 20; ++i) {
      sybils.push_back(w.node(w.spawn_node(Role::kServer, Reachability::kPublic)).id);
    }
    const NodeIndex provider = 42;
    const Key key = testutil::random_id(rng);
    w.publish_provider(provider, key);
    const NodeIndex neighbour = w.node(provider).links.front().peer;
    CHECK(w.retrieve(neighbour, key, RetrieveMode::kDhtOnly).success());
    w.sybil_overwrite(key, sybils);
    CHECK_FALSE(w.retrieve(neighbour, key, RetrieveMode::kDhtOnly).success());
    CHECK(w.retrieve(neighbour, key).via_broadcast);

    // Overwriting an unprovided key changes nothing.
    const Key unknown = testutil::random_id(rng);
    w.sybil_overwrite(unknown, sybils);
    CHECK_FALSE(w.retrieve(neighbour, unknown).success());
  }

  TEST_CASE("run(0) leaves the world unchanged") {
    World w = testutil::static_world(100, 31);
    const auto before = link_set(w.ground_truth());
    w.run(0.0);
    CHECK(link_set(w.ground_truth()) == before);
  }

  TEST_CASE("same seed, same trajectory") {
    SimConfig c;
    c.seed = 99;
    c.n_servers = 200;
    c.n_clients = 20;
    c.nat_fraction = 0.3;
    c.churn.enabled = true;
    World a(c), b(c);
    a.populate();
    b.populate();
    a.run(900);
    b.run(900);
    const auto ga = a.ground_truth(), gb = b.ground_truth();
    CHECK(link_set(ga) == link_set(gb));
    CHECK(ga.nodes.size() == gb.nodes.size());
  }

  TEST_CASE("session lengths follow the configured log-normal (KS)") {
    SimConfig c;
    c.seed = 12;
    c.n_servers = 400;
    c.churn.enabled = true;
    World w(c);
    w.populate();
    w.run(3600);
    std::vector<double> s;
    for (const auto& r : w.session_log()) s.push_back(r.planned_length);
    REQUIRE(s.size() > 500);
    std::sort(s.begin(), s.end());
    double d = 0.0;
    const double n = double(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double f = 1.0 - c.churn.session_survival(s[i]);
      d = std::max({d, f - double(i) / n, double(i + 1) / n - f});
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    CHECK(kolmogorov_q(lambda) > 0.01);
  }

  TEST_CASE("churn model calibration") {
    ChurnModel m;
    CHECK(m.session_survival(300) == doctest::Approx(0.57).epsilon(0.02));
    CHECK(m.session_survival(600) == doctest::Approx(0.26).epsilon(0.03));
  }

  TEST_CASE("invariants hold every simulated minute under churn") {
    SimConfig c;
    c.seed = 13;
    c.n_servers = 300;
    c.n_clients = 40;
    c.nat_fraction = 0.4;
    c.connection_limit = 60;
    c.refresh_interval = 300;
    c.churn.enabled = true;
    World w(c);
    std::map<std::pair<NodeIndex, NodeIndex>, double> opened;
    bool young_evicted = false;
    w.set_event_sink([&](const WorldEvent& e) {
      const auto key = std::minmax(e.a, e.b);
      if (e.type == WorldEvent::Type::kConnect) opened[key] = e.time;
      if (e.type == WorldEvent::Type::kEvict &&
          e.time - opened.at(key) <= c.grace_seconds) {
        young_evicted = true;
      }
    });
    w.populate();
    for (int minute = 1; minute <= 30; ++minute) {
      // Stop just after the tick at the minute boundary.
      w.run_until(60.0 * minute + 1e-3);
      const auto bad = w.check_invariants();
      CHECK_MESSAGE(!bad.has_value(), (bad ? *bad : std::string()));
      for (NodeIndex i = 0; i < w.size(); ++i) {
        const SimNode& n = w.node(i);
        if (!n.online || n.bootnode || n.connection_count() <= c.connection_limit) continue;
        // Still over the limit only if nothing was old enough to close.
        for (const auto& l : n.links) {
          CHECK(w.now() - w.connection(l.connection).established_at <= c.grace_seconds);
        }
      }
    }
    CHECK_FALSE(young_evicted);
  }

  TEST_CASE("ground truth graphs") {
    World w = testutil::static_world(200, 32, 30);
    const auto gt = w.ground_truth();
    std::set<std::pair<std::uint32_t, std::uint32_t>> server_pairs;
    for (const auto& l : gt.server_links()) server_pairs.emplace(std::minmax(l.a, l.b));
    for (const auto& [a, b] : gt.bucket_edges()) {
      CHECK(server_pairs.contains(std::minmax(a, b)));  // E' within E
    }
    CHECK(gt.server_links().size() < gt.links.size());  // clients are in G~ only
    CHECK(gt.bootnode_count == 4);
    for (std::size_t i = 0; i < gt.bootnode_count; ++i) {
      CHECK(gt.nodes[i].id == w.node(w.bootnodes()[i]).id);
    }
  }

  TEST_CASE("ground truth files round trip and rebuild the world") {
    World w = testutil::static_world(150, 33, 10, 0.3);
    const auto gt = w.ground_truth();
    const auto dir = std::filesystem::temp_directory_path() / "kadmap_test_gt";
    std::filesystem::remove_all(dir);
    gt.write(dir);
    const auto back = GroundTruth::read(dir);
    CHECK(back.nodes.size() == gt.nodes.size());
    CHECK(back.bootnode_count == gt.bootnode_count);
    CHECK(back.time == gt.time);
    CHECK(link_set(back) == link_set(gt));
    World rebuilt = World::from_ground_truth(back, SimConfig{});
    CHECK(link_set(rebuilt.ground_truth()) == link_set(gt));
    CHECK_FALSE(rebuilt.check_invariants().has_value());
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("ground truth reader reports line numbers") {
    const auto dir = std::filesystem::temp_directory_path() / "kadmap_test_badgt";
    std::filesystem::create_directories(dir);
    {
      std::ofstream n(dir / "nodes.txt");
      n << "# time 0 bootnodes 0\n" << std::string(64, 'a') << " server public\nzz server\n";
      std::ofstream e(dir / "overlay.edges");
    }
    try {
      GroundTruth::read(dir);
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("nodes.txt:3:") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
  }
}
