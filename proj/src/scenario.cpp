#include "kadmap/scenario.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "kadmap/text.hpp"

namespace kadmap {

namespace {

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> to_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(to_uint(std::string(trim(item))));
  }
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace

Scenario Scenario::parse(std::string_view text, const std::string& source) {
  Scenario s;
  auto& c = s.sim;
  using Setter = std::function<void(const std::string&)>;
  const auto size = [](std::size_t& f) { return [&f](const std::string& v) { f = to_uint(v); }; };
  const auto real = [](double& f) { return [&f](const std::string& v) { f = parse_number(v); }; };
  const std::map<std::string, Setter> setters{
      {"scenario.name", [&](const std::string& v) { s.name = v; }},
      {"scenario.seed", [&](const std::string& v) { s.seed = to_uint(v); }},
      {"world.servers", [&](const std::string& v) { s.server_sweep = to_size_list(v); }},
      {"world.clients", size(c.n_clients)},
      {"world.nat_fraction", real(c.nat_fraction)},
      {"world.bootnodes", size(c.bootstrap_count)},
      {"world.k", size(c.k)},
      {"world.alpha", size(c.alpha)},
      {"world.rpc_latency", real(c.rpc_latency)},
      {"world.bootstrap_margin",
       [&](const std::string& v) { c.bootstrap_margin = static_cast<int>(to_uint(v)); }},
      {"world.connection_limit", size(c.connection_limit)},
      {"world.bootnode_connection_limit", size(c.bootnode_connection_limit)},
      {"world.grace_seconds", real(c.grace_seconds)},
      {"world.tick_interval", real(c.tick_interval)},
      {"world.join_interval", real(c.join_interval)},
      {"world.refresh_interval", real(c.refresh_interval)},
      {"churn.enabled", [&](const std::string& v) { c.churn.enabled = to_bool(v); }},
      {"churn.session_log_mean", real(c.churn.session_log_mean)},
      {"churn.session_log_sd", real(c.churn.session_log_sd)},
      {"churn.intersession_mean", real(c.churn.intersession_mean)},
      {"churn.arrival_window", real(c.churn.arrival_window)},
      {"run.duration",
       [&](const std::string& v) {
         if (v == "auto") s.duration.reset(); else s.duration = parse_number(v);
       }},
      {"run.settle", real(s.settle)},
      {"crawl.count", size(s.crawl.count)},
      {"crawl.interval", real(s.crawl.interval)},
      {"crawl.max_parallel_rpcs", size(s.crawl.max_parallel_rpcs)},
      {"crawl.per_node_timeout", real(s.crawl.per_node_timeout)},
      {"crawl.idle_sweeps_to_stop",
       [&](const std::string& v) { s.crawl.idle_sweeps_to_stop = static_cast<int>(to_uint(v)); }},
      {"crawl.prefix_bits",
       [&](const std::string& v) {
         if (v == "auto") s.crawl.prefix_bits.reset();
         else s.crawl.prefix_bits = static_cast<int>(to_uint(v));
       }},
      {"sybil.keys", size(s.sybil.keys)},
      {"sybil.sybils", size(s.sybil.sybils)},
  };

  std::string section;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(source, lineno, "malformed section header");
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const char* known[] = {"scenario", "world", "churn", "run", "crawl", "sybil"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
        throw ConfigError(source, lineno, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source, lineno, "expected 'key = value'");
    }
    if (section.empty()) {
      throw ConfigError(source, lineno, "key outside of any section");
    }
    const std::string key = section + "." + std::string(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(source, lineno, "unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, lineno, key + ": " + e.what());
    }
  }

  try {
    for (std::size_t n : s.server_sweep) s.sim_config(n).validate();
    if (s.duration && *s.duration < 0) throw std::invalid_argument("run.duration < 0");
    if (s.settle < 0) throw std::invalid_argument("run.settle < 0");
    if (s.crawl.count == 0) throw std::invalid_argument("crawl.count must be >= 1");
    if (s.crawl.max_parallel_rpcs == 0) {
      throw std::invalid_argument("crawl.max_parallel_rpcs must be >= 1");
    }
    if (s.crawl.idle_sweeps_to_stop < 1) {
      throw std::invalid_argument("crawl.idle_sweeps_to_stop must be >= 1");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, lineno, e.what());
  }
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

double Scenario::run_length(std::size_t n_servers) const {
  if (duration) return *duration;
  if (sim.churn.enabled) return sim.churn.arrival_window + settle;
  const std::size_t joiners =
      n_servers - std::min(n_servers, sim.bootstrap_count) + sim.n_clients;
  return double(joiners) * sim.join_interval + settle;
}

sim::SimConfig Scenario::sim_config(std::size_t n_servers) const {
  sim::SimConfig c = sim;
  c.n_servers = n_servers;
  c.seed = derive_seed(seed, "sim");
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view subsystem) {
  const std::string label =
      "kadmap/" + std::string(subsystem) + "/" + std::to_string(seed);
  const Digest d = sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(label.data()), label.size()));
  std::uint64_t out = 0;
  for (int i = 7; i >= 0; --i) out = (out << 8) | d[static_cast<std::size_t>(i)];
  return out;
}

sim::World build_world(const Scenario& scenario, std::size_t n_servers) {
  sim::World world(scenario.sim_config(n_servers));
  world.populate();
  world.run(scenario.run_length(n_servers));
  return world;
}

std::vector<SybilTrial> run_sybil_scenario(sim::World& world,
                                           const SybilSettings& settings,
                                           std::uint64_t seed) {
  using sim::NodeIndex;
  sim::Rng rng(seed);
  std::vector<NodeIndex> providers;
  for (NodeIndex i = 0; i < world.size(); ++i) {
    const auto& n = world.node(i);
    if (n.online && n.is_server() && !n.bootnode &&
        n.reachability == sim::Reachability::kPublic) {
      providers.push_back(i);
    }
  }
  if (providers.empty()) {
    throw std::invalid_argument("sybil scenario: no public servers online");
  }
  if (settings.sybils == 0) {
    throw std::invalid_argument("sybil scenario: need at least one Sybil");
  }

  std::vector<NodeId> sybils;
  for (std::size_t s = 0; s < settings.sybils; ++s) {
    sybils.push_back(world.node(world.spawn_node(sim::Role::kServer,
                                                 sim::Reachability::kPublic)).id);
  }

  std::vector<SybilTrial> trials;
  for (std::size_t k = 0; k < settings.keys; ++k) {
    std::array<std::uint8_t, 16> content{};
    for (auto& b : content) b = static_cast<std::uint8_t>(rng());
    const Key key = Id::hash_of(content);

    const NodeIndex provider =
        providers[std::uniform_int_distribution<std::size_t>(0, providers.size() - 1)(rng)];
    std::vector<NodeIndex> neighbours;
    for (const auto& l : world.node(provider).links) {
      if (world.node(l.peer).online) neighbours.push_back(l.peer);
    }
    NodeIndex requester = provider;
    if (!neighbours.empty()) {
      requester = neighbours[std::uniform_int_distribution<std::size_t>(
          0, neighbours.size() - 1)(rng)];
    } else {
      while (requester == provider) {
        requester = providers[std::uniform_int_distribution<std::size_t>(
            0, providers.size() - 1)(rng)];
        if (providers.size() == 1) break;
      }
    }

    SybilTrial t;
    t.key = key;
    t.provider = world.node(provider).id;
    t.requester = world.node(requester).id;
    world.provide(provider, key);
    world.publish_provider(provider, key);
    t.before_dht = world.retrieve(requester, key, sim::RetrieveMode::kDhtOnly).success();
    t.before_combined = world.retrieve(requester, key).success();
    world.sybil_overwrite(key, sybils);
    t.after_dht = world.retrieve(requester, key, sim::RetrieveMode::kDhtOnly).success();
    t.requester_connected = world.connection_between(requester, provider).has_value();
    t.after_combined = world.retrieve(requester, key).success();
    trials.push_back(t);
  }
  return trials;
}

}  // namespace kadmap
