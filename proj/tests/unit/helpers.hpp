#pragma once

#include <random>

#include "kadmap/id.hpp"
#include "kadmap/sim/world.hpp"

namespace testutil {

inline kadmap::Id random_id(std::mt19937_64& rng) {
  kadmap::Digest d{};
  for (auto& b : d) b = static_cast<std::uint8_t>(rng());
  return kadmap::Id::from_bytes(d);
}

/// Static world of `servers` servers (bootnodes included), joined and
/// settled.
inline kadmap::sim::World static_world(std::size_t servers, std::uint64_t seed,
                                       std::size_t clients = 0,
                                       double nat_fraction = 0.0) {
  kadmap::sim::SimConfig c;
  c.seed = seed;
  c.n_servers = servers;
  c.n_clients = clients;
  c.nat_fraction = nat_fraction;
  kadmap::sim::World w(c);
  w.populate();
  w.run(double(servers + clients) * c.join_interval + 60.0);
  return w;
}

}  // namespace testutil
