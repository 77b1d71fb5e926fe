#include "kadmap/sim/types.hpp"

#include <stdexcept>
#include <string>

namespace kadmap::sim {

std::string_view to_string(Role r) {
  return r == Role::kServer ? "server" : "client";
}

std::string_view to_string(Reachability r) {
  return r == Reachability::kPublic ? "public" : "private";
}

Role parse_role(std::string_view s) {
  if (s == "server") return Role::kServer;
  if (s == "client") return Role::kClient;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

Reachability parse_reachability(std::string_view s) {
  if (s == "public") return Reachability::kPublic;
  if (s == "private") return Reachability::kPrivate;
  throw std::invalid_argument("unknown reachability '" + std::string(s) + "'");
}

}  // namespace kadmap::sim
