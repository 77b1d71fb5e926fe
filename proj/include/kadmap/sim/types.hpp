#pragma once

#include <string_view>

namespace kadmap::sim {

enum class Role { kServer, kClient };
enum class Reachability { kPublic, kPrivate };

std::string_view to_string(Role r);
std::string_view to_string(Reachability r);
/// Throw std::invalid_argument on unknown names.
Role parse_role(std::string_view s);
Reachability parse_reachability(std::string_view s);

}  // namespace kadmap::sim
