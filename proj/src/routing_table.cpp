#include "kadmap/routing_table.hpp"

#include <algorithm>
#include <stdexcept>

namespace kadmap {

bool KBucket::contains(const NodeId& peer) const {
  return std::find(entries_.begin(), entries_.end(), peer) != entries_.end();
}

InsertOutcome RoutingTable::insert(const NodeId& peer) {
  if (peer == local_id_) {
    throw std::invalid_argument("routing table: cannot insert local id");
  }
  const int index = bucket_index(peer);
  auto [it, created] = buckets_.try_emplace(index, bucket_size_);
  KBucket& b = it->second;
  if (!created && b.contains(peer)) return InsertOutcome::kAlreadyPresent;
  if (b.full()) return InsertOutcome::kRejected;
  b.entries_.push_back(peer);
  ++size_;
  return InsertOutcome::kAccepted;
}

RemoveOutcome RoutingTable::remove(const NodeId& peer) {
  if (peer == local_id_) return RemoveOutcome::kAbsent;
  auto it = buckets_.find(bucket_index(peer));
  if (it == buckets_.end()) return RemoveOutcome::kAbsent;
  auto& entries = it->second.entries_;
  auto pos = std::find(entries.begin(), entries.end(), peer);
  if (pos == entries.end()) return RemoveOutcome::kAbsent;
  entries.erase(pos);
  --size_;
  return RemoveOutcome::kRemoved;
}

bool RoutingTable::contains(const NodeId& peer) const {
  if (peer == local_id_) return false;
  const KBucket* b = bucket(bucket_index(peer));
  return b != nullptr && b->contains(peer);
}

const KBucket* RoutingTable::bucket(int index) const {
  auto it = buckets_.find(index);
  return it == buckets_.end() ? nullptr : &it->second;
}

std::vector<NodeId> RoutingTable::closest(const Id& target,
                                          std::size_t count) const {
  if (count == 0) {
    throw std::invalid_argument("routing table: count must be >= 1");
  }
  struct Ranked {
    Distance distance;
    const NodeId* id;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(size_);
  for (const auto& [index, b] : buckets_) {
    for (const NodeId& peer : b.entries_) {
      ranked.push_back({xor_distance(peer, target), &peer});
    }
  }
  const std::size_t n = std::min(count, ranked.size());
  const auto by_distance = [](const Ranked& a, const Ranked& b) {
    return a.distance < b.distance;
  };
  std::partial_sort(ranked.begin(), ranked.begin() + n, ranked.end(),
                    by_distance);
  std::vector<NodeId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(*ranked[i].id);
  return out;
}

std::vector<NodeId> RoutingTable::all_entries() const {
  std::vector<NodeId> out;
  out.reserve(size_);
  for (const auto& [index, b] : buckets_) {
    out.insert(out.end(), b.entries_.begin(), b.entries_.end());
  }
  return out;
}

}  // namespace kadmap
