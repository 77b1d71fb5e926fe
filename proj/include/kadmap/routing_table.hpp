#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "kadmap/id.hpp"

namespace kadmap {

inline constexpr std::size_t kBucketSize = 20;

enum class InsertOutcome { kAccepted, kRejected, kAlreadyPresent };
enum class RemoveOutcome { kRemoved, kAbsent };

/// A k-bucket: peers in insertion order, never more than `capacity`.
class KBucket {
 public:
  explicit KBucket(std::size_t capacity = kBucketSize) : capacity_(capacity) {}

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return entries_.size() >= capacity_; }
  bool contains(const NodeId& peer) const;
  const std::vector<NodeId>& entries() const { return entries_; }

 private:
  friend class RoutingTable;
  std::size_t capacity_;
  std::vector<NodeId> entries_;
};

/// IPFS-style routing table.
///
/// Bucket i holds peers whose common prefix length with the local ID is i.
/// Buckets are created the first time an insertion targets them. A full
/// bucket rejects newcomers outright: there is no ping-and-evict of the
/// oldest entry and no replacement cache. Entries leave only through
/// remove(), i.e. when the underlying connection closes.
class RoutingTable {
 public:
  explicit RoutingTable(NodeId local_id, std::size_t bucket_size = kBucketSize)
      : local_id_(local_id), bucket_size_(bucket_size) {}

  const NodeId& local_id() const { return local_id_; }
  std::size_t bucket_size() const { return bucket_size_; }

  /// Throws std::invalid_argument when `peer` is the local ID.
  InsertOutcome insert(const NodeId& peer);
  RemoveOutcome remove(const NodeId& peer);
  bool contains(const NodeId& peer) const;

  /// Up to `count` entries ordered by ascending XOR distance to `target`.
  /// Throws std::invalid_argument when count is zero.
  std::vector<NodeId> closest(const Id& target,
                              std::size_t count = kBucketSize) const;

  int bucket_index(const NodeId& peer) const {
    return common_prefix_length(local_id_, peer);
  }
  /// nullptr when the bucket has not been unfolded.
  const KBucket* bucket(int index) const;
  const std::map<int, KBucket>& buckets() const { return buckets_; }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::vector<NodeId> all_entries() const;

 private:
  NodeId local_id_;
  std::size_t bucket_size_;
  std::size_t size_ = 0;
  std::map<int, KBucket> buckets_;
};

}  // namespace kadmap
