#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kadmap/id.hpp"

namespace kadmap {

/// For every b-bit pattern, a byte string whose SHA-256 digest starts with
/// that pattern. Used to aim a FindNode request at a chosen bucket of a
/// remote node, which hashes the target before looking it up.
class PreimageTable {
 public:
  static constexpr int kMaxPrefixBits = 24;
  static constexpr std::uint8_t kFormatVersion = 1;

  struct BuildStats {
    std::uint64_t candidates_hashed = 0;
    double seconds = 0.0;
  };

  /// Candidates are 8-byte little-endian counters 0, 1, 2, ...; each pattern
  /// keeps the lowest counter that hits it. The result does not depend on
  /// `threads`. Throws std::out_of_range unless 1 <= prefix_bits <= 24.
  static PreimageTable build(int prefix_bits, unsigned threads = 0,
                             BuildStats* stats = nullptr);

  static PreimageTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  int prefix_bits() const { return prefix_bits_; }
  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  /// Pre-image whose digest starts with `pattern` (a prefix_bits-bit value).
  std::span<const std::uint8_t> preimage(std::uint32_t pattern) const;

  /// Pre-image t with common_prefix_length(hash(t), node) == cpl exactly.
  /// Throws std::out_of_range unless 0 <= cpl < prefix_bits.
  std::span<const std::uint8_t> target_for_cpl(const NodeId& node,
                                               int cpl) const;

  /// Re-hashes every entry; returns the number of entries that fail.
  std::size_t count_invalid() const;

  friend bool operator==(const PreimageTable&, const PreimageTable&) = default;

 private:
  int prefix_bits_ = 0;
  // Concatenated pre-images, entry p spans [offsets_[p], offsets_[p+1]).
  std::vector<std::uint8_t> data_;
  std::vector<std::uint32_t> offsets_;
};

/// Smallest table depth that covers a network of `population` DHT servers:
/// ceil(log2(population)) plus `margin` bits, clamped to [1, 24].
int required_prefix_bits(std::size_t population, int margin = 4);

}  // namespace kadmap
