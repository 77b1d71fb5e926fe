#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

namespace kadmap {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of an arbitrary byte string.
Digest sha256(std::span<const std::uint8_t> data);
/// SHA-256 of a file's contents, streamed.
Digest sha256_file(const std::string& path);
std::string to_hex(std::span<const std::uint8_t> bytes);

/// 256-bit identifier in the shared node/key space.
///
/// Node IDs are digests of public keys, keys are digests of content. Both
/// live in the same space and are compared with the XOR metric, so a single
/// type serves for both. Bit 0 is the most significant bit.
class Id {
 public:
  static constexpr int kBits = 256;
  static constexpr std::size_t kBytes = 32;

  constexpr Id() = default;

  static Id from_bytes(std::span<const std::uint8_t, kBytes> bytes);
  static Id from_digest(const Digest& d) { return from_bytes(d); }
  /// Throws std::invalid_argument unless `hex` is exactly 64 hex digits.
  static Id from_hex(std::string_view hex);
  /// Digest of `data`; this is how public keys and content map into ID space.
  static Id hash_of(std::span<const std::uint8_t> data);

  Digest bytes() const;
  std::string hex() const;

  bool bit(int index) const {
    return (words_[index >> 6] >> (63 - (index & 63))) & 1u;
  }
  Id with_bit_flipped(int index) const;
  /// Top `count` bits (count <= 32) as an unsigned integer.
  std::uint32_t prefix(int count) const;

  std::uint64_t word(int i) const { return words_[i]; }

  friend bool operator==(const Id&, const Id&) = default;
  friend std::strong_ordering operator<=>(const Id&, const Id&) = default;

 private:
  friend class Distance;
  std::array<std::uint64_t, 4> words_{};
};

using NodeId = Id;
using Key = Id;

/// XOR distance between two IDs, ordered as a 256-bit unsigned integer.
class Distance {
 public:
  constexpr Distance() = default;

  static Distance between(const Id& a, const Id& b) {
    Distance d;
    for (int i = 0; i < 4; ++i) d.words_[i] = a.words_[i] ^ b.words_[i];
    return d;
  }

  bool is_zero() const {
    return (words_[0] | words_[1] | words_[2] | words_[3]) == 0;
  }
  /// Number of leading zero bits; 256 for the zero distance.
  int leading_zeros() const;
  std::uint64_t word(int i) const { return words_[i]; }
  std::string hex() const;

  friend bool operator==(const Distance&, const Distance&) = default;
  friend std::strong_ordering operator<=>(const Distance&,
                                          const Distance&) = default;

 private:
  std::array<std::uint64_t, 4> words_{};
};

inline Distance xor_distance(const Id& a, const Id& b) {
  return Distance::between(a, b);
}

/// Number of leading bits shared by `a` and `b`, in [0, 256].
inline int common_prefix_length(const Id& a, const Id& b) {
  return xor_distance(a, b).leading_zeros();
}

struct IdHash {
  std::size_t operator()(const Id& id) const noexcept {
    // IDs are digests, so any word is already uniformly mixed.
    return static_cast<std::size_t>(id.word(0) ^ id.word(3));
  }
};

}  // namespace kadmap

template <>
struct std::hash<kadmap::Id> : kadmap::IdHash {};
