#include "kadmap/preimage.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <thread>

namespace kadmap {

namespace {

constexpr char kMagic[4] = {'K', 'P', 'I', 'T'};
constexpr std::uint64_t kUnset = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kChunk = 1u << 16;

void check_bits(int bits) {
  if (bits < 1 || bits > PreimageTable::kMaxPrefixBits) {
    throw std::out_of_range("preimage: prefix bits must be in [1, 24], got " +
                            std::to_string(bits));
  }
}

std::array<std::uint8_t, 8> counter_bytes(std::uint64_t c) {
  std::array<std::uint8_t, 8> out{};
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(c >> (8 * i));
  return out;
}

// EVP context reused across many small digests.
class Hasher {
 public:
  Hasher() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_) throw std::runtime_error("preimage: EVP_MD_CTX_new failed");
  }

  std::uint32_t prefix_of(std::uint64_t counter, int bits) {
    const auto in = counter_bytes(counter);
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx_.get(), in.data(), in.size()) != 1 ||
        EVP_DigestFinal_ex(ctx_.get(), out, &len) != 1) {
      throw std::runtime_error("preimage: digest failed");
    }
    const std::uint32_t top = (std::uint32_t{out[0]} << 24) |
                              (std::uint32_t{out[1]} << 16) |
                              (std::uint32_t{out[2]} << 8) | out[3];
    return top >> (32 - bits);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

struct Hit {
  std::uint32_t pattern;
  std::uint64_t counter;
};

void scan_chunk(std::uint64_t begin, std::uint64_t end, int bits,
                const std::vector<std::uint64_t>& best, std::vector<Hit>& hits) {
  Hasher hasher;
  for (std::uint64_t c = begin; c < end; ++c) {
    const std::uint32_t p = hasher.prefix_of(c, bits);
    if (best[p] == kUnset) hits.push_back({p, c});
  }
}

}  // namespace

PreimageTable PreimageTable::build(int prefix_bits, unsigned threads,
                                   BuildStats* stats) {
  check_bits(prefix_bits);
  const auto started = std::chrono::steady_clock::now();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  const std::uint32_t patterns = std::uint32_t{1} << prefix_bits;
  std::vector<std::uint64_t> best(patterns, kUnset);
  std::uint32_t filled = 0;
  std::uint64_t next = 0;

  // Each round scans `threads` consecutive chunks and merges them in counter
  // order, so every pattern ends up with its lowest hitting counter no matter
  // how the work was split.
  std::vector<std::vector<Hit>> hits(threads);
  while (filled < patterns) {
    for (auto& h : hits) h.clear();
    if (threads == 1) {
      scan_chunk(next, next + kChunk, prefix_bits, best, hits[0]);
    } else {
      std::vector<std::jthread> workers;
      workers.reserve(threads);
      for (unsigned t = 0; t < threads; ++t) {
        const std::uint64_t begin = next + t * kChunk;
        workers.emplace_back([&, t, begin] {
          scan_chunk(begin, begin + kChunk, prefix_bits, best, hits[t]);
        });
      }
    }
    for (const auto& chunk_hits : hits) {
      for (const Hit& h : chunk_hits) {
        if (best[h.pattern] == kUnset) {
          best[h.pattern] = h.counter;
          ++filled;
        }
      }
    }
    next += threads * kChunk;
  }

  PreimageTable table;
  table.prefix_bits_ = prefix_bits;
  table.data_.reserve(std::size_t{patterns} * 8);
  table.offsets_.reserve(std::size_t{patterns} + 1);
  table.offsets_.push_back(0);
  for (std::uint32_t p = 0; p < patterns; ++p) {
    const auto bytes = counter_bytes(best[p]);
    table.data_.insert(table.data_.end(), bytes.begin(), bytes.end());
    table.offsets_.push_back(static_cast<std::uint32_t>(table.data_.size()));
  }
  if (stats != nullptr) {
    stats->candidates_hashed = next;
    stats->seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - started)
                         .count();
  }
  return table;
}

std::span<const std::uint8_t> PreimageTable::preimage(
    std::uint32_t pattern) const {
  if (pattern >= size()) {
    throw std::out_of_range("preimage: pattern out of range");
  }
  return {data_.data() + offsets_[pattern],
          offsets_[pattern + 1] - offsets_[pattern]};
}

std::span<const std::uint8_t> PreimageTable::target_for_cpl(const NodeId& node,
                                                            int cpl) const {
  if (cpl < 0 || cpl >= prefix_bits_) {
    throw std::out_of_range("preimage: cpl " + std::to_string(cpl) +
                            " needs a table of at least " +
                            std::to_string(cpl + 1) + " bits, have " +
                            std::to_string(prefix_bits_));
  }
  // Keep the first cpl bits of the node, flip bit cpl; the rest of the
  // pattern is arbitrary, so reuse the node's own bits.
  const std::uint32_t pattern = node.with_bit_flipped(cpl).prefix(prefix_bits_);
  return preimage(pattern);
}

std::size_t PreimageTable::count_invalid() const {
  std::size_t bad = 0;
  for (std::uint32_t p = 0; p < size(); ++p) {
    const Id h = Id::hash_of(preimage(p));
    if (h.prefix(prefix_bits_) != p) ++bad;
  }
  return bad;
}

void PreimageTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("preimage: cannot open " + path.string());
  out.write(kMagic, sizeof kMagic);
  const char header[2] = {static_cast<char>(kFormatVersion),
                          static_cast<char>(prefix_bits_)};
  out.write(header, sizeof header);
  for (std::uint32_t p = 0; p < size(); ++p) {
    const auto img = preimage(p);
    if (img.size() > 255) {
      throw std::runtime_error("preimage: entry longer than 255 bytes");
    }
    out.put(static_cast<char>(img.size()));
    out.write(reinterpret_cast<const char*>(img.data()),
              static_cast<std::streamsize>(img.size()));
  }
  if (!out) throw std::runtime_error("preimage: write failed: " + path.string());
}

PreimageTable PreimageTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("preimage: cannot open " + path.string());
  char magic[4] = {};
  char header[2] = {};
  in.read(magic, sizeof magic);
  in.read(header, sizeof header);
  if (!in || !std::equal(std::begin(magic), std::end(magic), kMagic)) {
    throw std::runtime_error("preimage: not a table file: " + path.string());
  }
  if (static_cast<std::uint8_t>(header[0]) != kFormatVersion) {
    throw std::runtime_error("preimage: unsupported version " +
                             std::to_string(static_cast<int>(header[0])));
  }
  PreimageTable table;
  table.prefix_bits_ = static_cast<std::uint8_t>(header[1]);
  check_bits(table.prefix_bits_);
  const std::uint32_t patterns = std::uint32_t{1} << table.prefix_bits_;
  table.offsets_.reserve(std::size_t{patterns} + 1);
  table.offsets_.push_back(0);
  for (std::uint32_t p = 0; p < patterns; ++p) {
    const int len = in.get();
    if (len == std::char_traits<char>::eof()) {
      throw std::runtime_error("preimage: truncated table file");
    }
    const std::size_t at = table.data_.size();
    table.data_.resize(at + static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(table.data_.data() + at), len);
    if (!in) throw std::runtime_error("preimage: truncated table file");
    table.offsets_.push_back(static_cast<std::uint32_t>(table.data_.size()));
  }
  return table;
}

int required_prefix_bits(std::size_t population, int margin) {
  const int log2n =
      population <= 1 ? 0 : std::bit_width(population - 1);  // ceil(log2 n)
  return std::clamp(log2n + margin, 1, PreimageTable::kMaxPrefixBits);
}

}  // namespace kadmap
