#include "kadmap/id.hpp"

#include <openssl/evp.h>

#include <bit>
#include <fstream>
#include <memory>
#include <vector>
#include <stdexcept>

namespace kadmap {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string words_to_hex(const std::array<std::uint64_t, 4>& words) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(64, '0');
  for (int w = 0; w < 4; ++w) {
    for (int n = 0; n < 16; ++n) {
      out[w * 16 + n] = kDigits[(words[w] >> (60 - 4 * n)) & 0xf];
    }
  }
  return out;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  return out;
}

Digest sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot read " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                             &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0 &&
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount())) != 1) {
      throw std::runtime_error("sha256: digest update failed");
    }
  }
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1) {
    throw std::runtime_error("sha256: digest final failed");
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Id Id::from_bytes(std::span<const std::uint8_t, kBytes> bytes) {
  Id id;
  for (int w = 0; w < 4; ++w) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v = (v << 8) | bytes[w * 8 + b];
    id.words_[w] = v;
  }
  return id;
}

Id Id::from_hex(std::string_view hex) {
  if (hex.size() != 2 * kBytes) {
    throw std::invalid_argument("id: expected 64 hex digits, got " +
                                std::to_string(hex.size()));
  }
  Id id;
  for (std::size_t i = 0; i < hex.size(); ++i) {
    const int v = hex_value(hex[i]);
    if (v < 0) throw std::invalid_argument("id: invalid hex digit");
    id.words_[i / 16] = (id.words_[i / 16] << 4) | static_cast<unsigned>(v);
  }
  return id;
}

Id Id::hash_of(std::span<const std::uint8_t> data) {
  return from_digest(sha256(data));
}

Digest Id::bytes() const {
  Digest out{};
  for (int w = 0; w < 4; ++w) {
    for (int b = 0; b < 8; ++b) {
      out[w * 8 + b] = static_cast<std::uint8_t>(words_[w] >> (56 - 8 * b));
    }
  }
  return out;
}

std::string Id::hex() const { return words_to_hex(words_); }

Id Id::with_bit_flipped(int index) const {
  if (index < 0 || index >= kBits) {
    throw std::out_of_range("id: bit index out of range");
  }
  Id out = *this;
  out.words_[index >> 6] ^= std::uint64_t{1} << (63 - (index & 63));
  return out;
}

std::uint32_t Id::prefix(int count) const {
  if (count < 0 || count > 32) {
    throw std::out_of_range("id: prefix length must be in [0, 32]");
  }
  if (count == 0) return 0;
  return static_cast<std::uint32_t>(words_[0] >> (64 - count));
}

int Distance::leading_zeros() const {
  for (int w = 0; w < 4; ++w) {
    if (words_[w] != 0) return w * 64 + std::countl_zero(words_[w]);
  }
  return Id::kBits;
}

std::string Distance::hex() const { return words_to_hex(words_); }

}  // namespace kadmap
