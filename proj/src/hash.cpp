#include "esp/hash.hpp"

#include <openssl/evp.h>

#include <array>

namespace esp {

namespace {

std::array<unsigned char, 32> digest(std::string_view bytes) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  static const char* kHex = "0123456789abcdef";
  auto d = digest(bytes);
  std::string hex;
  hex.reserve(d.size() * 2);
  for (unsigned char b : d) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 0x0f]);
  }
  return hex;
}

std::uint64_t sha256_prefix_u64(std::string_view bytes) {
  auto d = digest(bytes);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value = (value << 8) | d[static_cast<std::size_t>(i)];
  }
  return value;
}

}  // namespace esp
