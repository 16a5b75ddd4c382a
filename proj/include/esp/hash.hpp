#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace esp {

// SHA-256 of the UTF-8 bytes, lowercase hex.
std::string sha256_hex(std::string_view bytes);

// First 8 digest bytes interpreted as a big-endian unsigned integer.
std::uint64_t sha256_prefix_u64(std::string_view bytes);

}  // namespace esp
