#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace seqnas {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

// First 8 digest bytes of a hex digest, big-endian; for seeding.
std::uint64_t hex_prefix_u64(std::string_view hex);

bool is_sha256_hex(std::string_view s);

}  // namespace seqnas
