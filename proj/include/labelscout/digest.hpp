#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace labelscout {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view data);
std::string sha256_hex(std::string_view data);
std::string to_hex(const Sha256& digest);

/// First 8 digest bytes, big-endian.
std::uint64_t digest_prefix64(const Sha256& digest);

}  // namespace labelscout
