#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pnrl {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

// IEEE CRC-32 (zlib polynomial).
std::uint32_t crc32(std::string_view data);

}  // namespace pnrl
