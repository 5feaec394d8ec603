#pragma once

#include <cstddef>
#include <cstdint>

namespace bcnet {

// Standard CRC-32 (zlib polynomial). Pass the previous value to continue a running checksum.
std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t previous = 0);

}  // namespace bcnet
