#include "bcnet/crc32.hpp"

#include <zlib.h>

#include <algorithm>
#include <limits>

namespace bcnet {

std::uint32_t crc32(const void* data, std::size_t size, std::uint32_t previous) {
  auto crc = static_cast<uLong>(previous);
  const auto* p = static_cast<const Bytef*>(data);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, std::numeric_limits<uInt>::max()));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace bcnet
