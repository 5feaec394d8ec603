#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bcnet/tensor.hpp"

namespace bcnet {

inline constexpr std::uint32_t kArchiveVersion = 1;

/// One named float array in a tensor archive.
struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

// Byte layout (little-endian):
//   "BCNT" | version u32 | entry count u32 |
//   per entry: name length u16, UTF-8 name, rank u8, dims u32[rank], f32 payload |
//   CRC32 u32 of every preceding byte.
std::vector<std::uint8_t> encode_archive(std::span<const ArchiveEntry> entries);
std::vector<ArchiveEntry> decode_archive(std::span<const std::uint8_t> bytes, const std::string& origin = "archive");

void write_archive(const std::filesystem::path& path, std::span<const ArchiveEntry> entries);
std::vector<ArchiveEntry> read_archive(const std::filesystem::path& path);

}  // namespace bcnet
