#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bcnet/mask.hpp"

namespace bcnet {

/// Interleaved float image, values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c = 3) : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, 0.f) {}

  float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// 8-bit single-channel raster.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;
};

// Binary P6 / P5 with maxval 255. Float channels are clamped to [0, 1] and rounded.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

// Masks are stored as 0/255 PGMs; any nonzero pixel reads back as set.
void write_mask_pgm(const std::filesystem::path& path, const BinaryMap& mask);
BinaryMap read_mask_pgm(const std::filesystem::path& path);

std::uint8_t to_byte(float v);

}  // namespace bcnet
