#include "bcnet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "bcnet/errors.hpp"

namespace bcnet {

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) break;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path, const char* expected) {
  NetpbmHeader h;
  h.magic = next_token(in);
  if (h.magic != expected) {
    throw FormatError(path.string() + ": expected " + expected + " header, found '" + h.magic + "'");
  }
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));  // consumes the single whitespace byte after maxval
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255) {
    throw FormatError(path.string() + ": unsupported dimensions or maxval (need 8-bit)");
  }
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3) throw UsageError("write_ppm needs a 3-channel image");
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(),
                 [](float v) { return static_cast<char>(to_byte(v)); });
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

Image read_ppm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P6");
  Image img(h.height, h.width, 3);
  std::vector<unsigned char> bytes(img.pixels.size());
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError(path.string() + ": truncated pixel data");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  auto out = open_out(path);
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

GrayImage read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto h = read_header(in, path, "P5");
  GrayImage img{h.height, h.width, std::vector<std::uint8_t>(static_cast<std::size_t>(h.height) * h.width)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  return img;
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryMap& mask) {
  GrayImage g{mask.height, mask.width, std::vector<std::uint8_t>(mask.bits.size())};
  for (std::size_t i = 0; i < mask.bits.size(); ++i) g.pixels[i] = mask.bits[i] ? 255 : 0;
  write_pgm(path, g);
}

BinaryMap read_mask_pgm(const std::filesystem::path& path) {
  const auto g = read_pgm(path);
  BinaryMap m(g.height, g.width);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) m.bits[i] = g.pixels[i] ? 1 : 0;
  return m;
}

}  // namespace bcnet
