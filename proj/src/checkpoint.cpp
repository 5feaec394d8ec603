#include "bcnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "bcnet/crc32.hpp"
#include "bcnet/errors.hpp"

namespace bcnet {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'N', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  const std::uint8_t* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError(origin_ + ": truncated at byte " + std::to_string(pos_));
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U le() {
    const auto* p = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v = static_cast<U>(v | (static_cast<U>(p[i]) << (8 * i)));
    return v;
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_archive(std::span<const ArchiveEntry> entries) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kArchiveVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw UsageError("archive entry name too long");
    if (e.shape.size() > std::numeric_limits<std::uint8_t>::max()) throw UsageError("archive entry rank too large");
    if (shape_numel(e.shape) != e.values.size()) {
      throw DimensionError("archive entry '" + e.name + "' has " + std::to_string(e.values.size()) +
                           " values for shape " + shape_to_string(e.shape));
    }
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (float v : e.values) w.f32(v);
  }
  const std::uint32_t crc = crc32(w.data().data(), w.data().size());
  w.le<std::uint32_t>(crc);
  return std::move(w.data());
}

std::vector<ArchiveEntry> decode_archive(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 16) throw FormatError(origin + ": too short to be a tensor archive");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.subspan(body), origin);
  if (tail.le<std::uint32_t>() != crc32(bytes.data(), body)) throw FormatError(origin + ": CRC32 mismatch");

  Reader r(bytes.first(body), origin);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError(origin + ": bad magic (expected BCNT)");
  const auto version = r.le<std::uint32_t>();
  if (version != kArchiveVersion) throw FormatError(origin + ": unsupported version " + std::to_string(version));
  const auto count = r.le<std::uint32_t>();
  std::vector<ArchiveEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    const auto len = r.le<std::uint16_t>();
    const auto* name = r.take(len);
    e.name.assign(reinterpret_cast<const char*>(name), len);
    const auto rank = r.le<std::uint8_t>();
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.le<std::uint32_t>());
    const std::size_t n = shape_numel(e.shape);
    if (n > (body - r.pos()) / 4) throw FormatError(origin + ": entry '" + e.name + "' overruns the archive");
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    entries.push_back(std::move(e));
  }
  if (r.pos() != body) throw FormatError(origin + ": trailing bytes after last entry");
  return entries;
}

void write_archive(const std::filesystem::path& path, std::span<const ArchiveEntry> entries) {
  const auto bytes = encode_archive(entries);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw FormatError(tmp + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(tmp + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ArchiveEntry> read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open checkpoint");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_archive(bytes, path.string());
}

}  // namespace bcnet
