#include "bcnet/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "bcnet/crc32.hpp"
#include "bcnet/errors.hpp"

namespace bcnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Mask file stems, in manifest order.
constexpr const char* kMaskNames[4] = {"mask_occluder_amodal", "mask_occluder_modal", "mask_occludee_amodal",
                                       "mask_occludee_modal"};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": missing or unreadable");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

}  // namespace

std::string sample_file_name(const char* prefix, std::size_t index, const char* ext) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s_%06zu.%s", prefix, index, ext);
  return buf;
}

json scene_config_to_json(const SceneConfig& cfg) {
  json palette = json::array();
  for (auto k : cfg.palette) palette.push_back(to_string(k));
  return {{"canvas", cfg.canvas},
          {"palette", palette},
          {"min_objects", cfg.min_objects},
          {"max_objects", cfg.max_objects},
          {"overlap", {cfg.overlap_lo, cfg.overlap_hi}},
          {"texture", to_string(cfg.texture)},
          {"noise_sigma", cfg.noise_sigma},
          {"seed", cfg.seed}};
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig cfg;
  try {
    cfg.canvas = j.value("canvas", cfg.canvas);
    if (j.contains("palette")) {
      cfg.palette.clear();
      for (const auto& p : j.at("palette")) cfg.palette.push_back(parse_shape_kind(p.get<std::string>()));
    }
    cfg.min_objects = j.value("min_objects", cfg.min_objects);
    cfg.max_objects = j.value("max_objects", cfg.max_objects);
    if (j.contains("overlap")) {
      cfg.overlap_lo = j.at("overlap").at(0).get<double>();
      cfg.overlap_hi = j.at("overlap").at(1).get<double>();
    }
    if (j.contains("texture")) cfg.texture = parse_texture_mode(j.at("texture").get<std::string>());
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw FormatError(std::string("scene config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void export_dataset(const SceneConfig& config, std::span<const OcclusionSample> samples, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(dir / "manifest.json", {{"format_version", kDatasetFormatVersion},
                                     {"count", samples.size()},
                                     {"config", scene_config_to_json(config)}});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    write_ppm(dir / sample_file_name("img", i, "ppm"), s.image);
    const BinaryMap* masks[4] = {&s.occluder_amodal, &s.occluder_modal, &s.occludee_amodal, &s.occludee_modal};
    for (int m = 0; m < 4; ++m) write_mask_pgm(dir / sample_file_name(kMaskNames[m], i, "pgm"), *masks[m]);
    const auto& b = s.roi_box;
    write_json(dir / sample_file_name("meta", i, "json"),
               {{"roi_box",
                 {static_cast<long>(b.x0), static_cast<long>(b.y0), static_cast<long>(b.x1), static_cast<long>(b.y1)}},
                {"overlap_ratio", s.overlap_ratio},
                {"is_occluded", s.is_occluded},
                {"seed", s.seed}});
  }
}

Dataset import_dataset(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  const json manifest = read_json(manifest_path);
  Dataset ds;
  std::size_t count = 0;
  try {
    if (manifest.at("format_version").get<int>() != kDatasetFormatVersion) {
      throw FormatError(manifest_path.string() + ": unsupported format_version");
    }
    count = manifest.at("count").get<std::size_t>();
    ds.config = scene_config_from_json(manifest.at("config"));
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  ds.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& s = ds.samples[i];
    s.image = read_ppm(dir / sample_file_name("img", i, "ppm"));
    BinaryMap* masks[4] = {&s.occluder_amodal, &s.occluder_modal, &s.occludee_amodal, &s.occludee_modal};
    for (int m = 0; m < 4; ++m) {
      const auto path = dir / sample_file_name(kMaskNames[m], i, "pgm");
      *masks[m] = read_mask_pgm(path);
      if (masks[m]->height != s.image.height || masks[m]->width != s.image.width) {
        throw FormatError(path.string() + ": mask size does not match image");
      }
    }
    const auto meta_path = dir / sample_file_name("meta", i, "json");
    const json meta = read_json(meta_path);
    try {
      const auto& b = meta.at("roi_box");
      s.roi_box = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
      s.overlap_ratio = meta.at("overlap_ratio").get<double>();
      s.is_occluded = meta.at("is_occluded").get<bool>();
      s.seed = meta.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    s.refresh_boundaries();
  }
  return ds;
}

Dataset generate_and_export(const SceneConfig& config, std::size_t count, const fs::path& dir, int threads) {
  Dataset ds{config, generate_dataset(config, count, threads)};
  export_dataset(config, ds.samples, dir);
  return ds;
}

std::string dataset_checksum(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  const auto count = manifest.value("count", std::size_t{0});
  std::vector<fs::path> files{dir / "manifest.json"};
  for (std::size_t i = 0; i < count; ++i) {
    files.push_back(dir / sample_file_name("img", i, "ppm"));
    for (const char* m : kMaskNames) files.push_back(dir / sample_file_name(m, i, "pgm"));
    files.push_back(dir / sample_file_name("meta", i, "json"));
  }
  std::uint32_t crc = 0;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw FormatError(f.string() + ": missing");
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    crc = crc32(bytes.data(), bytes.size(), crc);
  }
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace bcnet
