#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcnet/synth.hpp"

namespace bcnet {

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  SceneConfig config;
  std::vector<OcclusionSample> samples;
};

nlohmann::json scene_config_to_json(const SceneConfig& cfg);
SceneConfig scene_config_from_json(const nlohmann::json& j);

/// Writes manifest.json plus, per sample i, img_%06d.ppm, four
/// mask_<layer>_<kind>_%06d.pgm rasters and meta_%06d.json.
void export_dataset(const SceneConfig& config, std::span<const OcclusionSample> samples,
                    const std::filesystem::path& dir);

// Throws FormatError naming the offending path.
Dataset import_dataset(const std::filesystem::path& dir);

// Generates `count` samples and exports them.
Dataset generate_and_export(const SceneConfig& config, std::size_t count, const std::filesystem::path& dir,
                            int threads = 1);

// CRC32 over manifest and sample files in a fixed order, as 8 hex digits.
std::string dataset_checksum(const std::filesystem::path& dir);

std::string sample_file_name(const char* prefix, std::size_t index, const char* ext);

}  // namespace bcnet
