#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bcnet/image_io.hpp"
#include "bcnet/mask.hpp"
#include "bcnet/random.hpp"

namespace bcnet {

enum class ShapeKind { kEllipse, kRectangle, kTriangle, kComposite };
enum class TextureMode { kFlat, kNoise };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& name);
std::string to_string(TextureMode mode);
TextureMode parse_texture_mode(const std::string& name);

struct SceneConfig {
  int canvas = 64;
  std::vector<ShapeKind> palette = {ShapeKind::kEllipse, ShapeKind::kRectangle, ShapeKind::kTriangle,
                                    ShapeKind::kComposite};
  int min_objects = 2;
  int max_objects = 3;
  // Accepted range of the occluder/occludee bounding-box overlap ratio.
  double overlap_lo = 0.0;
  double overlap_hi = 0.8;
  TextureMode texture = TextureMode::kNoise;
  double noise_sigma = 0.04;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One synthetic scene. Rasters cover the whole canvas; `roi_box` is the
/// occludee's amodal box padded by 10% per side.
struct OcclusionSample {
  Image image;
  BinaryMap occluder_amodal;
  BinaryMap occluder_modal;
  BinaryMap occludee_amodal;
  BinaryMap occludee_modal;
  BinaryMap occluder_boundary;
  BinaryMap occludee_boundary;         // contour of the visible (modal) occludee
  BinaryMap occludee_amodal_boundary;
  Box roi_box;
  double overlap_ratio = 0;
  bool is_occluded = false;
  std::uint64_t seed = 0;

  // Re-derives boundaries from the masks.
  void refresh_boundaries();
};

// Intersection area over the smaller box's area; 0 when either box is empty.
double overlap_ratio(const Box& a, const Box& b);

// Throws GenerationError if 1000 placement attempts miss the overlap range.
OcclusionSample generate_scene(const SceneConfig& config, std::uint64_t seed);

// Sample i uses seed config.seed + i. `threads` <= 1 runs inline.
std::vector<OcclusionSample> generate_dataset(const SceneConfig& config, std::size_t count, int threads = 1);

/// Draws batches with ceil(b/2) occluded and floor(b/2) non-occluded samples,
/// each half without replacement, then shuffles the batch.
class BalancedSampler {
 public:
  explicit BalancedSampler(std::span<const OcclusionSample> pool);
  BalancedSampler(std::vector<std::size_t> occluded, std::vector<std::size_t> clear);

  std::vector<std::size_t> draw(std::size_t batch, Rng& rng) const;

  std::size_t occluded_count() const { return occluded_.size(); }
  std::size_t clear_count() const { return clear_.size(); }

 private:
  std::vector<std::size_t> occluded_;
  std::vector<std::size_t> clear_;
};

// Returns indices into `pool`.
std::vector<std::size_t> balance_sample(std::span<const OcclusionSample> pool, std::size_t batch, Rng& rng);

}  // namespace bcnet
