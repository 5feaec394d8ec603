#include "bcnet/synth.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include "bcnet/errors.hpp"

namespace bcnet {

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kEllipse: return "ellipse";
    case ShapeKind::kRectangle: return "rectangle";
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kComposite: return "composite";
  }
  return "?";
}

ShapeKind parse_shape_kind(const std::string& name) {
  for (auto k : {ShapeKind::kEllipse, ShapeKind::kRectangle, ShapeKind::kTriangle, ShapeKind::kComposite}) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown shape kind '" + name + "'");
}

std::string to_string(TextureMode mode) { return mode == TextureMode::kFlat ? "flat" : "noise"; }

TextureMode parse_texture_mode(const std::string& name) {
  if (name == "flat") return TextureMode::kFlat;
  if (name == "noise") return TextureMode::kNoise;
  throw UsageError("unknown texture mode '" + name + "'");
}

void SceneConfig::validate() const {
  if (canvas < 32) throw UsageError("scene canvas must be at least 32 pixels");
  if (palette.empty()) throw UsageError("scene palette is empty");
  if (min_objects < 2 || max_objects < min_objects) throw UsageError("scene needs 2 <= min_objects <= max_objects");
  if (!(overlap_lo >= 0 && overlap_hi <= 1 && overlap_lo <= overlap_hi)) {
    throw UsageError("overlap range must satisfy 0 <= lo <= hi <= 1");
  }
  if (!(noise_sigma >= 0)) throw UsageError("noise sigma must be non-negative");
}

void OcclusionSample::refresh_boundaries() {
  occluder_boundary = boundary_from_mask(occluder_amodal);
  occludee_boundary = boundary_from_mask(occludee_modal);
  occludee_amodal_boundary = boundary_from_mask(occludee_amodal);
}

double overlap_ratio(const Box& a, const Box& b) {
  const double smaller = std::min(a.area(), b.area());
  if (smaller <= 0) return 0.0;
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  return std::clamp(inter.area() / smaller, 0.0, 1.0);
}

namespace {

constexpr int kMaxAttempts = 1000;
constexpr double kMinVisibleFraction = 0.1;
constexpr std::size_t kMinArea = 30;

using Color = std::array<float, 3>;

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kEllipse;
  double cx = 0, cy = 0;
  double rx = 1, ry = 1;
  double angle = 0;
  std::array<double, 6> tri{};  // triangle vertices
  // composite: rectangle part
  double ox = 0, oy = 0, hx = 1, hy = 1, angle2 = 0;
  double extent = 1;  // conservative radius for raster bounds
};

bool in_rotated_ellipse(double dx, double dy, double rx, double ry, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

bool in_rotated_rect(double dx, double dy, double hx, double hy, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return std::abs(u) <= hx && std::abs(v) <= hy;
}

bool in_triangle(const std::array<double, 6>& t, double x, double y) {
  auto edge = [&](int i, int j) { return (t[2 * j] - t[2 * i]) * (y - t[2 * i + 1]) - (t[2 * j + 1] - t[2 * i + 1]) * (x - t[2 * i]); };
  const double d0 = edge(0, 1), d1 = edge(1, 2), d2 = edge(2, 0);
  const bool neg = d0 < 0 || d1 < 0 || d2 < 0;
  const bool pos = d0 > 0 || d1 > 0 || d2 > 0;
  return !(neg && pos);
}

bool contains(const ShapeSpec& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (s.kind) {
    case ShapeKind::kEllipse: return in_rotated_ellipse(dx, dy, s.rx, s.ry, s.angle);
    case ShapeKind::kRectangle: return in_rotated_rect(dx, dy, s.rx, s.ry, s.angle);
    case ShapeKind::kTriangle: return in_triangle(s.tri, x, y);
    case ShapeKind::kComposite:
      return in_rotated_ellipse(dx, dy, s.rx, s.ry, s.angle) ||
             in_rotated_rect(dx - s.ox, dy - s.oy, s.hx, s.hy, s.angle2);
  }
  return false;
}

ShapeSpec random_shape(const SceneConfig& cfg, Rng& rng, double cx, double cy, double radius) {
  ShapeSpec s;
  s.kind = cfg.palette[rng.below(cfg.palette.size())];
  s.cx = cx;
  s.cy = cy;
  s.rx = radius * rng.uniform(0.75, 1.0);
  s.ry = radius * rng.uniform(0.5, 1.0);
  s.angle = rng.uniform(0.0, std::numbers::pi);
  s.extent = radius;
  switch (s.kind) {
    case ShapeKind::kRectangle:
      s.rx *= 0.85;
      s.ry *= 0.85;
      s.extent = radius * 1.5;
      break;
    case ShapeKind::kTriangle: {
      const double a0 = rng.uniform(0.0, 2 * std::numbers::pi);
      for (int k = 0; k < 3; ++k) {
        const double a = a0 + k * 2 * std::numbers::pi / 3 + rng.uniform(-0.35, 0.35);
        const double r = radius * rng.uniform(0.85, 1.15);
        s.tri[2 * k] = cx + r * std::cos(a);
        s.tri[2 * k + 1] = cy + r * std::sin(a);
      }
      s.extent = radius * 1.2;
      break;
    }
    case ShapeKind::kComposite: {
      // Rectangle attached off-center; its center stays inside the ellipse so the union is connected.
      const double a = rng.uniform(0.0, 2 * std::numbers::pi);
      const double off = rng.uniform(0.3, 0.6) * std::min(s.rx, s.ry);
      s.ox = off * std::cos(a);
      s.oy = off * std::sin(a);
      s.hx = radius * rng.uniform(0.4, 0.7);
      s.hy = radius * rng.uniform(0.2, 0.4);
      s.angle2 = rng.uniform(0.0, std::numbers::pi);
      s.extent = radius * 1.7;
      break;
    }
    case ShapeKind::kEllipse: break;
  }
  return s;
}

BinaryMap rasterize(const ShapeSpec& s, int canvas) {
  BinaryMap m(canvas, canvas);
  const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - s.extent - 1)));
  const int y1 = std::min(canvas - 1, static_cast<int>(std::ceil(s.cy + s.extent + 1)));
  const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - s.extent - 1)));
  const int x1 = std::min(canvas - 1, static_cast<int>(std::ceil(s.cx + s.extent + 1)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.set(y, x, contains(s, x + 0.5, y + 0.5));
  // Thin tips can rasterize into diagonal-only pixels; keep one 4-connected piece.
  return largest_component_4(m);
}

Color random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform(0.05, 0.95)), static_cast<float>(rng.uniform(0.05, 0.95)),
          static_cast<float>(rng.uniform(0.05, 0.95))};
}

double color_distance(const Color& a, const Color& b) {
  double d = 0;
  for (int i = 0; i < 3; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(d);
}

// Distinct from every color in `others` by at least `min_dist` (best effort).
Color distinct_color(Rng& rng, const std::vector<Color>& others, double min_dist) {
  Color c = random_color(rng);
  for (int tries = 0; tries < 64; ++tries) {
    bool ok = true;
    for (const auto& o : others) ok = ok && color_distance(c, o) >= min_dist;
    if (ok) break;
    c = random_color(rng);
  }
  return c;
}

void paint(Image& img, const BinaryMap& mask, const Color& color, const SceneConfig& cfg, Rng& rng) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!mask.at(y, x)) continue;
      for (int c = 0; c < 3; ++c) {
        float v = color[c];
        if (cfg.texture == TextureMode::kNoise) v += static_cast<float>(cfg.noise_sigma * rng.normal());
        img.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  }
}

Box pad_box(const Box& b, double frac) {
  const double px = std::round(frac * b.width()), py = std::round(frac * b.height());
  return {b.x0 - px, b.y0 - py, b.x1 + px, b.y1 + py};
}

}  // namespace

OcclusionSample generate_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0xB1A7E5));
  const int n = config.canvas;
  const double sz = static_cast<double>(n);

  ShapeSpec occludee_shape, occluder_shape;
  BinaryMap occludee, occluder;
  double ratio = 0;
  bool found = false;
  for (int attempt = 0; attempt < kMaxAttempts && !found; ++attempt) {
    const double r1 = sz * rng.uniform(0.14, 0.26);
    occludee_shape = random_shape(config, rng, sz * rng.uniform(0.3, 0.7), sz * rng.uniform(0.3, 0.7), r1);
    occludee = rasterize(occludee_shape, n);
    if (occludee.count() < kMinArea) continue;

    const double r2 = sz * rng.uniform(0.12, 0.24);
    const double dir = rng.uniform(0.0, 2 * std::numbers::pi);
    const double dist = rng.uniform(0.0, 1.3) * (r1 + r2);
    occluder_shape = random_shape(config, rng, occludee_shape.cx + dist * std::cos(dir),
                                  occludee_shape.cy + dist * std::sin(dir), r2);
    occluder = rasterize(occluder_shape, n);
    if (occluder.count() < kMinArea) continue;

    ratio = overlap_ratio(bounding_box(occluder), bounding_box(occludee));
    if (ratio < config.overlap_lo || ratio > config.overlap_hi) continue;
    const auto visible = mask_minus(occludee, occluder).count();
    if (static_cast<double>(visible) < kMinVisibleFraction * static_cast<double>(occludee.count())) continue;
    found = true;
  }
  if (!found) {
    throw GenerationError("no scene with overlap ratio in [" + std::to_string(config.overlap_lo) + ", " +
                          std::to_string(config.overlap_hi) + "] after " + std::to_string(kMaxAttempts) +
                          " attempts (seed " + std::to_string(seed) + ")");
  }

  OcclusionSample s;
  s.seed = seed;
  s.occludee_amodal = occludee;
  s.occluder_amodal = occluder;
  s.occluder_modal = occluder;  // the occluder is always the top layer
  s.occludee_modal = mask_minus(occludee, occluder);
  s.overlap_ratio = ratio;
  s.is_occluded = !mask_and(occluder, occludee).empty();
  s.roi_box = pad_box(bounding_box(occludee), 0.1);
  s.refresh_boundaries();

  // Back to front: background, distractors, occludee, occluder.
  std::vector<Color> used;
  const Color background = random_color(rng);
  used.push_back(background);
  s.image = Image(n, n, 3);
  BinaryMap full(n, n);
  std::fill(full.bits.begin(), full.bits.end(), std::uint8_t{1});
  paint(s.image, full, background, config, rng);

  const int objects = config.min_objects + static_cast<int>(rng.below(
                                               static_cast<std::uint64_t>(config.max_objects - config.min_objects + 1)));
  for (int i = 2; i < objects; ++i) {
    const auto spec = random_shape(config, rng, sz * rng.uniform(0.1, 0.9), sz * rng.uniform(0.1, 0.9),
                                   sz * rng.uniform(0.08, 0.18));
    paint(s.image, rasterize(spec, n), distinct_color(rng, {background}, 0.25), config, rng);
  }
  const Color occludee_color = distinct_color(rng, used, 0.3);
  used.push_back(occludee_color);
  paint(s.image, occludee, occludee_color, config, rng);
  paint(s.image, occluder, distinct_color(rng, used, 0.3), config, rng);
  return s;
}

std::vector<OcclusionSample> generate_dataset(const SceneConfig& config, std::size_t count, int threads) {
  config.validate();
  std::vector<OcclusionSample> out(count);
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) out[i] = generate_scene(config, config.seed + i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < count; i = next++) out[i] = generate_scene(config, config.seed + i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

BalancedSampler::BalancedSampler(std::span<const OcclusionSample> pool) {
  for (std::size_t i = 0; i < pool.size(); ++i) (pool[i].is_occluded ? occluded_ : clear_).push_back(i);
}

BalancedSampler::BalancedSampler(std::vector<std::size_t> occluded, std::vector<std::size_t> clear)
    : occluded_(std::move(occluded)), clear_(std::move(clear)) {}

namespace {

// k distinct elements by partial Fisher-Yates over a copy.
void draw_distinct(std::vector<std::size_t> items, std::size_t k, Rng& rng, std::vector<std::size_t>& out) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(items.size() - i);
    std::swap(items[i], items[j]);
    out.push_back(items[i]);
  }
}

}  // namespace

std::vector<std::size_t> BalancedSampler::draw(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw UsageError("batch size must be >= 1");
  const std::size_t want_occ = (batch + 1) / 2, want_clear = batch / 2;
  if (occluded_.size() < want_occ || clear_.size() < want_clear) {
    std::string msg = "balance sampling for batch " + std::to_string(batch) + ":";
    if (occluded_.size() < want_occ) {
      msg += " short " + std::to_string(want_occ - occluded_.size()) + " occluded sample(s)";
    }
    if (clear_.size() < want_clear) {
      msg += " short " + std::to_string(want_clear - clear_.size()) + " non-occluded sample(s)";
    }
    throw SamplingError(msg);
  }
  std::vector<std::size_t> out;
  out.reserve(batch);
  draw_distinct(occluded_, want_occ, rng, out);
  draw_distinct(clear_, want_clear, rng, out);
  rng.shuffle(std::span<std::size_t>(out));
  return out;
}

std::vector<std::size_t> balance_sample(std::span<const OcclusionSample> pool, std::size_t batch, Rng& rng) {
  return BalancedSampler(pool).draw(batch, rng);
}

}  // namespace bcnet
