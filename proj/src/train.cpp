#include "bcnet/train.hpp"

#include <algorithm>
#include <cmath>

#include "bcnet/checkpoint.hpp"
#include "bcnet/errors.hpp"
#include "bcnet/ops.hpp"
#include "bcnet/roi.hpp"

namespace bcnet {

using nlohmann::json;

void TrainConfig::validate() const {
  if (iterations < 1) throw UsageError("iterations must be >= 1");
  if (batch < 1) throw UsageError("batch must be >= 1");
  if (warmup_iters < 0) throw UsageError("warmup_iters must be >= 0");
  if (!(lr > 0) || !(momentum >= 0 && momentum < 1)) throw UsageError("need lr > 0 and momentum in [0, 1)");
  if (!(warmup_factor > 0 && warmup_factor <= 1)) throw UsageError("warmup_factor must lie in (0, 1]");
  if (!(scale_jitter >= 0 && scale_jitter < 1)) throw UsageError("scale_jitter must lie in [0, 1)");
  if (log_every < 1 || checkpoint_every < 1) throw UsageError("log and checkpoint intervals must be >= 1");
  if (boundary_thickness < 1) throw UsageError("boundary_thickness must be >= 1");
  weights.validate();
  head_config().validate();
}

HeadConfig TrainConfig::head_config() const {
  HeadConfig h;
  h.channels = channels;
  h.embed_channels = embed_channels;
  h.roi_size = roi_size;
  h.image_channels = 3;
  h.stem = true;
  h.variant = variant;
  return h;
}

void TrainConfig::set_occluder_modeling(bool contour, bool mask) {
  weights.occluder_boundary = contour ? LossWeights{}.occluder_boundary : 0.0;
  weights.occluder_mask = mask ? LossWeights{}.occluder_mask : 0.0;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"iterations", c.iterations},
          {"batch", c.batch},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"warmup_iters", c.warmup_iters},
          {"warmup_factor", c.warmup_factor},
          {"seed", c.seed},
          {"weights",
           {c.weights.detect, c.weights.occluder_boundary, c.weights.occluder_mask, c.weights.occludee_boundary,
            c.weights.occludee_mask}},
          {"variant", c.variant.name()},
          {"guidance", c.variant.guidance},
          {"channels", c.channels},
          {"embed_channels", c.embed_channels},
          {"roi_size", c.roi_size},
          {"boundary_thickness", c.boundary_thickness},
          {"scale_jitter", c.scale_jitter},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    c.iterations = j.value("iterations", c.iterations);
    c.batch = j.value("batch", c.batch);
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.warmup_iters = j.value("warmup_iters", c.warmup_iters);
    c.warmup_factor = j.value("warmup_factor", c.warmup_factor);
    c.seed = j.value("seed", c.seed);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights = {w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>(),
                   w.at(4).get<double>()};
    }
    if (j.contains("variant")) {
      const bool guidance = c.variant.guidance;
      c.variant = HeadVariant::parse(j.at("variant").get<std::string>());
      c.variant.guidance = guidance;
    }
    c.variant.guidance = j.value("guidance", c.variant.guidance);
    c.channels = j.value("channels", c.channels);
    c.embed_channels = j.value("embed_channels", c.embed_channels);
    c.roi_size = j.value("roi_size", c.roi_size);
    c.boundary_thickness = j.value("boundary_thickness", c.boundary_thickness);
    c.scale_jitter = j.value("scale_jitter", c.scale_jitter);
    c.log_every = j.value("log_every", c.log_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  } catch (const json::exception& e) {
    throw UsageError(std::string("train config: ") + e.what());
  }
  return c;
}

double lr_at(const TrainConfig& cfg, int iteration) {
  return iteration < cfg.warmup_iters ? cfg.lr * cfg.warmup_factor : cfg.lr;
}

void sgd_momentum_step(std::span<float> params, std::span<const float> grads, std::span<float> velocity, double lr,
                       double momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw DimensionError("sgd_momentum_step: parameter, gradient and velocity sizes differ");
  }
  const auto m = static_cast<float>(momentum);
  const auto step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] + grads[i];
    params[i] -= step * velocity[i];
  }
}

namespace {

constexpr const char* kParamPrefix = "param/";
constexpr const char* kMomentumPrefix = "momentum/";

ArchiveEntry scalar_entry(std::string name, double v) { return {std::move(name), {1}, {static_cast<float>(v)}}; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::vector<ArchiveEntry> entries;
  for (const auto& [name, t] : ckpt.params.entries()) {
    entries.push_back({kParamPrefix + name, t.shape(), {t.data().begin(), t.data().end()}});
  }
  for (const auto& [name, v] : ckpt.velocity) {
    entries.push_back({kMomentumPrefix + name, ckpt.params.at(name).shape(), v});
  }
  entries.push_back(scalar_entry("meta/iteration", ckpt.iteration));
  if (ckpt.loss_start) entries.push_back(scalar_entry("meta/loss_start", *ckpt.loss_start));
  if (ckpt.loss_end) entries.push_back(scalar_entry("meta/loss_end", *ckpt.loss_end));
  // Config echo as the bytes of its JSON text, one byte per value.
  const std::string text = train_config_to_json(ckpt.config).dump();
  entries.push_back({"config/json", {text.size()}, std::vector<float>(text.begin(), text.end())});
  write_archive(path, entries);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ckpt;
  bool have_config = false, have_iteration = false;
  auto starts_with = [](const std::string& s, const char* p) { return s.rfind(p, 0) == 0; };
  for (auto& e : read_archive(path)) {
    if (starts_with(e.name, kParamPrefix)) {
      ckpt.params.add(e.name.substr(std::char_traits<char>::length(kParamPrefix)),
                      Tensor(e.shape, std::move(e.values), true));
    } else if (starts_with(e.name, kMomentumPrefix)) {
      ckpt.velocity.emplace_back(e.name.substr(std::char_traits<char>::length(kMomentumPrefix)), std::move(e.values));
    } else if (e.name == "meta/iteration") {
      ckpt.iteration = static_cast<int>(e.values.at(0));
      have_iteration = true;
    } else if (e.name == "meta/loss_start") {
      ckpt.loss_start = e.values.at(0);
    } else if (e.name == "meta/loss_end") {
      ckpt.loss_end = e.values.at(0);
    } else if (e.name == "config/json") {
      std::string text(e.values.size(), '\0');
      std::transform(e.values.begin(), e.values.end(), text.begin(), [](float v) { return static_cast<char>(v); });
      try {
        ckpt.config = train_config_from_json(json::parse(text));
      } catch (const json::exception& ex) {
        throw FormatError(path.string() + ": config echo is not valid JSON (" + ex.what() + ")");
      }
      have_config = true;
    }
  }
  if (!have_config || !have_iteration) throw FormatError(path.string() + ": checkpoint lacks config or iteration");
  for (const auto& [name, v] : ckpt.velocity) {
    if (!ckpt.params.contains(name) || ckpt.params.at(name).numel() != v.size()) {
      throw FormatError(path.string() + ": momentum buffer '" + name + "' has no matching parameter");
    }
  }
  return ckpt;
}

BilayerHead<float> head_from_checkpoint(const Checkpoint& ckpt) {
  return BilayerHead<float>::bind(ckpt.config.head_config(), ckpt.params.cast<float>());
}

Trainer::Trainer(TrainConfig config, std::span<const OcclusionSample> data)
    : config_(std::move(config)),
      data_(data),
      sampler_(data),
      head_(BilayerHead<float>::init((config_.validate(), config_.head_config()), mix_seed(config_.seed, 0x1417))) {
  for (const auto& [_, t] : head_.parameters().entries()) velocity_.emplace_back(t.numel(), 0.0f);
}

Trainer::Trainer(const Checkpoint& resume, std::span<const OcclusionSample> data)
    : config_(resume.config),
      data_(data),
      sampler_(data),
      head_(head_from_checkpoint(resume)),
      iteration_(resume.iteration) {
  config_.validate();
  for (const auto& [name, t] : head_.parameters().entries()) {
    std::vector<float> v(t.numel(), 0.0f);
    for (const auto& [vn, vv] : resume.velocity) {
      if (vn != name) continue;
      if (vv.size() != v.size()) throw FormatError("checkpoint momentum for '" + name + "' has the wrong size");
      v = vv;
    }
    velocity_.push_back(std::move(v));
  }
}

LossRecord Trainer::step() {
  Rng rng(mix_seed(config_.seed, static_cast<std::uint64_t>(iteration_) + 1));
  const auto batch = sampler_.draw(static_cast<std::size_t>(config_.batch), rng);
  const double lr = lr_at(config_, iteration_);
  const int crop = config_.head_config().crop_size();
  const float inv_batch = 1.0f / static_cast<float>(config_.batch);

  LossRecord rec;
  rec.iteration = iteration_;
  rec.lr = lr;
  auto fail = [&](const std::string& what) {
    head_.parameters().zero_grads();
    throw NumericError(what + " at iteration " + std::to_string(iteration_) +
                       (last_finite_ ? " (last finite loss " + std::to_string(*last_finite_) + ")" : ""));
  };
  try {
    for (std::size_t idx : batch) {
      const auto& sample = data_[idx];
      const double factor = 1.0 + config_.scale_jitter * rng.uniform(-1.0, 1.0);
      const auto roi = extract_roi(sample, scale_box(sample.roi_box, factor), crop);
      const auto gt = make_ground_truth<float>(roi.occluder_mask, roi.occludee_modal, config_.boundary_thickness);
      const auto out = head_.forward_image(roi.image, ForwardMode::kTrain);
      const auto terms = compute_losses(out, gt, config_.weights);
      ops::scale(terms.total, inv_batch).backward();
      const double b = static_cast<double>(config_.batch);
      rec.total += terms.total.item() / b;
      rec.occluder_boundary += terms.occluder_boundary.item() / b;
      rec.occluder_mask += terms.occluder_mask.item() / b;
      rec.occludee_boundary += terms.occludee_boundary.item() / b;
      rec.occludee_mask += terms.occludee_mask.item() / b;
    }
  } catch (const NumericError& e) {
    fail(e.what());
  }
  if (!std::isfinite(rec.total)) fail("loss became non-finite");
  last_finite_ = rec.total;

  auto& entries = head_.parameters().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& t = entries[i].second;
    if (!t.requires_grad() || !t.has_grad()) continue;
    sgd_momentum_step(t.mutable_data(), t.grad(), velocity_[i], lr, config_.momentum);
    t.zero_grad();
  }
  ++iteration_;
  return rec;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.params = head_.parameters().cast<float>();
  const auto& entries = head_.parameters().entries();
  for (std::size_t i = 0; i < entries.size(); ++i) c.velocity.emplace_back(entries[i].first, velocity_[i]);
  c.iteration = iteration_;
  return c;
}

double smoothed_loss(std::span<const LossRecord> trace, std::size_t end, std::size_t window) {
  end = std::min(end, trace.size());
  const std::size_t begin = end > window ? end - window : 0;
  if (begin == end) return 0.0;
  double acc = 0;
  for (std::size_t i = begin; i < end; ++i) acc += trace[i].total;
  return acc / static_cast<double>(end - begin);
}

TrainResult train(const TrainConfig& config, std::span<const OcclusionSample> data, const TrainHooks& hooks) {
  Trainer trainer(config, data);
  return train(trainer, hooks);
}

TrainResult train(Trainer& trainer, const TrainHooks& hooks) {
  const TrainConfig& config = trainer.config();
  TrainResult result;
  result.trace.reserve(static_cast<std::size_t>(config.iterations));
  LossRecord window;
  int in_window = 0;
  while (trainer.iteration() < config.iterations) {
    const auto rec = trainer.step();
    result.trace.push_back(rec);
    window.total += rec.total;
    window.occluder_boundary += rec.occluder_boundary;
    window.occluder_mask += rec.occluder_mask;
    window.occludee_boundary += rec.occludee_boundary;
    window.occludee_mask += rec.occludee_mask;
    ++in_window;
    const int done = trainer.iteration();
    if (done % config.log_every == 0) {
      if (hooks.on_log) {
        LossRecord mean = window;
        const double n = in_window;
        mean.iteration = rec.iteration;
        mean.lr = rec.lr;
        mean.total /= n;
        mean.occluder_boundary /= n;
        mean.occluder_mask /= n;
        mean.occludee_boundary /= n;
        mean.occludee_mask /= n;
        hooks.on_log(mean);
      }
      window = {};
      in_window = 0;
    }
    if (hooks.on_checkpoint && done % config.checkpoint_every == 0 && done != config.iterations) {
      hooks.on_checkpoint(trainer.checkpoint());
    }
  }
  result.checkpoint = trainer.checkpoint();
  if (!result.trace.empty()) {
    const std::size_t w = std::min<std::size_t>(200, result.trace.size());
    result.checkpoint.loss_start = smoothed_loss(result.trace, w, w);
    result.checkpoint.loss_end = smoothed_loss(result.trace, result.trace.size(), w);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(result.checkpoint);
  return result;
}

}  // namespace bcnet
