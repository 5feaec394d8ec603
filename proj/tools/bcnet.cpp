// bcnet: dataset generation, training, evaluation, ablation, inference and
// heatmap panels for the bilayer occlusion mask head.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bcnet/ablation.hpp"
#include "bcnet/dataset_io.hpp"
#include "bcnet/errors.hpp"
#include "bcnet/evaluate.hpp"
#include "bcnet/image_io.hpp"
#include "bcnet/predict.hpp"
#include "bcnet/roi.hpp"
#include "bcnet/train.hpp"
#include "bcnet/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bcnet;

namespace {

constexpr std::size_t kMaxBoxes = 50;

// Flat JSON object of option long names, e.g. {"iters": 500, "variant": "single-gcn"}.
// The file is read by the top-level app once parsing is done, so each key is routed
// to whichever subcommand was chosen; options given on the command line win.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        j[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump();
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError("--config", e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("--config", "top level must be a JSON object");
    const auto subs = app_->get_subcommands();
    if (subs.empty()) throw CLI::ConfigError("--config needs a subcommand");
    const CLI::App* sub = subs.front();
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (sub->get_option_no_throw("--" + key) == nullptr) {
        throw CLI::ConfigError("config key '" + key + "' is not an option of " + sub->get_name());
      }
      CLI::ConfigItem item;
      item.parents = {sub->get_name()};
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  const CLI::App* app_;
};

int worker_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("BCNET_THREADS")) {
    try {
      n = std::clamp(std::stoi(env), 1, n);
    } catch (const std::exception&) {
      throw UsageError(std::string("BCNET_THREADS must be an integer, got '") + env + "'");
    }
  }
  return n;
}

void echo_config(const char* command, const json& cfg) {
  std::cerr << "config " << command << ' ' << cfg.dump() << '\n';
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
  double a = 0, b = 0;
  char comma = 0;
  std::istringstream is(text);
  if (!(is >> a >> comma >> b) || comma != ',' || !is.eof()) {
    throw UsageError(std::string(what) + " expects LO,HI, got '" + text + "'");
  }
  return {a, b};
}

Box parse_box(const std::string& text) {
  Box b;
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream is(text);
  if (!(is >> b.x0 >> c1 >> b.y0 >> c2 >> b.x1 >> c3 >> b.y1) || c1 != ',' || c2 != ',' || c3 != ',') {
    throw UsageError("box expects x0,y0,x1,y1, got '" + text + "'");
  }
  if (!(b.x1 > b.x0 && b.y1 > b.y0)) throw UsageError("box '" + text + "' is empty");
  return b;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError("output path " + dir.string() + " is not a directory");
    if (!fs::is_empty(dir) && !force) {
      throw UsageError("output directory " + dir.string() + " is not empty (use --force)");
    }
  }
  fs::create_directories(dir);
}

// ---- gen-data ----

struct GenArgs {
  std::string out;
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string overlap = "0,0.8";
  int canvas = 64;
  bool force = false;
};

void run_gen(const GenArgs& a) {
  SceneConfig cfg;
  cfg.seed = a.seed;
  cfg.canvas = a.canvas;
  std::tie(cfg.overlap_lo, cfg.overlap_hi) = parse_pair(a.overlap, "--overlap");
  cfg.validate();
  json echo = scene_config_to_json(cfg);
  echo["count"] = a.count;
  echo["out"] = a.out;
  echo_config("gen-data", echo);
  prepare_output_dir(a.out, a.force);
  generate_and_export(cfg, a.count, a.out, worker_threads());
  std::cout << "checksum " << dataset_checksum(a.out) << '\n';
}

// ---- train ----

struct TrainArgs {
  std::string data, out, log, resume;
  int iters = 3000;
  int batch = 16;
  double lr = 0.01;
  double momentum = 0.9;
  int warmup = 1000;
  std::uint64_t seed = 0;
  std::string variant = "bilayer-gcn";
  int channels = 16;
  bool no_guidance = false;
  bool no_occluder_contour = false;
  bool no_occluder_mask = false;
  int log_every = 50;
  int checkpoint_every = 500;
};

void write_loss_header(std::ostream& os) { os << "iter,total,occluder_b,occluder_m,occludee_b,occludee_m,lr\n"; }

void write_loss_row(std::ostream& os, const LossRecord& r) {
  char line[256];
  std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6g\n", r.iteration + 1, r.total,
                r.occluder_boundary, r.occluder_mask, r.occludee_boundary, r.occludee_mask, r.lr);
  os << line << std::flush;
}

void run_train(const TrainArgs& a) {
  const auto dataset = import_dataset(a.data);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".loss.csv") : fs::path(a.log);
  std::ofstream log(log_path);
  if (!log) throw Error("cannot write loss log " + log_path.string());
  write_loss_header(log);

  TrainHooks hooks;
  hooks.on_log = [&](const LossRecord& r) {
    write_loss_row(log, r);
    std::cerr << "iter " << r.iteration + 1 << " loss " << r.total << " lr " << r.lr << '\n';
  };
  hooks.on_checkpoint = [&](const Checkpoint& c) { save_checkpoint(a.out, c); };

  if (!a.resume.empty()) {
    auto ckpt = load_checkpoint(a.resume);
    ckpt.config.iterations = a.iters;
    echo_config("train", {{"data", a.data}, {"out", a.out}, {"resume", a.resume}, {"train", train_config_to_json(ckpt.config)}});
    Trainer trainer(ckpt, dataset.samples);
    train(trainer, hooks);
    return;
  }

  TrainConfig cfg;
  cfg.iterations = a.iters;
  cfg.batch = a.batch;
  cfg.lr = a.lr;
  cfg.momentum = a.momentum;
  cfg.warmup_iters = a.warmup;
  cfg.seed = a.seed;
  cfg.variant = HeadVariant::parse(a.variant);
  if (a.no_guidance) cfg.variant.guidance = false;
  cfg.channels = a.channels;
  cfg.log_every = a.log_every;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.set_occluder_modeling(!a.no_occluder_contour, !a.no_occluder_mask);
  cfg.validate();
  echo_config("train", {{"data", a.data}, {"out", a.out}, {"log", log_path.string()}, {"train", train_config_to_json(cfg)}});
  train(cfg, dataset.samples, hooks);
}

// ---- eval ----

struct EvalArgs {
  std::string data, ckpt;
  bool occluded_only = false;
  float threshold = 0.5f;
};

void run_eval(const EvalArgs& a) {
  echo_config("eval", {{"data", a.data}, {"ckpt", a.ckpt}, {"occluded_only", a.occluded_only}, {"threshold", a.threshold}});
  const auto ckpt = load_checkpoint(a.ckpt);
  auto dataset = import_dataset(a.data);
  if (a.occluded_only) {
    std::erase_if(dataset.samples, [](const OcclusionSample& s) { return s.overlap_ratio < kOccludedSplitRatio; });
    if (dataset.samples.empty()) throw UsageError("no sample in " + a.data + " reaches the occluded split ratio");
  }
  auto report = evaluate(head_from_checkpoint(ckpt), dataset.samples, a.threshold);
  report.loss_start = ckpt.loss_start;
  report.loss_end = ckpt.loss_end;
  std::cout << report.to_json().dump(2) << '\n';
}

// ---- ablate ----

struct AblateArgs {
  std::string train_dir, test_dir, grid = "structure", out;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds{0};
  int iters = 3000;
  int channels = 16;
};

void run_ablate(const AblateArgs& a) {
  std::vector<AblationSpec> specs;
  if (!a.variants.empty()) {
    for (const auto& v : a.variants) specs.push_back(AblationSpec::parse(v));
  } else if (a.grid == "structure") {
    specs = structure_operator_grid();
  } else if (a.grid == "occlusion") {
    specs = occlusion_modeling_grid();
  } else if (a.grid == "guidance") {
    specs = guidance_grid();
  } else {
    throw UsageError("unknown grid '" + a.grid + "' (structure, occlusion, guidance)");
  }
  TrainConfig base;
  base.iterations = a.iters;
  base.channels = a.channels;
  json labels = json::array();
  for (const auto& s : specs) labels.push_back(s.label);
  echo_config("ablate", {{"train", a.train_dir}, {"test", a.test_dir}, {"variants", labels}, {"seeds", a.seeds},
                         {"base", train_config_to_json(base)}});
  const auto train_set = import_dataset(a.train_dir);
  const auto test_set = import_dataset(a.test_dir);
  std::vector<AblationRow> rows;
  for (auto seed : a.seeds) {
    base.seed = seed;
    auto part = run_ablation(base, specs, train_set.samples, test_set.samples, [](const AblationRow& r) {
      std::cerr << "done " << r.spec.label << " seed " << r.seed << " occluded IoU " << r.report.occluded.mask_iou
                << " (" << r.seconds << " s)\n";
    });
    rows.insert(rows.end(), part.begin(), part.end());
  }
  std::cout << format_ablation_table(rows);
  if (!a.out.empty()) {
    std::ofstream os(a.out);
    if (!os) throw Error("cannot write " + a.out);
    os << ablation_to_json(rows).dump(2) << '\n';
  }
}

// ---- infer ----

struct InferArgs {
  std::string ckpt, image, out, boxes_file;
  std::vector<std::string> boxes;
  float threshold = 0.5f;
  bool force = false;
};

GrayImage as_gray(const BinaryMap& m) {
  GrayImage g{m.height, m.width, {}};
  g.pixels.resize(m.bits.size());
  for (std::size_t i = 0; i < m.bits.size(); ++i) g.pixels[i] = m.bits[i] ? 255 : 0;
  return g;
}

void run_infer(const InferArgs& a) {
  std::vector<std::string> box_text = a.boxes;
  if (!a.boxes_file.empty()) {
    std::ifstream is(a.boxes_file);
    if (!is) throw FormatError("cannot read box list " + a.boxes_file);
    for (std::string line; std::getline(is, line);) {
      if (!line.empty() && line.front() != '#') box_text.push_back(line);
    }
  }
  if (box_text.empty()) throw UsageError("infer needs at least one --box or a --boxes file");
  if (box_text.size() > kMaxBoxes) {
    std::cerr << "notice: " << box_text.size() << " boxes given, keeping the first " << kMaxBoxes << '\n';
    box_text.resize(kMaxBoxes);
  }
  echo_config("infer", {{"ckpt", a.ckpt}, {"image", a.image}, {"out", a.out}, {"boxes", box_text}, {"threshold", a.threshold}});

  const auto head = head_from_checkpoint(load_checkpoint(a.ckpt));
  const auto image = read_ppm(a.image);
  prepare_output_dir(a.out, a.force);
  const int size = head.config().crop_size();
  for (std::size_t i = 0; i < box_text.size(); ++i) {
    const Box requested = parse_box(box_text[i]);
    const Box box = clip_box(requested, image.width, image.height);
    if (box.x0 != requested.x0 || box.y0 != requested.y0 || box.x1 != requested.x1 || box.y1 != requested.y1) {
      std::cerr << "warning: box " << box_text[i] << " clipped to the " << image.width << "x" << image.height
                << " image\n";
    }
    if (!(box.area() > 0)) throw UsageError("box " + box_text[i] + " lies outside the image");
    NoGradGuard no_grad;
    const auto out = head.forward_image(crop_image(image, box, size), ForwardMode::kVisualize);
    const auto pred = predict_mask(out, a.threshold);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "roi_%02zu_", i);
    auto write = [&](const char* what, const GrayImage& g) {
      write_pgm(fs::path(a.out) / (std::string(stem) + what + ".pgm"), g);
    };
    if (out.occluder_boundary) write("occluder_boundary", heatmap(*out.occluder_boundary));
    if (out.occluder_mask) write("occluder_mask", heatmap(*out.occluder_mask));
    write("occludee_boundary", heatmap(out.occludee_boundary));
    write("occludee_mask", heatmap(out.occludee_mask));
    if (pred.has_occluder) write("occluder_mask_bin", as_gray(pred.occluder_mask));
    write("occludee_mask_bin", as_gray(pred.occludee_mask));
  }
  std::cout << "wrote " << box_text.size() << " roi(s) to " << a.out << '\n';
}

// ---- viz ----

struct VizArgs {
  std::string ckpt, sample, out;
  int tile = 112;
};

void run_viz(const VizArgs& a) {
  const auto slash = a.sample.find_last_of('/');
  if (slash == std::string::npos) throw UsageError("--sample expects DIR/idx, got '" + a.sample + "'");
  const fs::path dir = a.sample.substr(0, slash);
  std::size_t index = 0;
  try {
    index = std::stoul(a.sample.substr(slash + 1));
  } catch (const std::exception&) {
    throw UsageError("--sample expects DIR/idx, got '" + a.sample + "'");
  }
  echo_config("viz", {{"ckpt", a.ckpt}, {"dir", dir.string()}, {"index", index}, {"out", a.out}, {"tile", a.tile}});
  const auto head = head_from_checkpoint(load_checkpoint(a.ckpt));
  const auto dataset = import_dataset(dir);
  if (index >= dataset.samples.size()) {
    throw UsageError("sample index " + std::to_string(index) + " out of range (" +
                     std::to_string(dataset.samples.size()) + " samples)");
  }
  const auto roi = extract_roi(dataset.samples[index], head.config().crop_size());
  NoGradGuard no_grad;
  const auto out = head.forward_image(roi.image, ForwardMode::kVisualize);
  write_ppm(a.out, heatmap_panel(roi.image, out, a.tile));
  json stats = {{"panel", a.out}};
  if (out.occluder_mask) {
    const auto heat = heatmap(*out.occluder_mask);
    stats["occluder_heat_inside"] = region_mean(heat, roi.occluder_mask, true);
    stats["occluder_heat_outside"] = region_mean(heat, roi.occluder_mask, false);
  }
  std::cout << stats.dump() << '\n';
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const FormatError*>(&e)) return 3;
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 1;
}

const char* kind_of(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const GenerationError*>(&e)) return "generation";
  if (dynamic_cast<const SamplingError*>(&e)) return "sampling";
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return "io";
  return "internal";
}

void print_error(const char* kind, const std::string& message) {
  json line = {{"error", kind}, {"message", message}};
  std::cerr << line.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilayer occlusion-aware mask head: data, training, evaluation and inspection"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "JSON object of option values for the chosen subcommand; flags take precedence");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  auto with_config = [](CLI::App* sub) {
    sub->footer("Option values may also come from --config FILE.json, keyed by long option name.");
  };

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic occlusion dataset");
  with_config(gen_cmd);
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Base seed")->capture_default_str();
  gen_cmd->add_option("--overlap", gen.overlap, "Overlap ratio range LO,HI")->capture_default_str();
  gen_cmd->add_option("--canvas", gen.canvas, "Canvas side in pixels")->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "Allow writing into a non-empty directory");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a mask head on a dataset directory");
  with_config(train_cmd);
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", tr.log, "Loss CSV path (default <out>.loss.csv)");
  train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint");
  train_cmd->add_option("--iters", tr.iters, "Total iterations")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "ROIs per batch")->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Base learning rate")->capture_default_str();
  train_cmd->add_option("--momentum", tr.momentum, "SGD momentum")->capture_default_str();
  train_cmd->add_option("--warmup", tr.warmup, "Warm-up iterations")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Run seed")->capture_default_str();
  train_cmd->add_option("--variant", tr.variant, "bilayer-gcn | bilayer-fcn | single-gcn | single-fcn")
      ->capture_default_str();
  train_cmd->add_option("--channels", tr.channels, "Feature channels K")->capture_default_str();
  train_cmd->add_flag("--no-guidance", tr.no_guidance, "Hold the occluder-to-occludee fusion at zero");
  train_cmd->add_flag("--no-occluder-contour", tr.no_occluder_contour, "Drop occluder boundary supervision");
  train_cmd->add_flag("--no-occluder-mask", tr.no_occluder_mask, "Drop occluder mask supervision");
  train_cmd->add_option("--log-every", tr.log_every, "Iterations per CSV row")->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "Iterations between checkpoints")
      ->capture_default_str();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint; prints a JSON report");
  with_config(eval_cmd);
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint path")->required();
  eval_cmd->add_flag("--occluded-only", ev.occluded_only, "Keep only samples with overlap ratio >= 0.2");
  eval_cmd->add_option("--threshold", ev.threshold, "Mask probability threshold")->capture_default_str();

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate a grid of variants");
  with_config(ablate_cmd);
  ablate_cmd->add_option("--train", ab.train_dir, "Training dataset directory")->required();
  ablate_cmd->add_option("--test", ab.test_dir, "Test dataset directory")->required();
  ablate_cmd->add_option("--grid", ab.grid, "structure | occlusion | guidance")->capture_default_str();
  ablate_cmd->add_option("--variant", ab.variants, "Explicit variant spec, e.g. bilayer-gcn:no-occluder-modeling");
  ablate_cmd->add_option("--seeds", ab.seeds, "Seeds to repeat the grid with")->delimiter(',');
  ablate_cmd->add_option("--iters", ab.iters, "Iterations per run")->capture_default_str();
  ablate_cmd->add_option("--channels", ab.channels, "Feature channels K")->capture_default_str();
  ablate_cmd->add_option("--out", ab.out, "Write the rows as JSON");

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Predict masks for boxes on a PPM image");
  with_config(infer_cmd);
  infer_cmd->add_option("--ckpt", inf.ckpt, "Checkpoint path")->required();
  infer_cmd->add_option("--image", inf.image, "Input PPM")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--box", inf.boxes, "ROI x0,y0,x1,y1 (repeatable)");
  infer_cmd->add_option("--boxes", inf.boxes_file, "File with one x0,y0,x1,y1 per line")->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", inf.out, "Output directory")->required();
  infer_cmd->add_option("--threshold", inf.threshold, "Mask probability threshold")->capture_default_str();
  infer_cmd->add_flag("--force", inf.force, "Allow writing into a non-empty directory");

  VizArgs vz;
  auto* viz_cmd = app.add_subcommand("viz", "Write a heatmap panel for one dataset sample");
  with_config(viz_cmd);
  viz_cmd->add_option("--ckpt", vz.ckpt, "Checkpoint path")->required();
  viz_cmd->add_option("--sample", vz.sample, "DIR/idx")->required();
  viz_cmd->add_option("--out", vz.out, "Output PPM")->required();
  viz_cmd->add_option("--tile", vz.tile, "Tile side in pixels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*gen_cmd) run_gen(gen);
    if (*train_cmd) run_train(tr);
    if (*eval_cmd) run_eval(ev);
    if (*ablate_cmd) run_ablate(ab);
    if (*infer_cmd) run_infer(inf);
    if (*viz_cmd) run_viz(vz);
  } catch (const std::exception& e) {
    print_error(kind_of(e), e.what());
    return exit_code_for(e);
  }
  return 0;
}
