#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bcnet/ablation.hpp"
#include "bcnet/dataset_io.hpp"
#include "bcnet/errors.hpp"
#include "bcnet/evaluate.hpp"
#include "bcnet/mask.hpp"
#include "bcnet/predict.hpp"
#include "bcnet/roi.hpp"
#include "bcnet/train.hpp"

namespace py = pybind11;
using namespace bcnet;

namespace {

// JSON crosses the boundary as text so Python gets plain dicts and lists.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<bool> mask_array(const BinaryMap& m) {
  py::array_t<bool> a({m.height, m.width});
  auto v = a.mutable_unchecked<2>();
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) v(y, x) = m.at(y, x) != 0;
  return a;
}

BinaryMap mask_from(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw DimensionError("mask must be a 2-D array");
  BinaryMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.bits.begin());
  return m;
}

py::array_t<float> image_array(const Image& img) {
  py::array_t<float> a({img.height, img.width, img.channels});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

py::array_t<float> tensor_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> a(shape);
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

Tensor tensor_from(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

py::dict sample_dict(const OcclusionSample& s) {
  py::dict d;
  d["image"] = image_array(s.image);
  d["occluder_amodal"] = mask_array(s.occluder_amodal);
  d["occluder_modal"] = mask_array(s.occluder_modal);
  d["occludee_amodal"] = mask_array(s.occludee_amodal);
  d["occludee_modal"] = mask_array(s.occludee_modal);
  d["roi_box"] = py::make_tuple(s.roi_box.x0, s.roi_box.y0, s.roi_box.x1, s.roi_box.y1);
  d["overlap_ratio"] = s.overlap_ratio;
  d["is_occluded"] = s.is_occluded;
  d["seed"] = s.seed;
  return d;
}

py::dict output_dict(const BilayerOutput<float>& out) {
  py::dict d;
  if (out.occluder_boundary) d["occluder_boundary"] = tensor_array(*out.occluder_boundary);
  if (out.occluder_mask) d["occluder_mask"] = tensor_array(*out.occluder_mask);
  d["occludee_boundary"] = tensor_array(out.occludee_boundary);
  d["occludee_mask"] = tensor_array(out.occludee_mask);
  return d;
}

SceneConfig scene_config(std::uint64_t seed, std::pair<double, double> overlap, int canvas) {
  SceneConfig c;
  c.seed = seed;
  c.overlap_lo = overlap.first;
  c.overlap_hi = overlap.second;
  c.canvas = canvas;
  c.validate();
  return c;
}

std::vector<OcclusionSample> samples_from(const py::object& data) {
  if (py::isinstance<py::str>(data) || py::hasattr(data, "__fspath__")) {
    return import_dataset(data.cast<std::filesystem::path>()).samples;
  }
  return data.cast<std::vector<OcclusionSample>>();
}

/// A trained head loaded from a checkpoint file.
class Model {
 public:
  explicit Model(const std::filesystem::path& path) : ckpt_(load_checkpoint(path)), head_(head_from_checkpoint(ckpt_)) {}

  int crop_size() const { return head_.config().crop_size(); }
  std::string variant() const { return head_.config().variant.name(); }
  py::object config() const { return to_py(train_config_to_json(ckpt_.config)); }
  int iteration() const { return ckpt_.iteration; }

  py::dict forward(const py::array_t<float, py::array::c_style | py::array::forcecast>& crop) const {
    const Tensor x = tensor_from(crop);
    NoGradGuard no_grad;
    return output_dict(head_.forward_image(x, ForwardMode::kVisualize));
  }

  py::dict predict(const py::array_t<float, py::array::c_style | py::array::forcecast>& crop, float threshold) const {
    const Tensor x = tensor_from(crop);
    NoGradGuard no_grad;
    const auto p = predict_mask(head_.forward_image(x, ForwardMode::kVisualize), threshold);
    py::dict d;
    d["occludee_mask"] = mask_array(p.occludee_mask);
    d["occludee_boundary"] = mask_array(p.occludee_boundary);
    if (p.has_occluder) {
      d["occluder_mask"] = mask_array(p.occluder_mask);
      d["occluder_boundary"] = mask_array(p.occluder_boundary);
      d["occlusion_boundary"] = mask_array(p.occlusion_boundary);
    }
    return d;
  }

  py::object evaluate(const py::object& data, float threshold) const {
    const auto samples = samples_from(data);
    py::gil_scoped_release release;
    auto report = bcnet::evaluate(head_, samples, threshold);
    report.loss_start = ckpt_.loss_start;
    report.loss_end = ckpt_.loss_end;
    py::gil_scoped_acquire acquire;
    return to_py(report.to_json());
  }

 private:
  Checkpoint ckpt_;
  BilayerHead<float> head_;
};

}  // namespace

PYBIND11_MODULE(_bcnet, m) {
  m.doc() = "Bilayer occlusion-aware mask head";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<GenerationError>(m, "GenerationError", base.ptr());
  py::register_exception<SamplingError>(m, "SamplingError", base.ptr());

  py::class_<OcclusionSample>(m, "Sample")
      .def_property_readonly("overlap_ratio", [](const OcclusionSample& s) { return s.overlap_ratio; })
      .def_property_readonly("is_occluded", [](const OcclusionSample& s) { return s.is_occluded; })
      .def_property_readonly("image", [](const OcclusionSample& s) { return image_array(s.image); })
      .def_property_readonly("occludee_modal", [](const OcclusionSample& s) { return mask_array(s.occludee_modal); })
      .def("to_dict", &sample_dict)
      .def("roi", [](const OcclusionSample& s, int size) {
        const auto r = extract_roi(s, size);
        return py::make_tuple(tensor_array(r.image), mask_array(r.occluder_mask), mask_array(r.occludee_modal));
      }, py::arg("size") = 28);

  m.def(
      "generate",
      [](std::size_t count, std::uint64_t seed, std::pair<double, double> overlap, int canvas) {
        const auto cfg = scene_config(seed, overlap, canvas);
        py::gil_scoped_release release;
        return generate_dataset(cfg, count);
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("overlap") = std::pair{0.0, 0.8}, py::arg("canvas") = 64,
      "Generate synthetic occlusion samples in memory.");

  m.def(
      "generate_to",
      [](const std::filesystem::path& dir, std::size_t count, std::uint64_t seed, std::pair<double, double> overlap,
         int canvas) {
        const auto cfg = scene_config(seed, overlap, canvas);
        py::gil_scoped_release release;
        generate_and_export(cfg, count, dir);
        return dataset_checksum(dir);
      },
      py::arg("dir"), py::arg("count"), py::arg("seed") = 0, py::arg("overlap") = std::pair{0.0, 0.8},
      py::arg("canvas") = 64, "Write a dataset directory; returns its checksum.");

  m.def("load_dataset", [](const std::filesystem::path& dir) { return import_dataset(dir).samples; });
  m.def("dataset_checksum", &dataset_checksum);

  m.def("boundary_from_mask", [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
                                 int thickness) { return mask_array(boundary_from_mask(mask_from(a), thickness)); },
        py::arg("mask"), py::arg("thickness") = 1);
  m.def("mask_iou", [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& a,
                       const py::array_t<bool, py::array::c_style | py::array::forcecast>& b) {
    return mask_iou(mask_from(a), mask_from(b));
  });
  m.def("average_precision", [](const std::vector<std::pair<double, double>>& scored, double threshold,
                                std::size_t num_ground_truth) {
    std::vector<RoiPrediction> p;
    for (const auto& [score, iou] : scored) p.push_back({score, iou});
    return average_precision(p, threshold, num_ground_truth);
  }, py::arg("predictions"), py::arg("iou_threshold"), py::arg("num_ground_truth"),
        "predictions: (score, iou) pairs.");

  m.def("default_train_config", [] { return to_py(train_config_to_json(TrainConfig{})); });
  m.def("lr_at", [](const py::dict& cfg, int iteration) {
    return lr_at(train_config_from_json(from_py(cfg)), iteration);
  });

  m.def(
      "train",
      [](const py::object& data, const std::filesystem::path& out, const py::dict& overrides) {
        auto cfg = train_config_from_json(from_py(overrides));
        cfg.validate();
        const auto samples = samples_from(data);
        std::vector<double> totals;
        {
          py::gil_scoped_release release;
          const auto result = train(cfg, samples);
          save_checkpoint(out, result.checkpoint);
          for (const auto& r : result.trace) totals.push_back(r.total);
        }
        return totals;
      },
      py::arg("data"), py::arg("out"), py::arg("config") = py::dict(),
      "Train on a dataset directory or a list of samples, save the checkpoint to `out`, return per-iteration "
      "total losses. `config` overrides keys of default_train_config().");

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def_property_readonly("crop_size", &Model::crop_size)
      .def_property_readonly("variant", &Model::variant)
      .def_property_readonly("config", &Model::config)
      .def_property_readonly("iteration", &Model::iteration)
      .def("forward", &Model::forward, py::arg("crop"), "Logit maps for one [S, S, 3] crop.")
      .def("predict", &Model::predict, py::arg("crop"), py::arg("threshold") = 0.5f)
      .def("evaluate", &Model::evaluate, py::arg("data"), py::arg("threshold") = 0.5f);
}
