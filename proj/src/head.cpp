#include "bcnet/head.hpp"

#include <cmath>

#include "bcnet/errors.hpp"
#include "bcnet/ops.hpp"
#include "bcnet/random.hpp"

namespace bcnet {

std::string HeadVariant::name() const {
  std::string s = bilayer() ? "bilayer-" : "single-";
  s += gcn() ? "gcn" : "fcn";
  return s;
}

HeadVariant HeadVariant::parse(std::string_view name) {
  HeadVariant v;
  if (name == "bilayer-gcn") {
  } else if (name == "bilayer-fcn") {
    v.op = Operator::kFcn;
  } else if (name == "single-gcn") {
    v.structure = Structure::kSingle;
  } else if (name == "single-fcn") {
    v.structure = Structure::kSingle;
    v.op = Operator::kFcn;
  } else {
    throw UsageError("unknown head variant '" + std::string(name) +
                     "' (expected bilayer-gcn, bilayer-fcn, single-gcn or single-fcn)");
  }
  return v;
}

void HeadConfig::validate() const {
  if (channels < 1 || roi_size < 1 || image_channels < 1) throw UsageError("head config: sizes must be positive");
  if (embed() < 1) throw UsageError("head config: embedding width must be positive");
}

template <typename T>
BasicTensor<T> conv_same(const Conv<T>& conv, const BasicTensor<T>& x) {
  const int k = static_cast<int>(conv.weight.dim(0));
  return ops::conv2d(x, conv.weight, conv.bias, 1, k / 2);
}

template <typename T>
BasicTensor<T> relational_block(const BranchParams<T>& p, const BasicTensor<T>& x) {
  const std::size_t h = x.dim(0), w = x.dim(1);
  if (p.gcn) {
    return ops::unflatten_spatial(gcn_forward(*p.gcn, ops::flatten_spatial(x)), h, w);
  }
  if (!p.local) throw UsageError("branch has neither a graph layer nor a local layer");
  // Same normalization and residual as the graph layer, 3x3 neighborhood only.
  auto y = ops::layer_norm(ops::flatten_spatial(conv_same(*p.local, x)));
  return ops::add(ops::unflatten_spatial(ops::relu(y), h, w), x);
}

template <typename T>
BranchOutput<T> occluder_branch(const BranchParams<T>& p, const BasicTensor<T>& x_roi, bool with_heads) {
  if (x_roi.rank() != 3 || x_roi.dim(0) != x_roi.dim(1)) {
    throw DimensionError("ROI feature must be square [H, W, K], got " + shape_to_string(x_roi.shape()));
  }
  auto h = ops::relu(conv_same(p.pre_conv, x_roi));
  auto z = relational_block(p, h);
  auto f = ops::relu(conv_same(p.fcn2, ops::relu(conv_same(p.fcn1, z))));
  BranchOutput<T> out{f, {}, {}};
  if (with_heads) {
    auto up = ops::bilinear_upsample2x(f);
    out.boundary = conv_same(p.boundary_head, up);
    out.mask = conv_same(p.mask_head, up);
  }
  return out;
}

template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& z0, const BasicTensor<T>& x_roi, const FusionParams<T>& fp) {
  if (z0.shape() != x_roi.shape()) {
    throw DimensionError("fuse: occluder feature " + shape_to_string(z0.shape()) + " vs ROI feature " +
                         shape_to_string(x_roi.shape()));
  }
  return ops::add(conv_same(fp.w_f0, z0), x_roi);
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> occludee_branch(const BranchParams<T>& p, const BasicTensor<T>& x_f) {
  auto out = occluder_branch(p, x_f, true);
  return {out.boundary, out.mask};
}

namespace {

template <typename T>
BasicTensor<T> kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return BasicTensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
void add_conv(ParameterSet<T>& ps, const std::string& prefix, std::size_t k, std::size_t cin, std::size_t cout,
              Rng& rng, bool zero = false) {
  auto w = zero ? BasicTensor<T>::zeros({k, k, cin, cout}, true) : kaiming_uniform<T>({k, k, cin, cout}, k * k * cin, rng);
  ps.add(prefix + ".weight", std::move(w));
  ps.add(prefix + ".bias", BasicTensor<T>::zeros({cout}, true));
}

template <typename T>
void add_branch(ParameterSet<T>& ps, const std::string& prefix, const HeadConfig& cfg, Rng& rng) {
  const auto k = static_cast<std::size_t>(cfg.channels);
  const auto e = static_cast<std::size_t>(cfg.embed());
  add_conv(ps, prefix + ".pre_conv", 3, k, k, rng);
  if (cfg.variant.gcn()) {
    ps.add(prefix + ".gcn.theta.weight", kaiming_uniform<T>({k, e}, k, rng));
    ps.add(prefix + ".gcn.theta.bias", BasicTensor<T>::zeros({e}, true));
    ps.add(prefix + ".gcn.phi.weight", kaiming_uniform<T>({k, e}, k, rng));
    ps.add(prefix + ".gcn.phi.bias", BasicTensor<T>::zeros({e}, true));
    ps.add(prefix + ".gcn.w_g", kaiming_uniform<T>({k, k}, k, rng));
  } else {
    add_conv(ps, prefix + ".local", 3, k, k, rng);
  }
  add_conv(ps, prefix + ".fcn1", 3, k, k, rng);
  add_conv(ps, prefix + ".fcn2", 3, k, k, rng);
  add_conv(ps, prefix + ".boundary_head", 1, k, 1, rng);
  add_conv(ps, prefix + ".mask_head", 1, k, 1, rng);
}

template <typename T>
Conv<T> get_conv(const ParameterSet<T>& ps, const std::string& prefix) {
  return {ps.at(prefix + ".weight"), ps.at(prefix + ".bias")};
}

template <typename T>
BranchParams<T> get_branch(const ParameterSet<T>& ps, const std::string& prefix, const HeadConfig& cfg) {
  BranchParams<T> b;
  b.pre_conv = get_conv(ps, prefix + ".pre_conv");
  if (cfg.variant.gcn()) {
    NonLocalBlock<T> g{ps.at(prefix + ".gcn.theta.weight"), ps.at(prefix + ".gcn.theta.bias"),
                       ps.at(prefix + ".gcn.phi.weight"), ps.at(prefix + ".gcn.phi.bias"),
                       ps.at(prefix + ".gcn.w_g")};
    g.validate();
    b.gcn = std::move(g);
  } else {
    b.local = get_conv(ps, prefix + ".local");
  }
  b.fcn1 = get_conv(ps, prefix + ".fcn1");
  b.fcn2 = get_conv(ps, prefix + ".fcn2");
  b.boundary_head = get_conv(ps, prefix + ".boundary_head");
  b.mask_head = get_conv(ps, prefix + ".mask_head");
  return b;
}

constexpr std::string_view kFusionWeight = "fusion.w_f0.weight";
constexpr std::string_view kFusionBias = "fusion.w_f0.bias";

}  // namespace

template <typename T>
BilayerHead<T> BilayerHead<T>::init(const HeadConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterSet<T> ps;
  const auto k = static_cast<std::size_t>(config.channels);
  if (config.stem) {
    add_conv(ps, "stem.conv1", 3, static_cast<std::size_t>(config.image_channels), k, rng);
    add_conv(ps, "stem.conv2", 3, k, k, rng);
  }
  if (config.variant.bilayer()) {
    add_branch(ps, "occluder", config, rng);
    add_conv(ps, "fusion.w_f0", 1, k, k, rng, !config.variant.guidance);
  }
  add_branch(ps, "occludee", config, rng);
  return bind(config, std::move(ps));
}

template <typename T>
BilayerHead<T> BilayerHead<T>::bind(const HeadConfig& config, ParameterSet<T> params) {
  config.validate();
  BilayerHead head;
  head.config_ = config;
  if (config.stem) {
    head.stem1_ = get_conv(params, "stem.conv1");
    head.stem2_ = get_conv(params, "stem.conv2");
  }
  if (config.variant.bilayer()) {
    head.occluder_ = get_branch(params, "occluder", config);
    head.fusion_ = FusionParams<T>{get_conv(params, "fusion.w_f0")};
  }
  head.occludee_ = get_branch(params, "occludee", config);
  for (auto& [name, t] : params.entries()) {
    if (head.is_frozen(name)) t.set_requires_grad(false);
  }
  head.params_ = std::move(params);
  return head;
}

template <typename T>
bool BilayerHead<T>::is_frozen(std::string_view name) const {
  return config_.variant.bilayer() && !config_.variant.guidance && (name == kFusionWeight || name == kFusionBias);
}

template <typename T>
BasicTensor<T> BilayerHead<T>::stem_forward(const BasicTensor<T>& crop) const {
  if (!stem1_) throw UsageError("this head was configured without a stem");
  const auto s = static_cast<std::size_t>(config_.crop_size());
  if (crop.rank() != 3 || crop.dim(0) != s || crop.dim(1) != s ||
      crop.dim(2) != static_cast<std::size_t>(config_.image_channels)) {
    throw DimensionError("stem expects a " + std::to_string(s) + "x" + std::to_string(s) + "x" +
                         std::to_string(config_.image_channels) + " crop, got " + shape_to_string(crop.shape()));
  }
  auto h = ops::relu(conv_same(*stem1_, crop));
  return ops::relu(ops::conv2d(h, stem2_->weight, stem2_->bias, 2, 1));
}

template <typename T>
BilayerOutput<T> BilayerHead<T>::forward(const BasicTensor<T>& x_roi, ForwardMode mode) const {
  const auto r = static_cast<std::size_t>(config_.roi_size);
  const auto k = static_cast<std::size_t>(config_.channels);
  if (x_roi.rank() != 3 || x_roi.dim(0) != r || x_roi.dim(1) != r || x_roi.dim(2) != k) {
    throw DimensionError("head expects X_roi of " + shape_to_string({r, r, k}) + ", got " +
                         shape_to_string(x_roi.shape()));
  }
  BilayerOutput<T> out;
  BasicTensor<T> x_f = x_roi;
  if (occluder_) {
    auto occ = occluder_branch(*occluder_, x_roi, mode != ForwardMode::kInference);
    if (mode != ForwardMode::kInference) {
      out.occluder_boundary = occ.boundary;
      out.occluder_mask = occ.mask;
    }
    x_f = fuse(occ.feature, x_roi, *fusion_);
  }
  auto [boundary, mask] = occludee_branch(occludee_, x_f);
  out.occludee_boundary = boundary;
  out.occludee_mask = mask;
  return out;
}

template <typename T>
BilayerOutput<T> BilayerHead<T>::forward_image(const BasicTensor<T>& crop, ForwardMode mode) const {
  return forward(stem_forward(crop), mode);
}

template BasicTensor<float> conv_same(const Conv<float>&, const BasicTensor<float>&);
template BasicTensor<double> conv_same(const Conv<double>&, const BasicTensor<double>&);
template BasicTensor<float> relational_block(const BranchParams<float>&, const BasicTensor<float>&);
template BasicTensor<double> relational_block(const BranchParams<double>&, const BasicTensor<double>&);
template BranchOutput<float> occluder_branch(const BranchParams<float>&, const BasicTensor<float>&, bool);
template BranchOutput<double> occluder_branch(const BranchParams<double>&, const BasicTensor<double>&, bool);
template BasicTensor<float> fuse(const BasicTensor<float>&, const BasicTensor<float>&, const FusionParams<float>&);
template BasicTensor<double> fuse(const BasicTensor<double>&, const BasicTensor<double>&,
                                  const FusionParams<double>&);
template std::pair<BasicTensor<float>, BasicTensor<float>> occludee_branch(const BranchParams<float>&,
                                                                           const BasicTensor<float>&);
template std::pair<BasicTensor<double>, BasicTensor<double>> occludee_branch(const BranchParams<double>&,
                                                                             const BasicTensor<double>&);
template class BilayerHead<float>;
template class BilayerHead<double>;

}  // namespace bcnet
