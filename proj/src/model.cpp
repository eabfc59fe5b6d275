#include "tlnet/model.hpp"

#include <random>

#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"

namespace tlnet {

namespace {

constexpr double kInitStd = 0.02;

struct ArchInfo {
  Arch arch;
  std::string_view name;
};

constexpr ArchInfo kArchs[] = {
    {Arch::ft_svd, "ft_svd"},           {Arch::ft_matrix, "ft_matrix"},
    {Arch::ft_conv, "ft_conv"},         {Arch::conv_svd, "conv_svd"},
    {Arch::ft_only, "ft_only"},         {Arch::svd_only, "svd_only"},
    {Arch::matrix_only, "matrix_only"}, {Arch::conv_only, "conv_only"},
};

bool hidden_has_ft(Arch a) {
  return a == Arch::ft_svd || a == Arch::ft_matrix || a == Arch::ft_conv || a == Arch::ft_only;
}
bool hidden_has_svd(Arch a) {
  return a == Arch::ft_svd || a == Arch::conv_svd || a == Arch::svd_only;
}
bool hidden_has_matrix(Arch a) { return a == Arch::ft_matrix || a == Arch::matrix_only; }
bool hidden_has_conv(Arch a) {
  return a == Arch::ft_conv || a == Arch::conv_svd || a == Arch::conv_only;
}

enum class OutputKind { ft, conv_projection, matrix, svd_crop };

OutputKind output_kind(Arch a) {
  switch (a) {
    case Arch::conv_svd:
    case Arch::conv_only: return OutputKind::conv_projection;
    case Arch::matrix_only: return OutputKind::matrix;
    case Arch::svd_only: return OutputKind::svd_crop;
    default: return OutputKind::ft;
  }
}

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed), normal_(0.0, kInitStd) {}

  Tensor noise(Shape shape) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = normal_(rng_);
    return t;
  }
  Tensor plus_noise(Tensor t) {
    for (double& v : t.data()) v += normal_(rng_);
    return t;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

std::string layer_name(std::size_t layer, std::string_view rest) {
  return "layer" + std::to_string(layer) + "." + std::string(rest);
}

}  // namespace

Arch parse_arch(std::string_view name) {
  for (const auto& a : kArchs) {
    if (a.name == name) return a.arch;
  }
  throw ValidationError("unknown arch '" + std::string(name) + "'");
}

std::string_view to_string(Arch arch) {
  for (const auto& a : kArchs) {
    if (a.arch == arch) return a.name;
  }
  return "?";
}

const std::vector<Arch>& all_archs() {
  static const std::vector<Arch> archs = [] {
    std::vector<Arch> v;
    for (const auto& a : kArchs) v.push_back(a.arch);
    return v;
  }();
  return archs;
}

LossKind parse_loss(std::string_view name) {
  if (name == "mse") return LossKind::mse;
  if (name == "mae") return LossKind::mae;
  throw ValidationError("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::mse ? "mse" : "mae"; }

void ModelConfig::validate() const {
  if (layers < 2) throw ValidationError("layers: must be >= 2, got " + std::to_string(layers));
  if (channels < 1) throw ValidationError("channels: must be >= 1");
  if (input_len < 2) throw ValidationError("input_len: must be >= 2");
  if (pred_len < 1) throw ValidationError("pred_len: must be >= 1");
  if (expand_univariate && channels != 1) {
    throw ValidationError("expand_univariate: requires channels == 1");
  }
  if (conv_kernel % 2 == 0 || conv_kernel > input_len) {
    throw ValidationError("conv_kernel: must be odd and <= input_len");
  }
  if (hidden_has_svd(arch) && width() > input_len) {
    throw ValidationError("channels: svd blocks need channels <= input_len");
  }
  if (arch == Arch::svd_only && pred_len > input_len) {
    throw ValidationError("pred_len: svd_only crops its output and needs pred_len <= input_len");
  }
  for (std::size_t w : mask.band_widths) {
    if (w % 2 == 0) throw ValidationError("mask.band_widths: widths must be odd");
  }
  if (mask.band_widths.empty() && mask.global_rows == 0) {
    throw ValidationError("mask: needs at least one band or global row");
  }
}

void ParameterSet::add(std::string name, Tensor value) {
  if (contains(name)) throw ValidationError("duplicate parameter '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

std::size_t ParameterSet::index(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParameterSet::element_count() const {
  std::size_t total = 0;
  for (const auto& v : values_) total += v.size();
  return total;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Initializer init(cfg_.seed);
  const std::size_t d = cfg_.width();
  const std::size_t t = cfg_.input_len;
  const std::size_t tau = cfg_.pred_len;
  const std::size_t k = cfg_.conv_kernel;

  if (cfg_.expand_univariate) {
    params_.add("expand.kernels", init.plus_noise(blocks::delta_kernels(4, 1, k)));
  }
  for (std::size_t l = 0; l + 1 < cfg_.layers; ++l) {
    if (hidden_has_ft(cfg_.arch)) {
      auto ft = blocks::FtBlockParams::identity(d, t, t);
      params_.add(layer_name(l, "ft.w_re"), init.plus_noise(std::move(ft.w_re)));
      params_.add(layer_name(l, "ft.w_im"), init.plus_noise(std::move(ft.w_im)));
    }
    if (hidden_has_svd(cfg_.arch)) params_.add(layer_name(l, "svd.phi"), init.noise({d, t}));
    if (hidden_has_matrix(cfg_.arch)) {
      const std::string name = layer_name(l, "matrix.phi");
      params_.add(name, init.noise({t, t}));
      masks_.emplace_back(name, blocks::build_default_mask(t, t, cfg_.mask.band_widths,
                                                           std::min(cfg_.mask.global_rows, t)));
    }
    if (hidden_has_conv(cfg_.arch)) params_.add(layer_name(l, "conv.kernels"), init.noise({d, d, k}));
  }
  switch (output_kind(cfg_.arch)) {
    case OutputKind::ft: {
      auto ft = blocks::FtBlockParams::identity(d, t, tau);
      params_.add("out.ft.w_re", init.plus_noise(std::move(ft.w_re)));
      params_.add("out.ft.w_im", init.plus_noise(std::move(ft.w_im)));
      break;
    }
    case OutputKind::conv_projection:
      params_.add("out.conv.kernels", init.plus_noise(blocks::delta_kernels(d, d, k)));
      params_.add("out.proj", init.noise({tau, t}));
      break;
    case OutputKind::matrix:
      params_.add("out.matrix.phi", init.noise({tau, t}));
      masks_.emplace_back("out.matrix.phi",
                          blocks::build_default_mask(tau, t, cfg_.mask.band_widths,
                                                     std::min(cfg_.mask.global_rows, tau)));
      break;
    case OutputKind::svd_crop:
      params_.add("out.svd.phi", init.noise({d, t}));
      break;
  }
  if (cfg_.expand_univariate) {
    Tensor readout({1, 4, 1});
    readout[0] = 1.0;
    params_.add("readout", init.plus_noise(std::move(readout)));
  }
}

std::vector<Var> Model::bind(Graph& g, bool requires_grad) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) vars.push_back(g.leaf(params_[i], requires_grad));
  return vars;
}

const Var& Model::param(const std::vector<Var>& bound, std::string_view name) const {
  return bound.at(params_.index(name));
}

const Tensor& Model::mask_for(std::string_view param_name) const {
  for (const auto& [name, mask] : masks_) {
    if (name == param_name) return mask;
  }
  throw ValidationError("no mask for parameter '" + std::string(param_name) + "'");
}

Var Model::hidden_layer(std::size_t layer, const std::vector<Var>& bound, const Var& x) const {
  const std::size_t t = cfg_.input_len;
  auto ft = [&] {
    return blocks::ft_block_forward(x, param(bound, layer_name(layer, "ft.w_re")),
                                    param(bound, layer_name(layer, "ft.w_im")), t);
  };
  auto svd = [&] {
    return blocks::svd_block_forward(x, param(bound, layer_name(layer, "svd.phi")), cfg_.activation);
  };
  auto matrix = [&] {
    const std::string name = layer_name(layer, "matrix.phi");
    return blocks::sparse_matrix_forward(x, param(bound, name), mask_for(name));
  };
  auto conv = [&] {
    return blocks::conv_block_forward(x, param(bound, layer_name(layer, "conv.kernels")));
  };
  switch (cfg_.arch) {
    case Arch::ft_svd: return ops::add(ft(), svd());
    case Arch::ft_matrix: return ops::add(ft(), matrix());
    case Arch::ft_conv: return ops::add(ft(), conv());
    case Arch::conv_svd: return ops::add(conv(), svd());
    case Arch::ft_only: return ft();
    case Arch::svd_only: return svd();
    case Arch::matrix_only: return matrix();
    case Arch::conv_only: return conv();
  }
  throw ValidationError("unhandled arch");
}

Var Model::output_layer(const std::vector<Var>& bound, const Var& x) const {
  const std::size_t t = cfg_.input_len;
  const std::size_t tau = cfg_.pred_len;
  switch (output_kind(cfg_.arch)) {
    case OutputKind::ft:
      return blocks::ft_block_forward(x, param(bound, "out.ft.w_re"), param(bound, "out.ft.w_im"), tau);
    case OutputKind::conv_projection: {
      const Var h = blocks::conv_block_forward(x, param(bound, "out.conv.kernels"));
      const Shape& hs = h.shape();
      const std::size_t rows = h.value().size() / t;
      const Var y = ops::matmul(ops::reshape(h, {rows, t}), ops::transpose(param(bound, "out.proj")));
      return ops::reshape(y, {hs[0], hs[1], tau});
    }
    case OutputKind::matrix:
      return blocks::sparse_matrix_forward(x, param(bound, "out.matrix.phi"),
                                           mask_for("out.matrix.phi"));
    case OutputKind::svd_crop: {
      // No activation on the output layer, as for every other arch.
      const Var h = blocks::svd_block_product(x, param(bound, "out.svd.phi"));
      return ops::narrow_last(h, t - tau, tau);
    }
  }
  throw ValidationError("unhandled output layer");
}

Var Model::forward(const std::vector<Var>& bound, const Var& x) const {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xs[1] != cfg_.channels || xs[2] != cfg_.input_len) {
    throw DimensionError("model expects (B, " + std::to_string(cfg_.channels) + ", " +
                         std::to_string(cfg_.input_len) + "), got " + shape_str(xs));
  }
  if (bound.size() != params_.size()) throw StateError("bound parameters do not match the model");
  Var h = x;
  if (cfg_.expand_univariate) h = expand_univariate(h, param(bound, "expand.kernels"));
  for (std::size_t l = 0; l + 1 < cfg_.layers; ++l) h = hidden_layer(l, bound, h);
  h = output_layer(bound, h);
  if (cfg_.expand_univariate) {
    h = ops::conv1d(h, param(bound, "readout"), ops::ConvMode::same_zero_pad);
  }
  return h;
}

Tensor Model::predict(const Tensor& x) const {
  Graph g(false);
  const auto bound = bind(g, false);
  return forward(bound, g.leaf(x)).value();
}

Var loss(const Var& pred, const Var& target, LossKind kind) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  const Var diff = ops::sub(pred, target);
  return kind == LossKind::mse ? ops::mean(ops::mul(diff, diff)) : ops::mean(ops::abs(diff));
}

Var expand_univariate(const Var& x, const Var& kernels) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 || xs[1] != 1) {
    throw ValidationError("expand_univariate expects (B, 1, T), got " + shape_str(xs));
  }
  const Shape& ks = kernels.shape();
  if (ks.size() != 3 || ks[0] != 4 || ks[1] != 1) {
    throw DimensionError("expand_univariate kernels must be (4, 1, K), got " + shape_str(ks));
  }
  return ops::conv1d(x, kernels, ops::ConvMode::same_zero_pad);
}

}  // namespace tlnet
