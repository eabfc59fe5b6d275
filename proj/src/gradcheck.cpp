#include "tlnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "tlnet/blocks.hpp"
#include "tlnet/error.hpp"
#include "tlnet/linalg.hpp"
#include "tlnet/ops.hpp"

namespace tlnet::gradcheck {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor>& inputs) {
  Graph g(false);
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t));
  return build(leaves).value().item();
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

// Redraws until the squared singular values are separated.
Tensor gapped_matrix(std::mt19937_64& rng, Shape shape, double stddev = 1.0) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Tensor t = random_tensor(rng, shape, stddev);
    if (min_squared_gap(t) > 1e-3) return t;
  }
  throw NumericError("could not draw a matrix with separated singular values");
}

// Random linear functional of `out`, so every output element reaches the loss
// with a distinct weight.
Var project(const Var& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Var r = out.graph().leaf(random_tensor(rng, out.shape()));
  return ops::sum(ops::mul(out, r));
}

}  // namespace

double min_squared_gap(const Tensor& x) {
  const linalg::SvdFactors f = linalg::svd(x);
  double gap = INFINITY;
  for (std::size_t i = 0; i + 1 < f.s.size(); ++i) {
    gap = std::min(gap, f.s[i] * f.s[i] - f.s[i + 1] * f.s[i + 1]);
  }
  return gap;
}

Result check(const std::string& name, const LossBuilder& build, const std::vector<Tensor>& inputs,
             const Options& options, std::vector<std::size_t> differentiate) {
  if (differentiate.empty()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) differentiate.push_back(i);
  }
  Graph g(true);
  std::vector<Var> leaves;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const bool wanted = std::find(differentiate.begin(), differentiate.end(), i) != differentiate.end();
    leaves.push_back(g.leaf(inputs[i], wanted));
  }
  Gradients grads = g.backward(build(leaves));

  Result r;
  r.name = name;
  r.pass = true;
  std::vector<Tensor> work = inputs;
  for (std::size_t i : differentiate) {
    const Tensor& analytic = grads[leaves[i]];
    for (std::size_t j = 0; j < work[i].size(); ++j) {
      const double orig = work[i][j];
      work[i][j] = orig + options.step;
      const double up = evaluate(build, work);
      work[i][j] = orig - options.step;
      const double down = evaluate(build, work);
      work[i][j] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[j];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), options.floor});
      ++r.checked;
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      if (rel > r.max_rel_error || r.worst.empty()) {
        if (rel >= r.max_rel_error) {
          std::ostringstream os;
          os.precision(10);
          os << "input " << i << "[" << j << "]: analytic " << a << ", numeric " << numeric;
          r.worst = os.str();
        }
        r.max_rel_error = std::max(r.max_rel_error, rel);
      }
    }
  }
  r.pass = r.max_rel_error <= options.rel_tol;
  return r;
}

std::vector<Result> op_suite(std::uint64_t seed, const Options& o) {
  std::mt19937_64 rng(seed);
  std::vector<Result> out;
  auto add = [&](const std::string& name, const LossBuilder& f, std::vector<Tensor> in) {
    out.push_back(check(name, f, in, o));
  };
  const std::uint64_t ps = seed;

  add("add", [&](const auto& v) { return project(ops::add(v[0], v[1]), ps); },
      {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})});
  add("sub", [&](const auto& v) { return project(ops::sub(v[0], v[1]), ps); },
      {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})});
  add("mul", [&](const auto& v) { return project(ops::mul(v[0], v[1]), ps); },
      {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {2, 3, 4})});
  add("scale", [&](const auto& v) { return project(ops::scale(v[0], -1.7), ps); },
      {random_tensor(rng, {5})});
  add("abs", [&](const auto& v) { return project(ops::abs(v[0]), ps); }, {random_tensor(rng, {6})});
  for (auto act : {ops::Activation::relu, ops::Activation::gelu, ops::Activation::tanh}) {
    add("activation." + std::string(ops::to_string(act)),
        [&, act](const auto& v) { return project(ops::activation(v[0], act), ps); },
        {random_tensor(rng, {2, 5})});
  }
  add("sum", [&](const auto& v) { return ops::sum(ops::mul(v[0], v[0])); }, {random_tensor(rng, {3, 3})});
  add("mean", [&](const auto& v) { return ops::mean(ops::mul(v[0], v[0])); }, {random_tensor(rng, {3, 3})});
  add("reshape", [&](const auto& v) { return project(ops::reshape(v[0], {4, 3}), ps); },
      {random_tensor(rng, {3, 4})});
  add("transpose", [&](const auto& v) { return project(ops::transpose(v[0]), ps); },
      {random_tensor(rng, {3, 4})});
  add("select", [&](const auto& v) { return project(ops::select(v[0], 1), ps); },
      {random_tensor(rng, {3, 2, 2})});
  add("stack", [&](const auto& v) { return project(ops::stack({v[0], v[1]}), ps); },
      {random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3})});
  add("narrow_last", [&](const auto& v) { return project(ops::narrow_last(v[0], 2, 3), ps); },
      {random_tensor(rng, {2, 6})});
  add("diag", [&](const auto& v) { return project(ops::diag(v[0]), ps); }, {random_tensor(rng, {4})});
  add("matmul", [&](const auto& v) { return project(ops::matmul(v[0], v[1]), ps); },
      {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})});
  {
    Tensor mask = blocks::build_default_mask(5, 6, {3}, 1);
    add("masked_matmul", [&, mask](const auto& v) { return project(ops::masked_matmul(v[0], mask, v[1]), ps); },
        {random_tensor(rng, {5, 6}), random_tensor(rng, {6, 3})});
  }
  add("conv1d.circular",
      [&](const auto& v) { return project(ops::conv1d(v[0], v[1], ops::ConvMode::circular), ps); },
      {random_tensor(rng, {2, 7}), random_tensor(rng, {3, 2, 3})});
  add("conv1d.same",
      [&](const auto& v) { return project(ops::conv1d(v[0], v[1], ops::ConvMode::same_zero_pad), ps); },
      {random_tensor(rng, {2, 2, 7}), random_tensor(rng, {2, 2, 5})});
  for (std::size_t n : {8u, 7u}) {
    add("rfft.n" + std::to_string(n), [&](const auto& v) { return project(ops::rfft(v[0]), ps); },
        {random_tensor(rng, {2, n})});
    const std::size_t f = n / 2 + 1;
    add("irfft.n" + std::to_string(n), [&, n](const auto& v) { return project(ops::irfft(v[0], n), ps); },
        {random_tensor(rng, {2, f, 2})});
  }
  add("spectral_matmul",
      [&](const auto& v) { return project(ops::spectral_matmul(v[0], v[1], v[2]), ps); },
      {random_tensor(rng, {2, 2, 5, 2}), random_tensor(rng, {2, 3, 5}), random_tensor(rng, {2, 3, 5})});
  {
    auto svd_loss = [&](const auto& v) {
      const ops::SvdVars f = ops::svd(v[0]);
      return ops::add(ops::add(project(f.u, ps), project(f.s, ps + 1)), project(f.v, ps + 2));
    };
    add("svd.square", svd_loss, {gapped_matrix(rng, {3, 3})});
    add("svd.wide", svd_loss, {gapped_matrix(rng, {3, 6})});
  }
  return out;
}

std::vector<Result> block_suite(std::uint64_t seed, const Options& o) {
  std::mt19937_64 rng(seed + 1000);
  std::vector<Result> out;
  const std::uint64_t ps = seed;
  for (std::size_t n_out : {8u, 4u}) {
    const std::size_t fi = 5, fo = n_out / 2 + 1;
    out.push_back(check(
        "ft_block." + std::to_string(n_out),
        [&, n_out](const auto& v) { return project(blocks::ft_block_forward(v[0], v[1], v[2], n_out), ps); },
        {random_tensor(rng, {2, 2, 8}), random_tensor(rng, {2, fo, fi}), random_tensor(rng, {2, fo, fi})}, o));
  }
  {
    Tensor x({2, 2, 8});
    for (std::size_t b = 0; b < 2; ++b) {
      Tensor s = gapped_matrix(rng, {2, 8});
      std::copy(s.data().begin(), s.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(b * 16));
    }
    out.push_back(check(
        "svd_block",
        [&](const auto& v) { return project(blocks::svd_block_forward(v[0], v[1], ops::Activation::tanh), ps); },
        {x, gapped_matrix(rng, {2, 8})}, o));
  }
  {
    Tensor mask = blocks::build_default_mask(4, 8, {3}, 1);
    out.push_back(check(
        "sparse_matrix_block",
        [&, mask](const auto& v) { return project(blocks::sparse_matrix_forward(v[0], v[1], mask), ps); },
        {random_tensor(rng, {2, 2, 8}), random_tensor(rng, {4, 8})}, o));
  }
  out.push_back(check(
      "conv_block", [&](const auto& v) { return project(blocks::conv_block_forward(v[0], v[1]), ps); },
      {random_tensor(rng, {2, 2, 8}), random_tensor(rng, {2, 2, 3})}, o));
  return out;
}

Result model_check(Arch arch, std::uint64_t seed, const Options& o) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.input_len = 8;
  cfg.pred_len = 4;
  cfg.channels = 2;
  cfg.layers = 2;
  cfg.mask = blocks::MaskSpec{{3}, 1};
  cfg.seed = seed;
  Model model(cfg);
  std::mt19937_64 rng(seed + 2000);

  // Randomize parameters away from the near-identity initialization so every
  // path carries gradient; SVD operands get separated spectra.
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const Tensor& p = model.params()[i];
    const bool svd_operand = model.params().name(i).find(".svd.") != std::string::npos;
    inputs.push_back(svd_operand ? gapped_matrix(rng, p.shape(), 0.5) : random_tensor(rng, p.shape(), 0.5));
  }
  const std::size_t batch = 2;
  Tensor x({batch, cfg.channels, cfg.input_len});
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor s = gapped_matrix(rng, {cfg.channels, cfg.input_len});
    std::copy(s.data().begin(), s.data().end(),
              x.data().begin() + static_cast<std::ptrdiff_t>(b * s.size()));
  }
  const Tensor target = random_tensor(rng, {batch, cfg.channels, cfg.pred_len});
  const std::size_t n_params = inputs.size();
  inputs.push_back(x);
  inputs.push_back(target);

  std::vector<std::size_t> diff(n_params);
  for (std::size_t i = 0; i < n_params; ++i) diff[i] = i;
  auto build = [&](const std::vector<Var>& v) {
    const std::vector<Var> params(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n_params));
    return loss(model.forward(params, v[n_params]), v[n_params + 1], LossKind::mse);
  };
  return check("model." + std::string(to_string(arch)), build, inputs, o, diff);
}

}  // namespace tlnet::gradcheck
