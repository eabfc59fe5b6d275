#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tlnet/blocks.hpp"
#include "tlnet/graph.hpp"
#include "tlnet/ops.hpp"
#include "tlnet/tensor.hpp"

namespace tlnet {

// Two-branch networks plus the single-block ablation variants.
enum class Arch { ft_svd, ft_matrix, ft_conv, conv_svd, ft_only, svd_only, matrix_only, conv_only };

Arch parse_arch(std::string_view name);
std::string_view to_string(Arch arch);
const std::vector<Arch>& all_archs();

enum class LossKind { mse, mae };

LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind);

struct ModelConfig {
  Arch arch = Arch::ft_svd;
  std::size_t input_len = 96;  // T
  std::size_t pred_len = 24;   // tau
  std::size_t channels = 7;    // d
  std::size_t layers = 2;      // L: L-1 hidden layers plus the output layer
  ops::Activation activation = ops::Activation::relu;
  blocks::MaskSpec mask;
  std::size_t conv_kernel = 3;
  // Univariate runs: lift 1 channel to 4 with a conv before the network and
  // read the prediction back out with a learned 1x4 combination.
  bool expand_univariate = false;
  std::uint64_t seed = 0;

  // Throws ValidationError naming the offending field.
  void validate() const;
  // Channels seen by the blocks (4 when expand_univariate).
  std::size_t width() const { return expand_univariate ? 4 : channels; }
};

// Ordered named tensors. Order is fixed by construction and defines the
// layout of checkpoints and optimizer state.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& operator[](std::size_t i) { return values_[i]; }
  const Tensor& operator[](std::size_t i) const { return values_[i]; }
  // Throws ValidationError for unknown names.
  std::size_t index(std::string_view name) const;
  Tensor& at(std::string_view name) { return values_[index(name)]; }
  const Tensor& at(std::string_view name) const { return values_[index(name)]; }
  bool contains(std::string_view name) const;
  std::size_t element_count() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

class Model {
 public:
  // Validates cfg and draws the initial parameters from cfg.seed.
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  // Puts every parameter on g as a leaf, in ParameterSet order.
  std::vector<Var> bind(Graph& g, bool requires_grad) const;

  // x: (B, d, T) -> (B, d, tau). `bound` comes from bind() on x's graph.
  Var forward(const std::vector<Var>& bound, const Var& x) const;

  // Inference without gradients.
  Tensor predict(const Tensor& x) const;

  // Fixed binary mask of a sparse-matrix parameter, e.g. "layer0.matrix.phi".
  const Tensor& mask_for(std::string_view param_name) const;

 private:
  Var hidden_layer(std::size_t layer, const std::vector<Var>& bound, const Var& x) const;
  Var output_layer(const std::vector<Var>& bound, const Var& x) const;
  const Var& param(const std::vector<Var>& bound, std::string_view name) const;

  ModelConfig cfg_;
  ParameterSet params_;
  std::vector<std::pair<std::string, Tensor>> masks_;
};

// Mean squared or mean absolute error over all elements.
Var loss(const Var& pred, const Var& target, LossKind kind);

// (B, 1, T) -> (B, 4, T) with same-padded kernels of shape (4, 1, K).
Var expand_univariate(const Var& x, const Var& kernels);

}  // namespace tlnet
