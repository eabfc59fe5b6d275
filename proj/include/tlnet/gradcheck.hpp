#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tlnet/graph.hpp"
#include "tlnet/model.hpp"
#include "tlnet/tensor.hpp"

// Central finite-difference checks of the tape's backward rules.
namespace tlnet::gradcheck {

struct Options {
  double step = 1e-6;
  double rel_tol = 1e-4;
  // Denominator floor of the relative error, so gradients that are zero up
  // to rounding do not divide by ~0.
  double floor = 1e-4;
};

struct Result {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool pass = false;
  std::string worst;  // "input i[j]: analytic a, numeric b"
};

// Builds a scalar loss from leaves holding `inputs`, in order.
using LossBuilder = std::function<Var(const std::vector<Var>& inputs)>;

// Compares backward() against central differences for every element of the
// inputs whose index is listed in `differentiate` (all inputs when empty).
Result check(const std::string& name, const LossBuilder& build, const std::vector<Tensor>& inputs,
             const Options& options = {}, std::vector<std::size_t> differentiate = {});

// Named suites. Each check draws its own data from `seed`; SVD inputs are
// redrawn until every gap between squared singular values exceeds 1e-3.
std::vector<Result> op_suite(std::uint64_t seed, const Options& options = {});
std::vector<Result> block_suite(std::uint64_t seed, const Options& options = {});
// Loss gradient w.r.t. every parameter tensor of a tiny model (d=2, T=8,
// tau=4, L=2 by default) with randomized parameters.
Result model_check(Arch arch, std::uint64_t seed, const Options& options = {});

// Smallest gap between squared singular values of a (k, n) matrix.
double min_squared_gap(const Tensor& x);

}  // namespace tlnet::gradcheck
