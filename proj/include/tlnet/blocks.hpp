#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "tlnet/graph.hpp"
#include "tlnet/ops.hpp"
#include "tlnet/tensor.hpp"

// The four learnable transforms. Each maps a (channels, time) signal, or a
// batch (B, channels, time), to a (channels', time') signal. Parameter
// structs hold plain tensors; forward functions take them bound to a graph.
namespace tlnet::blocks {

// Spectral weights W = w_re + i w_im, one (F_out, F_in) complex matrix per
// channel, F = n/2 + 1.
struct FtBlockParams {
  Tensor w_re;
  Tensor w_im;
  std::size_t n_in = 0;
  std::size_t n_out = 0;

  // Rectangular identity scaled by n_out / n_in, so a square block starts as
  // the identity map and a length-changing one as a low-pass resampler.
  static FtBlockParams identity(std::size_t channels, std::size_t n_in, std::size_t n_out);
};

struct SvdBlockParams {
  Tensor phi;  // same (k, n) shape as one input sample
};

// Trainable time-axis matrix behind a fixed binary mask. The mask cannot be
// changed after construction.
class SparseMatrixParams {
 public:
  SparseMatrixParams(Tensor phi_m, Tensor mask);

  Tensor phi_m;
  const Tensor& mask() const { return mask_; }

 private:
  Tensor mask_;
};

struct ConvBlockParams {
  Tensor kernels;  // (C_out, C_in, K), K odd
};

// out[c] = irfft(W_c rfft(x[c]), n_out). Output is real by construction: the
// inverse drops the imaginary parts of the DC and Nyquist bins, i.e. it is the
// real part of the inverse DFT of the Hermitian-extended spectrum.
Var ft_block_forward(const Var& x, const Var& w_re, const Var& w_im, std::size_t n_out);

// sigma((U_x .* U_phi) diag(S_x .* S_phi) (V_x .* V_phi)) with both inputs
// decomposed by ops::svd. x is (k, n) or (B, k, n) with k <= n; a batch
// reuses the single decomposition of phi.
Var svd_block_forward(const Var& x, const Var& phi, ops::Activation sigma);

// The same product without sigma.
Var svd_block_product(const Var& x, const Var& phi);

// (phi_m .* mask) applied along the time axis of every channel:
// (C, n_in) or (B, C, n_in) -> same leading axes, n_out.
Var sparse_matrix_forward(const Var& x, const Var& phi_m, const Tensor& mask);

// Same-zero-padded conv1d, length preserving.
Var conv_block_forward(const Var& x, const Var& kernels);

struct MaskSpec {
  std::vector<std::size_t> band_widths{3, 9, 27};
  std::size_t global_rows = 4;
};

// Union of wrap-around diagonal bands, one per width, centred on
// round(i * n_in / n_out) in row i, plus `global_rows` dense rows at
// floor(j * n_out / global_rows). A band at least n_in wide covers the row.
Tensor build_default_mask(std::size_t n_out, std::size_t n_in,
                          const std::vector<std::size_t>& band_widths, std::size_t global_rows);

// Center-delta kernels: conv_block_forward with them is the identity when
// C_out == C_in.
Tensor delta_kernels(std::size_t c_out, std::size_t c_in, std::size_t k);

}  // namespace tlnet::blocks
