#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tlnet/graph.hpp"
#include "tlnet/tensor.hpp"

// Differentiable primitives. Each op records a single tape node with its own
// backward rule; whole-block transforms (rfft, svd, conv1d) are not broken
// into scalar pieces.
namespace tlnet::ops {

enum class Activation { relu, gelu, tanh };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

enum class ConvMode { circular, same_zero_pad };

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var abs(const Var& a);
Var activation(const Var& x, Activation kind);

// Reductions to a rank-0 scalar.
Var sum(const Var& a);
Var mean(const Var& a);

// Layout.
Var reshape(const Var& a, Shape shape);
Var transpose(const Var& a);  // rank 2
Var select(const Var& a, std::size_t index);  // index along axis 0, drops the axis
Var stack(const std::vector<Var>& parts);     // new leading axis
// Contiguous window [start, start + len) of the last axis.
Var narrow_last(const Var& a, std::size_t start, std::size_t len);
// Flat window of `shape` elements starting at `offset`.
Var slice_flat(const Var& a, std::size_t offset, Shape shape);
Var diag(const Var& s);  // (k) -> (k, k)

// (p, q) x (q, r) -> (p, r).
Var matmul(const Var& a, const Var& b);

// (w .* mask) x with a fixed binary mask. The gradient w.r.t. w is exactly
// zero wherever mask == 0. Throws ValidationError on non-binary masks.
Var masked_matmul(const Var& w, const Tensor& mask, const Var& x);

// Length-preserving 1D cross-correlation with odd kernel K <= N, centered:
//   y[o][n] = sum_c sum_j k[o][c][j] * x[c][n + j - (K-1)/2]
// with indices wrapped mod N (circular) or zero outside [0, N) (same pad).
// x is (C_in, N) or (B, C_in, N); kernels (C_out, C_in, K).
Var conv1d(const Var& x, const Var& kernels, ConvMode mode);

// Real DFT over the last axis: (..., N) -> (..., N/2+1, 2), trailing axis
// holding (re, im).
Var rfft(const Var& x);
// Inverse of rfft: (..., F, 2) -> (..., out_len), F must be out_len/2+1.
// Imaginary parts of bin 0 and of the Nyquist bin do not contribute.
Var irfft(const Var& spectrum, std::size_t out_len);

// Per-channel complex matrix-vector product on spectra:
//   (B, C, F_in, 2) or (C, F_in, 2) with W = w_re + i w_im of shape
//   (C, F_out, F_in) -> (B, C, F_out, 2) or (C, F_out, 2).
Var spectral_matmul(const Var& spectrum, const Var& w_re, const Var& w_im);

struct SvdVars {
  Var u;  // (k, k)
  Var s;  // (k)
  Var v;  // (k, n)
};

// Differentiable SVD of a (k, n) matrix, k <= n. Backward uses the analytic
// gradient with regularized coupling, see linalg::svd_backward.
SvdVars svd(const Var& x);

}  // namespace tlnet::ops
