#include "tlnet/blocks.hpp"

#include <algorithm>

#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"

namespace tlnet::blocks {

FtBlockParams FtBlockParams::identity(std::size_t channels, std::size_t n_in, std::size_t n_out) {
  const std::size_t f_in = fft::rfft_bins(n_in);
  const std::size_t f_out = fft::rfft_bins(n_out);
  FtBlockParams p{Tensor({channels, f_out, f_in}), Tensor({channels, f_out, f_in}), n_in, n_out};
  const double gain = static_cast<double>(n_out) / static_cast<double>(n_in);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < std::min(f_in, f_out); ++k) p.w_re.at(c, k, k) = gain;
  }
  return p;
}

SparseMatrixParams::SparseMatrixParams(Tensor phi, Tensor mask)
    : phi_m(std::move(phi)), mask_(std::move(mask)) {
  if (phi_m.rank() != 2 || mask_.shape() != phi_m.shape()) {
    throw DimensionError("sparse matrix block: phi " + shape_str(phi_m.shape()) + " vs mask " +
                         shape_str(mask_.shape()));
  }
  for (double m : mask_.data()) {
    if (m != 0.0 && m != 1.0) throw ValidationError("sparse matrix block: mask entries must be 0 or 1");
  }
}

Var ft_block_forward(const Var& x, const Var& w_re, const Var& w_im, std::size_t n_out) {
  const std::size_t rank = x.value().rank();
  if (rank != 2 && rank != 3) {
    throw DimensionError("ft block expects (C, n) or (B, C, n), got " + shape_str(x.shape()));
  }
  const std::size_t n_in = x.shape().back();
  const Shape& ws = w_re.shape();
  if (ws.size() != 3 || ws[2] != fft::rfft_bins(n_in) || ws[1] != fft::rfft_bins(n_out)) {
    throw DimensionError("ft block: weights " + shape_str(ws) + " do not map length " +
                         std::to_string(n_in) + " to " + std::to_string(n_out));
  }
  return ops::irfft(ops::spectral_matmul(ops::rfft(x), w_re, w_im), n_out);
}

namespace {

Var svd_product_single(const Var& x, const ops::SvdVars& pf) {
  const ops::SvdVars xf = ops::svd(x);
  const Var u = ops::mul(xf.u, pf.u);
  const Var s = ops::mul(xf.s, pf.s);
  const Var v = ops::mul(xf.v, pf.v);
  return ops::matmul(ops::matmul(u, ops::diag(s)), v);
}

}  // namespace

Var svd_block_forward(const Var& x, const Var& phi, ops::Activation sigma) {
  return ops::activation(svd_block_product(x, phi), sigma);
}

Var svd_block_product(const Var& x, const Var& phi) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 && xv.rank() != 3) {
    throw DimensionError("svd block expects (k, n) or (B, k, n), got " + shape_str(xv.shape()));
  }
  const std::size_t k = xv.shape()[xv.rank() - 2];
  const std::size_t n = xv.shape().back();
  if (k > n) {
    throw DimensionError("svd block needs features <= time, got (" + std::to_string(k) + ", " +
                         std::to_string(n) + "); transpose the input at the model layer");
  }
  if (phi.shape() != Shape{k, n}) {
    throw DimensionError("svd block: phi " + shape_str(phi.shape()) + " must equal sample shape " +
                         shape_str({k, n}));
  }
  const ops::SvdVars pf = ops::svd(phi);
  if (xv.rank() == 2) return svd_product_single(x, pf);
  std::vector<Var> outs;
  outs.reserve(xv.dim(0));
  for (std::size_t b = 0; b < xv.dim(0); ++b) {
    outs.push_back(svd_product_single(ops::select(x, b), pf));
  }
  return ops::stack(outs);
}

Var sparse_matrix_forward(const Var& x, const Var& phi_m, const Tensor& mask) {
  const Shape& xs = x.shape();
  if (xs.size() != 2 && xs.size() != 3) {
    throw DimensionError("sparse matrix block expects (C, n) or (B, C, n), got " + shape_str(xs));
  }
  const std::size_t n_in = xs.back();
  if (phi_m.value().rank() != 2 || phi_m.shape()[1] != n_in) {
    throw DimensionError("sparse matrix block: phi " + shape_str(phi_m.shape()) +
                         " cannot act on length " + std::to_string(n_in));
  }
  const std::size_t n_out = phi_m.shape()[0];
  const std::size_t rows = x.value().size() / n_in;
  const Var cols = ops::transpose(ops::reshape(x, {rows, n_in}));
  const Var y = ops::transpose(ops::masked_matmul(phi_m, mask, cols));
  Shape out_shape = xs;
  out_shape.back() = n_out;
  return ops::reshape(y, out_shape);
}

Var conv_block_forward(const Var& x, const Var& kernels) {
  return ops::conv1d(x, kernels, ops::ConvMode::same_zero_pad);
}

Tensor build_default_mask(std::size_t n_out, std::size_t n_in,
                          const std::vector<std::size_t>& band_widths, std::size_t global_rows) {
  if (n_out == 0 || n_in == 0) throw ValidationError("mask dimensions must be positive");
  for (std::size_t w : band_widths) {
    if (w % 2 == 0) throw ValidationError("mask band widths must be odd, got " + std::to_string(w));
  }
  if (global_rows > n_out) {
    throw ValidationError("global_rows " + std::to_string(global_rows) + " exceeds n_out " +
                          std::to_string(n_out));
  }
  Tensor mask({n_out, n_in});
  const auto len = static_cast<std::ptrdiff_t>(n_in);
  for (std::size_t i = 0; i < n_out; ++i) {
    const auto center = static_cast<std::ptrdiff_t>((2 * i * n_in + n_out) / (2 * n_out)) % len;
    for (std::size_t w : band_widths) {
      if (w >= n_in) {
        for (std::size_t j = 0; j < n_in; ++j) mask.at(i, j) = 1.0;
        continue;
      }
      const auto half = static_cast<std::ptrdiff_t>(w / 2);
      for (std::ptrdiff_t d = -half; d <= half; ++d) {
        mask.at(i, static_cast<std::size_t>(((center + d) % len + len) % len)) = 1.0;
      }
    }
  }
  for (std::size_t g = 0; g < global_rows; ++g) {
    const std::size_t row = g * n_out / global_rows;
    for (std::size_t j = 0; j < n_in; ++j) mask.at(row, j) = 1.0;
  }
  for (std::size_t i = 0; i < n_out; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n_in && !any; ++j) any = mask.at(i, j) != 0.0;
    if (!any) throw ValidationError("mask row " + std::to_string(i) + " has no active entry");
  }
  return mask;
}

Tensor delta_kernels(std::size_t c_out, std::size_t c_in, std::size_t k) {
  Tensor kern({c_out, c_in, k});
  for (std::size_t c = 0; c < std::min(c_out, c_in); ++c) kern.at(c, c, k / 2) = 1.0;
  return kern;
}

}  // namespace tlnet::blocks
