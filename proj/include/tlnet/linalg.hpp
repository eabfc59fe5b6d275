#pragma once

#include <cstddef>

#include "tlnet/tensor.hpp"

namespace tlnet::linalg {

// x = u * diag(s) * v for x of shape (k, n), k <= n.
//   u: (k, k) orthogonal, s: (k) nonincreasing and >= 0, v: (k, n) with
//   orthonormal rows. In each column of u the entry of largest magnitude
//   (lowest row on ties) is nonnegative; v rows are flipped to match.
struct SvdFactors {
  Tensor u;
  Tensor s;
  Tensor v;
};

struct SvdOptions {
  std::size_t max_sweeps = 60;
  double tolerance = 1e-15;  // relative off-orthogonality that ends a sweep
};

// One-sided (Hestenes) Jacobi on the rows of x. Deterministic for identical
// input. Throws NumericError with the final residual if max_sweeps is hit.
SvdFactors svd(const Tensor& x, const SvdOptions& options = {});

// Regularizer of the singular-value coupling terms in svd_backward.
inline constexpr double kSvdGradEpsilon = 1e-12;

// Gradient w.r.t. x of a loss whose gradients w.r.t. the factors are
// (grad_u, grad_s, grad_v). Coupling terms 1/(s_j^2 - s_i^2) are replaced by
// d/(d^2 + eps) with d = s_j^2 - s_i^2, and 1/s by s/(s^2 + eps), so the
// result stays bounded for repeated or vanishing singular values.
Tensor svd_backward(const SvdFactors& f, const Tensor& grad_u, const Tensor& grad_s,
                    const Tensor& grad_v, double eps = kSvdGradEpsilon);

// Plain products used across modules.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reconstruct(const SvdFactors& f);

}  // namespace tlnet::linalg
