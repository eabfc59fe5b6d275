#include "tlnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tlnet/error.hpp"

namespace tlnet::linalg {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a matrix, got " + shape_str(t.shape()));
  }
}

// Replaces row `row` of v (k x n) by a unit vector orthogonal to rows [0, row).
void complete_row(Tensor& v, std::size_t row) {
  const std::size_t n = v.dim(1);
  std::vector<double> cand(n);
  for (std::size_t basis = 0; basis < n; ++basis) {
    std::fill(cand.begin(), cand.end(), 0.0);
    cand[basis] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t r = 0; r < row; ++r) {
        const double* vr = &v.at(r, 0);
        const double proj = dot(cand.data(), vr, n);
        for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * vr[i];
      }
    }
    const double norm = std::sqrt(dot(cand.data(), cand.data(), n));
    if (norm > 0.5) {
      for (std::size_t i = 0; i < n; ++i) v.at(row, i) = cand[i] / norm;
      return;
    }
  }
  throw NumericError("svd: could not complete an orthonormal row basis");
}

}  // namespace

SvdFactors svd(const Tensor& x, const SvdOptions& options) {
  require_matrix(x, "svd");
  const std::size_t k = x.dim(0);
  const std::size_t n = x.dim(1);
  if (k > n) {
    throw DimensionError("svd expects k <= n, got " + shape_str(x.shape()) +
                         "; transpose the input");
  }
  if (!x.all_finite()) throw NumericError("svd: non-finite input");

  Tensor a = x;
  Tensor rot = Tensor::identity(k);

  bool converged = k < 2;
  double residual = 0.0;
  for (std::size_t sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
    converged = true;
    residual = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double* ai = &a.at(i, 0);
        double* aj = &a.at(j, 0);
        const double alpha = dot(ai, ai, n);
        const double beta = dot(aj, aj, n);
        const double gamma = dot(ai, aj, n);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double off = std::abs(gamma) / std::sqrt(alpha * beta);
        residual = std::max(residual, off);
        if (off <= options.tolerance) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t p = 0; p < n; ++p) {
          const double xi = ai[p];
          const double xj = aj[p];
          ai[p] = c * xi - s * xj;
          aj[p] = s * xi + c * xj;
        }
        double* ri = &rot.at(i, 0);
        double* rj = &rot.at(j, 0);
        for (std::size_t p = 0; p < k; ++p) {
          const double xi = ri[p];
          const double xj = rj[p];
          ri[p] = c * xi - s * xj;
          rj[p] = s * xi + c * xj;
        }
      }
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "svd: Jacobi sweeps did not converge after " << options.max_sweeps
       << " sweeps (residual " << residual << ")";
    throw NumericError(os.str());
  }

  std::vector<double> norms(k);
  for (std::size_t i = 0; i < k; ++i) norms[i] = std::sqrt(dot(&a.at(i, 0), &a.at(i, 0), n));
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return norms[l] > norms[r]; });
  const double s_max = k ? norms[order[0]] : 0.0;
  const double zero_tol = s_max * 1e-13;

  SvdFactors f{Tensor({k, k}), Tensor({k}), Tensor({k, n})};
  for (std::size_t col = 0; col < k; ++col) {
    const std::size_t src = order[col];
    for (std::size_t r = 0; r < k; ++r) f.u.at(r, col) = rot.at(src, r);
  }
  for (std::size_t col = 0; col < k; ++col) {
    const std::size_t src = order[col];
    const double sv = norms[src];
    if (sv > zero_tol && sv > 0.0) {
      f.s[col] = sv;
      for (std::size_t p = 0; p < n; ++p) f.v.at(col, p) = a.at(src, p) / sv;
    } else {
      f.s[col] = 0.0;
      complete_row(f.v, col);
    }
  }

  for (std::size_t col = 0; col < k; ++col) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t r = 0; r < k; ++r) {
      const double m = std::abs(f.u.at(r, col));
      if (m > best) {
        best = m;
        arg = r;
      }
    }
    if (f.u.at(arg, col) < 0.0) {
      for (std::size_t r = 0; r < k; ++r) f.u.at(r, col) = -f.u.at(r, col);
      for (std::size_t p = 0; p < n; ++p) f.v.at(col, p) = -f.v.at(col, p);
    }
  }
  return f;
}

Tensor svd_backward(const SvdFactors& f, const Tensor& grad_u, const Tensor& grad_s,
                    const Tensor& grad_v, double eps) {
  const std::size_t k = f.u.dim(0);
  const std::size_t n = f.v.dim(1);
  const Tensor& u = f.u;
  const Tensor& v = f.v;
  const Tensor& s = f.s;

  // ut_gu = U^T gU ; v_gvt = V gV^T (both k x k)
  Tensor ut_gu({k, k});
  Tensor v_gvt({k, k});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < k; ++r) acc += u.at(r, i) * grad_u.at(r, j);
      ut_gu.at(i, j) = acc;
      v_gvt.at(i, j) = dot(&v.at(i, 0), &grad_v.at(j, 0), n);
    }
  }

  Tensor inner({k, k});
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) {
        inner.at(i, i) = grad_s[i];
        continue;
      }
      const double d = s[j] * s[j] - s[i] * s[i];
      const double coupling = d / (d * d + eps);
      const double ju = ut_gu.at(i, j) - ut_gu.at(j, i);
      const double kv = v_gvt.at(i, j) - v_gvt.at(j, i);
      inner.at(i, j) = coupling * (ju * s[j] + s[i] * kv);
    }
  }

  // Component of gV orthogonal to the row space of V, scaled by 1/s.
  Tensor side = grad_v;
  for (std::size_t i = 0; i < k; ++i) {
    double* row = &side.at(i, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const double proj = v_gvt.at(j, i);  // gV_i . V_j
      const double* vj = &v.at(j, 0);
      for (std::size_t p = 0; p < n; ++p) row[p] -= proj * vj[p];
    }
    const double inv = s[i] / (s[i] * s[i] + eps);
    for (std::size_t p = 0; p < n; ++p) row[p] *= inv;
  }
  for (std::size_t i = 0; i < k; ++i) {
    double* row = &side.at(i, 0);
    for (std::size_t j = 0; j < k; ++j) {
      const double w = inner.at(i, j);
      const double* vj = &v.at(j, 0);
      for (std::size_t p = 0; p < n; ++p) row[p] += w * vj[p];
    }
  }
  return matmul(u, side);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  if (b.dim(0) != q) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor out({p, r});
  for (std::size_t i = 0; i < p; ++i) {
    double* o = &out.at(i, 0);
    for (std::size_t l = 0; l < q; ++l) {
      const double av = a.at(i, l);
      if (av == 0.0) continue;
      const double* br = &b.at(l, 0);
      for (std::size_t j = 0; j < r; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  Tensor out({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

Tensor reconstruct(const SvdFactors& f) {
  Tensor us = f.u;
  for (std::size_t i = 0; i < us.dim(0); ++i) {
    for (std::size_t j = 0; j < us.dim(1); ++j) us.at(i, j) *= f.s[j];
  }
  return matmul(us, f.v);
}

}  // namespace tlnet::linalg
