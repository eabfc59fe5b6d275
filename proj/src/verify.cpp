#include "tlnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "tlnet/blocks.hpp"
#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"
#include "tlnet/graph.hpp"
#include "tlnet/linalg.hpp"
#include "tlnet/ops.hpp"

namespace tlnet::verify {

namespace {

using Complex = std::complex<double>;

Tensor randn(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

VerificationResult finish(std::string name, double err, double tol, std::string instance, bool gated = true) {
  VerificationResult r;
  r.name = std::move(name);
  r.max_abs_error = err;
  r.tolerance = tol;
  r.pass = err <= tol;
  r.instance = std::move(instance);
  r.gated = gated;
  return r;
}

Tensor conv_circular(const Tensor& x, const Var& kernels) {
  Graph& g = kernels.graph();
  return ops::conv1d(g.leaf(x), kernels, ops::ConvMode::circular).value();
}

// Kernel taps that make the centred cross-correlation of conv1d act as the
// causal circulant C[a][b] = h[(a - b) mod N].
Tensor causal_kernel(const std::array<double, 3>& h) {
  return Tensor({1, 1, 5}, {h[2], h[1], h[0], 0.0, 0.0});
}

Tensor circulant(const std::array<double, 3>& h, std::size_t n) {
  Tensor c({n, n});
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t l = 0; l < 3; ++l) c.at(a, (a + n - l) % n) += h[l];
  return c;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

}  // namespace

VerificationResult circular_conv_theorem(std::size_t n, std::size_t trials, std::uint64_t seed, double tol) {
  if (n < 2) throw ValidationError("circular_conv_theorem: n must be >= 2");
  std::mt19937_64 rng(seed);
  double err = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor x = randn(rng, {n}), h = randn(rng, {n});
    Tensor y({n});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t m = 0; m < n; ++m) y[i] += x[m] * h[(i + n - m) % n];
    const auto sx = fft::rfft(x), sh = fft::rfft(h), sy = fft::rfft(y);
    for (std::size_t k = 0; k < sy.n_freq; ++k) err = std::max(err, std::abs(sy.at(0, k) - sx.at(0, k) * sh.at(0, k)));

    // The library's circular conv1d with a 3-tap kernel is the same sum with
    // h supported on lags 0..2.
    if (n >= 5) {
      const std::array<double, 3> taps{h[0], h[1], h[2]};
      Graph g(false);
      const Tensor yc = conv_circular(x.reshaped({1, n}), g.leaf(causal_kernel(taps)));
      for (std::size_t i = 0; i < n; ++i) {
        double ref = 0;
        for (std::size_t l = 0; l < 3; ++l) ref += taps[l] * x[(i + n - l) % n];
        err = std::max(err, std::abs(yc[i] - ref));
      }
    }
  }
  return finish("circular_conv_theorem", err, tol,
                "n=" + std::to_string(n) + " trials=" + std::to_string(trials) + " seed=" + std::to_string(seed));
}

VerificationResult conv_matrix_equiv(std::size_t n, std::size_t c_in, std::size_t c_out, std::size_t k,
                                     std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  const Tensor x = randn(rng, {c_in, n}), kern = randn(rng, {c_out, c_in, k});
  Tensor mat({c_out * n, c_in * n});
  Tensor pattern({c_out * n, c_in * n});
  const long half = long(k / 2);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t c = 0; c < c_in; ++c)
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < k; ++j) {
          const long src = long(t) + long(j) - half;
          if (src < 0 || src >= long(n)) continue;
          mat.at(o * n + t, c * n + std::size_t(src)) = kern.at(o, c, j);
          pattern.at(o * n + t, c * n + std::size_t(src)) = 1.0;
        }
  Graph g(false);
  const Tensor y = blocks::conv_block_forward(g.leaf(x), g.leaf(kern)).value();
  const Tensor ref = linalg::matmul(mat, x.reshaped({c_in * n, 1}));
  double err = max_abs_diff(y.reshaped({c_out * n, 1}), ref);
  for (std::size_t r = 0; r < c_out * n; ++r) {
    double nnz = 0;
    for (std::size_t c = 0; c < c_in * n; ++c) nnz += pattern.at(r, c);
    if (nnz > double(k * c_in)) err = INFINITY;
  }
  return finish("conv_matrix_equiv", err, tol,
                "N=" + std::to_string(n) + " C_in=" + std::to_string(c_in) + " C_out=" + std::to_string(c_out) +
                    " K=" + std::to_string(k) + " seed=" + std::to_string(seed));
}

VerificationResult two_layer_receptive_field(const std::array<double, 3>& h, std::size_t n, double tol) {
  if (n < 6) throw ValidationError("two_layer_receptive_field: N must be >= 6");
  const Tensor c = circulant(h, n);
  const Tensor c2 = linalg::matmul(c, c);
  const double lag[5] = {h[0] * h[0], 2 * h[0] * h[1], 2 * h[0] * h[2] + h[1] * h[1], 2 * h[1] * h[2],
                         h[2] * h[2]};
  double err = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t l = (a + n - b) % n;
      err = std::max(err, std::abs(c2.at(a, b) - (l < 5 ? lag[l] : 0.0)));
    }
  // Spot entries: (0,0) = h0^2, (1,0) = 2h0h1, and lag 2 at both (0,N-2)
  // and (N-1,N-3).
  err = std::max(err, std::abs(c2.at(0, 0) - lag[0]));
  err = std::max(err, std::abs(c2.at(1, 0) - lag[1]));
  err = std::max(err, std::abs(c2.at(0, n - 2) - lag[2]));
  err = std::max(err, std::abs(c2.at(n - 1, n - 3) - lag[2]));

  // Support grows from 3 to 5 per row when no coefficient vanishes.
  const bool generic = std::all_of(std::begin(lag), std::end(lag), [](double v) { return v != 0.0; }) &&
                       h[0] != 0.0 && h[1] != 0.0 && h[2] != 0.0;
  if (generic) {
    for (std::size_t a = 0; a < n; ++a) {
      std::size_t n1 = 0, n2 = 0;
      for (std::size_t b = 0; b < n; ++b) {
        n1 += c.at(a, b) != 0.0;
        n2 += std::abs(c2.at(a, b)) > tol;
      }
      if (n1 != 3 || n2 != 5) err = INFINITY;
    }
  }

  // Two passes of the library's circular conv equal C*C*x.
  std::mt19937_64 rng(n);
  const Tensor x = randn(rng, {1, n});
  Graph g(false);
  const Var kern = g.leaf(causal_kernel(h));
  const Tensor twice = conv_circular(conv_circular(x, kern), kern);
  err = std::max(err, max_abs_diff(twice.reshaped({n, 1}), linalg::matmul(c2, x.reshaped({n, 1}))));
  return finish("two_layer_receptive_field", err, tol,
                "N=" + std::to_string(n) + fmt(" h=[%.4g,%.4g,%.4g]", h[0], h[1], h[2]));
}

VerificationResult two_layer_receptive_field_literal(const std::array<double, 3>& h, std::size_t n, double tol) {
  const Tensor c = circulant(h, n);
  const Tensor c2 = linalg::matmul(c, c);
  const double printed = h[0] * h[2] + h[1] * h[1];
  return finish("two_layer_receptive_field[printed (0,N-2)]", std::abs(c2.at(0, n - 2) - printed), tol,
                "N=" + std::to_string(n) + " printed h0h2+h1^2 vs computed " + fmt("%.6g", c2.at(0, n - 2)),
                false);
}

VerificationResult kernel_frequency(const std::array<double, 3>& h, std::size_t n, double tol) {
  if (n < 4) throw ValidationError("kernel_frequency: N must be >= 4");
  Tensor padded({n});
  for (std::size_t i = 0; i < 3; ++i) padded[i] = h[i];
  const auto spec = fft::rfft(padded);
  double err = 0;
  for (std::size_t k = 0; k < spec.n_freq; ++k) {
    const Complex w = std::polar(1.0, -2.0 * std::numbers::pi * double(k) / double(n));
    const Complex closed = h[0] + h[1] * w + h[2] * w * w;
    err = std::max(err, std::abs(spec.at(0, k) - closed));
  }
  // Three coefficients determine the whole spectrum: the inverse of the closed
  // form is zero beyond tap 2.
  fft::ComplexSpectrum closed(1, spec.n_freq);
  for (std::size_t k = 0; k < spec.n_freq; ++k) {
    const Complex w = std::polar(1.0, -2.0 * std::numbers::pi * double(k) / double(n));
    closed.set(0, k, h[0] + h[1] * w + h[2] * w * w);
  }
  const Tensor back = fft::irfft(closed, n);
  for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - (i < 3 ? h[i] : 0.0)));
  return finish("kernel_frequency", err, tol, "N=" + std::to_string(n) + fmt(" h=[%.4g,%.4g,%.4g]", h[0], h[1], h[2]));
}

AttentionForms attention_forms(std::size_t n, std::size_t d, std::size_t heads, std::uint64_t seed) {
  if (heads == 0 || d % heads != 0) throw ValidationError("attention: d_model must be divisible by heads");
  std::mt19937_64 rng(seed);
  const Tensor x = randn(rng, {n, d});
  const Tensor wq = randn(rng, {d, d}), wk = randn(rng, {d, d}), wv = randn(rng, {d, d}), wo = randn(rng, {d, d});
  const std::size_t dk = d / heads;
  const double scale = 1.0 / std::sqrt(double(dk));
  const Tensor q = linalg::matmul(x, wq), k = linalg::matmul(x, wk), v = linalg::matmul(x, wv);

  // Standard: each head on its own column slice.
  Tensor concat({n, d});
  for (std::size_t hd = 0; hd < heads; ++hd) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < dk; ++c) dot += q.at(i, hd * dk + c) * k.at(j, hd * dk + c);
        s[j] = dot * scale;
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (double& e : s) z += (e = std::exp(e - mx));
      for (std::size_t c = 0; c < dk; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += s[j] / z * v.at(j, hd * dk + c);
        concat.at(i, hd * dk + c) = acc;
      }
    }
  }

  // Rewritten: heads stacked along rows, one (hn, hn) score matrix, block
  // mask M, softmax restricted to each row's block.
  const std::size_t hn = heads * n;
  Tensor qs({hn, dk}), ks({hn, dk}), vs({hn, dk});
  for (std::size_t hd = 0; hd < heads; ++hd)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < dk; ++c) {
        qs.at(hd * n + i, c) = q.at(i, hd * dk + c);
        ks.at(hd * n + i, c) = k.at(i, hd * dk + c);
        vs.at(hd * n + i, c) = v.at(i, hd * dk + c);
      }
  Tensor scores = linalg::matmul(qs, linalg::transpose(ks));
  scores *= scale;
  Tensor mask({hn, hn});
  for (std::size_t a = 0; a < hn; ++a)
    for (std::size_t b = 0; b < hn; ++b) mask.at(a, b) = (a / n == b / n) ? 1.0 : 0.0;

  AttentionForms out;
  Tensor blockwise({hn, hn}), literal({hn, hn});
  for (std::size_t a = 0; a < hn; ++a) {
    double mx_block = -INFINITY, mx_all = -INFINITY;
    for (std::size_t b = 0; b < hn; ++b) {
      mx_all = std::max(mx_all, scores.at(a, b));
      if (mask.at(a, b) != 0.0) mx_block = std::max(mx_block, scores.at(a, b));
    }
    double z_block = 0, z_all = 0;
    for (std::size_t b = 0; b < hn; ++b) {
      z_all += std::exp(scores.at(a, b) - mx_all);
      if (mask.at(a, b) != 0.0) z_block += std::exp(scores.at(a, b) - mx_block);
    }
    double row = 0;
    for (std::size_t b = 0; b < hn; ++b) {
      blockwise.at(a, b) = mask.at(a, b) != 0.0 ? std::exp(scores.at(a, b) - mx_block) / z_block : 0.0;
      literal.at(a, b) = std::exp(scores.at(a, b) - mx_all) / z_all * mask.at(a, b);
      row += blockwise.at(a, b);
    }
    out.max_row_sum_error = std::max(out.max_row_sum_error, std::abs(row - 1.0));
  }
  auto unstack = [&](const Tensor& stacked) {
    Tensor cat({n, d});
    for (std::size_t hd = 0; hd < heads; ++hd)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < dk; ++c) cat.at(i, hd * dk + c) = stacked.at(hd * n + i, c);
    return linalg::matmul(cat, wo);
  };
  out.standard = linalg::matmul(concat, wo);
  out.blockwise = unstack(linalg::matmul(blockwise, vs));
  out.literal = unstack(linalg::matmul(literal, vs));
  return out;
}

VerificationResult attention_as_matrix(std::size_t n, std::size_t d, std::size_t heads, std::uint64_t seed,
                                       double tol) {
  const AttentionForms f = attention_forms(n, d, heads, seed);
  const double err = std::max(max_abs_diff(f.standard, f.blockwise), f.max_row_sum_error);
  return finish("attention_as_masked_matmul", err, tol,
                "n=" + std::to_string(n) + " d=" + std::to_string(d) + " heads=" + std::to_string(heads) +
                    " seed=" + std::to_string(seed));
}

VerificationResult attention_literal(std::size_t n, std::size_t d, std::size_t heads, std::uint64_t seed,
                                     double tol) {
  const AttentionForms f = attention_forms(n, d, heads, seed);
  return finish("attention_as_masked_matmul[full-row softmax]", max_abs_diff(f.standard, f.literal), tol,
                "n=" + std::to_string(n) + " d=" + std::to_string(d) + " heads=" + std::to_string(heads) +
                    " seed=" + std::to_string(seed),
                false);
}

std::vector<VerificationResult> run_all(std::size_t seeds, std::optional<double> tolerance) {
  const double tol = tolerance.value_or(kLinearTolerance);
  std::vector<VerificationResult> out;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 rng(seed * 7919);
    std::normal_distribution<double> nd;
    const std::array<double, 3> h{nd(rng), nd(rng), nd(rng)};
    out.push_back(circular_conv_theorem(64, 100, seed, tol));
    out.push_back(conv_matrix_equiv(8, 1, 1, 3, seed, tol));
    out.push_back(conv_matrix_equiv(16, 2, 3, 3, seed, tol));
    out.push_back(conv_matrix_equiv(12, 2, 2, 1, seed, tol));
    out.push_back(two_layer_receptive_field(h, 16, tol));
    out.push_back(kernel_frequency(h, 32, tol));
    out.push_back(attention_as_matrix(6, 8, 1, seed, tol));
    out.push_back(attention_as_matrix(6, 8, 2, seed, tol));
    out.push_back(attention_as_matrix(8, 16, 4, seed, tol));
    out.push_back(two_layer_receptive_field_literal(h, 16, tol));
    out.push_back(attention_literal(6, 8, 2, seed, tol));
  }
  return out;
}

bool all_pass(const std::vector<VerificationResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return !r.gated || r.pass; });
}

std::string format_table(const std::vector<VerificationResult>& results) {
  std::ostringstream os;
  char line[512];
  std::snprintf(line, sizeof line, "%-46s %-6s %12s %10s  %s\n", "check", "result", "max_abs_err", "tolerance",
                "instance");
  os << line;
  for (const auto& r : results) {
    const char* status = r.gated ? (r.pass ? "PASS" : "FAIL") : "info";
    std::snprintf(line, sizeof line, "%-46s %-6s %12.3e %10.1e  %s\n", r.name.c_str(), status, r.max_abs_error,
                  r.tolerance, r.instance.c_str());
    os << line;
  }
  return os.str();
}

}  // namespace tlnet::verify
