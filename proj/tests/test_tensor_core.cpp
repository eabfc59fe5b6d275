#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tlnet/blocks.hpp"
#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"
#include "tlnet/gradcheck.hpp"
#include "tlnet/graph.hpp"
#include "tlnet/linalg.hpp"
#include "tlnet/ops.hpp"

using namespace tlnet;

namespace {

Tensor randn(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

Tensor eval(const std::function<Var(Graph&)>& f) {
  Graph g;
  return f(g).value();
}

Tensor triple_loop(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j)
      for (std::size_t k = 0; k < a.dim(1); ++k) c.at(i, j) += a.at(i, k) * b.at(k, j);
  return c;
}

// Direct O(N^2) DFT of one real row.
std::vector<std::complex<double>> direct_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k)
    for (std::size_t m = 0; m < n; ++m)
      out[k] += x[m] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * m % n) / double(n));
  return out;
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix: returns eigenvalues
// descending with eigenvectors as columns.
std::pair<std::vector<double>, Tensor> sym_eig(Tensor a) {
  const std::size_t n = a.dim(0);
  Tensor v = Tensor::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a.at(p, q)) < 1e-300) continue;
        const double theta = (a.at(q, q) - a.at(p, p)) / (2 * a.at(p, q));
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a.at(i, i) > a.at(j, j); });
  std::vector<double> vals(n);
  Tensor vecs({n, n});
  for (std::size_t c = 0; c < n; ++c) {
    vals[c] = a.at(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) vecs.at(r, c) = v.at(r, order[c]);
  }
  return {vals, vecs};
}

}  // namespace

TEST(Tensor, RejectsSizeMismatchAndNonFinite) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({2}, {1, NAN}), NumericError);
  EXPECT_THROW(Tensor({1}, {INFINITY}), NumericError);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Matmul, Examples) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  EXPECT_TRUE(eval([&](Graph& g) { return ops::matmul(g.leaf(Tensor::identity(2)), g.leaf(a)); })
                  .bitwise_equal(a));
  EXPECT_EQ(max_abs_diff(eval([&](Graph& g) { return ops::matmul(g.leaf(a), g.leaf(Tensor({2, 2}))); }),
                         Tensor({2, 2})),
            0.0);
  std::mt19937_64 rng(1);
  const Tensor x = randn(rng, {3, 4}), y = randn(rng, {4, 2});
  EXPECT_LE(max_abs_diff(eval([&](Graph& g) { return ops::matmul(g.leaf(x), g.leaf(y)); }), triple_loop(x, y)),
            1e-12);
  Graph g;
  EXPECT_THROW(ops::matmul(g.leaf(x), g.leaf(x)), DimensionError);
}

TEST(MaskedMatmul, Examples) {
  std::mt19937_64 rng(2);
  const Tensor w = randn(rng, {5, 6}), x = randn(rng, {6, 3});
  const Tensor ones = Tensor::full({5, 6}, 1.0);
  EXPECT_TRUE(eval([&](Graph& g) { return ops::masked_matmul(g.leaf(w), ones, g.leaf(x)); })
                  .bitwise_equal(eval([&](Graph& g) { return ops::matmul(g.leaf(w), g.leaf(x)); })));

  {
    Graph g;
    const Var wv = g.leaf(w, true);
    const Var y = ops::masked_matmul(wv, Tensor({5, 6}), g.leaf(x));
    EXPECT_EQ(max_abs_diff(y.value(), Tensor({5, 3})), 0.0);
    const Gradients gr = g.backward(ops::sum(y));
    for (double v : gr[wv].data()) EXPECT_EQ(v, 0.0);
  }

  const Tensor band = blocks::build_default_mask(5, 6, {3}, 0);
  Tensor dense = w;
  for (std::size_t i = 0; i < w.size(); ++i) dense[i] *= band[i];
  EXPECT_LE(max_abs_diff(eval([&](Graph& g) { return ops::masked_matmul(g.leaf(w), band, g.leaf(x)); }),
                         triple_loop(dense, x)),
            1e-12);

  Tensor bad = ones;
  bad[3] = 0.5;
  Graph g;
  EXPECT_THROW(ops::masked_matmul(g.leaf(w), bad, g.leaf(x)), ValidationError);
}

TEST(MaskedMatmul, GradientExactlyZeroWhereMasked) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor mask({6, 6});
    std::bernoulli_distribution coin(0.4);
    for (double& m : mask.data()) m = coin(rng) ? 1.0 : 0.0;
    Graph g;
    const Var w = g.leaf(randn(rng, {6, 6}), true);
    const Var y = ops::masked_matmul(w, mask, g.leaf(randn(rng, {6, 4})));
    const Gradients gr = g.backward(ops::sum(ops::mul(y, y)));
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] == 0.0) {
        EXPECT_EQ(gr[w][i], 0.0);
      }
    }
  }
}

TEST(Conv1d, Examples) {
  const Tensor x({1, 4}, {1, 2, 3, 4});
  for (auto mode : {ops::ConvMode::circular, ops::ConvMode::same_zero_pad}) {
    EXPECT_TRUE(eval([&](Graph& g) { return ops::conv1d(g.leaf(x), g.leaf(blocks::delta_kernels(1, 1, 3)), mode); })
                    .bitwise_equal(x));
  }
  const Tensor shift({1, 1, 3}, {1, 0, 0});
  const Tensor y = eval([&](Graph& g) { return ops::conv1d(g.leaf(x), g.leaf(shift), ops::ConvMode::circular); });
  EXPECT_EQ(y.vec(), (std::vector<double>{4, 1, 2, 3}));
  // Brute-force circular convolution sum over m of x(m) h[(n - m) mod N] with
  // h = delta at 1.
  std::vector<double> h{0, 1, 0, 0}, ref(4);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t m = 0; m < 4; ++m) ref[n] += x[m] * h[(n + 4 - m) % 4];
  EXPECT_EQ(y.vec(), ref);

  std::mt19937_64 rng(4);
  const Tensor xs = randn(rng, {2, 16}), k = randn(rng, {3, 2, 3});
  for (auto mode : {ops::ConvMode::circular, ops::ConvMode::same_zero_pad}) {
    Tensor ref2({3, 16});
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t n = 0; n < 16; ++n)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t j = 0; j < 3; ++j) {
            long idx = long(n) + long(j) - 1;
            if (mode == ops::ConvMode::circular) idx = (idx + 16) % 16;
            else if (idx < 0 || idx >= 16) continue;
            ref2.at(o, n) += k.at(o, c, j) * xs.at(c, std::size_t(idx));
          }
    EXPECT_LE(max_abs_diff(eval([&](Graph& g) { return ops::conv1d(g.leaf(xs), g.leaf(k), mode); }), ref2), 1e-12);
  }
  Graph g;
  EXPECT_THROW(ops::conv1d(g.leaf(x), g.leaf(Tensor({1, 1, 2})), ops::ConvMode::circular), ValidationError);
  EXPECT_THROW(ops::conv1d(g.leaf(x), g.leaf(Tensor({1, 1, 5})), ops::ConvMode::circular), ValidationError);
}

TEST(Fft, Examples) {
  const fft::ComplexSpectrum dc = fft::rfft(Tensor::full({8}, 2.5));
  ASSERT_EQ(dc.n_freq, 5u);
  EXPECT_NEAR(dc.at(0, 0).real(), 20.0, 1e-12);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LE(std::abs(dc.at(0, k)), 1e-12);
  EXPECT_EQ(dc.at(0, 0).imag(), 0.0);
  EXPECT_EQ(dc.at(0, 4).imag(), 0.0);

  Tensor tone({8});
  for (std::size_t n = 0; n < 8; ++n) tone[n] = std::cos(2 * std::numbers::pi * double(n) / 8);
  const fft::ComplexSpectrum ts = fft::rfft(tone);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(ts.at(0, k).real(), k == 1 ? 4.0 : 0.0, 1e-12);
    EXPECT_NEAR(ts.at(0, k).imag(), 0.0, 1e-12);
  }

  const Tensor back = fft::irfft(dc, 8);
  for (double v : back.data()) EXPECT_NEAR(v, 2.5, 1e-12);
  EXPECT_THROW(fft::irfft(dc, 12), DimensionError);
}

TEST(Fft, MatchesDirectDftAndRoundTrips) {
  std::mt19937_64 rng(5);
  for (std::size_t n : {16u, 15u, 7u, 96u, 104u, 336u}) {
    const Tensor x = randn(rng, {2, n});
    const fft::ComplexSpectrum s = fft::rfft(x);
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> row(x.data().begin() + long(c * n), x.data().begin() + long((c + 1) * n));
      const auto ref = direct_dft(row);
      for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_LE(std::abs(s.at(c, k) - ref[k]), 1e-10) << n;
    }
    EXPECT_LE(max_abs_diff(fft::irfft(s, n), x), 1e-12) << n;
  }
}

TEST(Fft, RoundTripAllLengthsAndParseval) {
  std::mt19937_64 rng(6);
  for (std::size_t n = 4; n <= 512; ++n) {
    const Tensor x = randn(rng, {n});
    const fft::ComplexSpectrum s = fft::rfft(x);
    ASSERT_LE(max_abs_diff(fft::irfft(s, n), x), 1e-12) << n;
    double energy = 0, spec = 0;
    for (double v : x.data()) energy += v * v;
    for (std::size_t k = 0; k < s.n_freq; ++k) {
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      spec += (edge ? 1.0 : 2.0) * std::norm(s.at(0, k));
    }
    ASSERT_LE(std::abs(spec / double(n) - energy) / energy, 1e-10) << n;
  }
}

TEST(Fft, InverseMatchesDirectSum) {
  std::mt19937_64 rng(7);
  for (std::size_t n : {16u, 9u}) {
    fft::ComplexSpectrum s(1, n / 2 + 1);
    const Tensor re = randn(rng, {n / 2 + 1}), im = randn(rng, {n / 2 + 1});
    for (std::size_t k = 0; k < s.n_freq; ++k) {
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      s.set(0, k, {re[k], edge ? 0.0 : im[k]});
    }
    const Tensor y = fft::irfft(s, n);
    for (std::size_t m = 0; m < n; ++m) {
      std::complex<double> acc = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::complex<double> xk = k < s.n_freq ? s.at(0, k) : std::conj(s.at(0, n - k));
        acc += xk * std::polar(1.0, 2 * std::numbers::pi * double(k * m % n) / double(n));
      }
      EXPECT_NEAR(y[m], acc.real() / double(n), 1e-10);
    }
  }
}

TEST(Fft, CircularConvolutionTheorem) {
  std::mt19937_64 rng(8);
  const std::size_t n = 15, c = n / 2;
  const Tensor x = randn(rng, {1, n}), h = randn(rng, {n});
  // conv1d cross-correlates about the kernel centre; a full-length kernel
  // k[j] = h[(c - j) mod n] turns it into circular convolution with h.
  Tensor k({1, 1, n});
  for (std::size_t j = 0; j < n; ++j) k[j] = h[(c + n - j) % n];
  const Tensor y = eval([&](Graph& g) { return ops::conv1d(g.leaf(x), g.leaf(k), ops::ConvMode::circular); });
  const auto sy = fft::rfft(y.reshaped({n})), sx = fft::rfft(x.reshaped({n})), sh = fft::rfft(h);
  for (std::size_t f = 0; f < sy.n_freq; ++f) EXPECT_LE(std::abs(sy.at(0, f) - sx.at(0, f) * sh.at(0, f)), 1e-10);
}

TEST(Svd, Examples) {
  const auto id = linalg::svd(Tensor::identity(3));
  EXPECT_EQ(id.s.vec(), (std::vector<double>{1, 1, 1}));
  EXPECT_LE(max_abs_diff(linalg::reconstruct(id), Tensor::identity(3)), 1e-15);
  const auto d = linalg::svd(Tensor({2, 2}, {3, 0, 0, 1}));
  EXPECT_NEAR(d.s[0], 3.0, 1e-15);
  EXPECT_NEAR(d.s[1], 1.0, 1e-15);
  EXPECT_THROW(linalg::svd(Tensor({3, 2})), DimensionError);
}

TEST(Svd, InvariantsAndEigenOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t k = 4, n = 12;
    const Tensor x = randn(rng, {k, n});
    const auto f = linalg::svd(x);
    for (std::size_t i = 0; i + 1 < k; ++i) EXPECT_GE(f.s[i], f.s[i + 1]);
    EXPECT_LE(max_abs_diff(linalg::reconstruct(f), x), 1e-8);
    EXPECT_LE(max_abs_diff(linalg::matmul(linalg::transpose(f.u), f.u), Tensor::identity(k)), 1e-8);
    EXPECT_LE(max_abs_diff(linalg::matmul(f.v, linalg::transpose(f.v)), Tensor::identity(k)), 1e-8);
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t arg = 0;
      for (std::size_t r = 1; r < k; ++r)
        if (std::abs(f.u.at(r, c)) > std::abs(f.u.at(arg, c))) arg = r;
      EXPECT_GE(f.u.at(arg, c), 0.0);
    }

    auto [vals, vecs] = sym_eig(linalg::matmul(x, linalg::transpose(x)));
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t arg = 0;
      for (std::size_t r = 1; r < k; ++r)
        if (std::abs(vecs.at(r, c)) > std::abs(vecs.at(arg, c)) + 1e-12) arg = r;
      if (vecs.at(arg, c) < 0)
        for (std::size_t r = 0; r < k; ++r) vecs.at(r, c) = -vecs.at(r, c);
    }
    const Tensor vref = linalg::matmul(linalg::transpose(vecs), x);
    for (std::size_t i = 0; i < k; ++i) {
      const double s = std::sqrt(vals[i]);
      EXPECT_NEAR(f.s[i], s, 1e-10);
      for (std::size_t r = 0; r < k; ++r) EXPECT_NEAR(f.u.at(r, i), vecs.at(r, i), 1e-8);
      for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(f.v.at(i, j), vref.at(i, j) / s, 1e-8);
    }
  }
}

TEST(Svd, Deterministic) {
  std::mt19937_64 rng(10);
  const Tensor x = randn(rng, {5, 9});
  const auto a = linalg::svd(x), b = linalg::svd(x);
  EXPECT_TRUE(a.u.bitwise_equal(b.u));
  EXPECT_TRUE(a.s.bitwise_equal(b.s));
  EXPECT_TRUE(a.v.bitwise_equal(b.v));
}

TEST(Svd, NonConvergenceCarriesResidual) {
  std::mt19937_64 rng(11);
  linalg::SvdOptions opts;
  opts.max_sweeps = 1;
  try {
    linalg::svd(randn(rng, {6, 10}), opts);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos) << e.what();
  }
}

TEST(Activation, Examples) {
  const Tensor r = eval([](Graph& g) { return ops::activation(g.leaf(Tensor({3}, {-1, 0, 2})), ops::Activation::relu); });
  EXPECT_EQ(r.vec(), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(eval([](Graph& g) { return ops::activation(g.leaf(Tensor::scalar(0)), ops::Activation::tanh); }).item(),
            0.0);
  std::mt19937_64 rng(12);
  const Tensor x = randn(rng, {20});
  Graph g;
  const Var xv = g.leaf(x, true);
  const Gradients gr = g.backward(ops::sum(ops::activation(xv, ops::Activation::gelu)));
  for (std::size_t i = 0; i < 20; ++i) {
    auto gelu = [](double v) { return 0.5 * v * (1 + std::erf(v / std::sqrt(2.0))); };
    const double h = 1e-5;
    const double fd = (gelu(x[i] + h) - gelu(x[i] - h)) / (2 * h);
    EXPECT_LE(std::abs(gr[xv][i] - fd) / std::max(std::abs(fd), 1e-12), 1e-6);
  }
  EXPECT_EQ(ops::parse_activation("gelu"), ops::Activation::gelu);
  EXPECT_THROW(ops::parse_activation("swish"), ValidationError);
}

TEST(Backward, Examples) {
  {
    Graph g;
    const Var x = g.leaf(Tensor({3}, {4, 5, 6}), true);
    const Gradients gr = g.backward(ops::sum(x));
    EXPECT_EQ(gr[x].vec(), (std::vector<double>{1, 1, 1}));
  }
  std::mt19937_64 rng(13);
  gradcheck::Options o;
  o.rel_tol = 1e-5;
  const auto r = gradcheck::check("sum(matmul)", [](const auto& v) { return ops::sum(ops::matmul(v[0], v[1])); },
                                  {randn(rng, {3, 4}), randn(rng, {4, 2})}, o);
  EXPECT_TRUE(r.pass) << r.worst;
  const auto chain = gradcheck::check(
      "fft chain",
      [](const auto& v) {
        const Var y = ops::irfft(ops::spectral_matmul(ops::rfft(v[0]), v[1], v[2]), 10);
        return ops::sum(ops::mul(y, y));
      },
      {randn(rng, {2, 10}), randn(rng, {2, 6, 6}), randn(rng, {2, 6, 6})});
  EXPECT_TRUE(chain.pass) << chain.worst;
}

TEST(Backward, RejectsNonScalarAndReuse) {
  Graph g;
  const Var x = g.leaf(Tensor({3}, {1, 2, 3}), true);
  EXPECT_THROW(g.backward(x), ValidationError);
  const Var l = ops::sum(x);
  g.backward(l);
  EXPECT_THROW(g.backward(l), StateError);
}

TEST(Backward, VisitsInReverseInsertionOrder) {
  Graph g;
  const Var a = g.leaf(Tensor::scalar(2.0), true);
  const Var b = ops::mul(a, a);
  const Var c = ops::add(b, a);
  EXPECT_LT(a.id(), b.id());
  EXPECT_LT(b.id(), c.id());
  const Gradients gr = g.backward(c);
  EXPECT_EQ(gr[a].item(), 5.0);
}
