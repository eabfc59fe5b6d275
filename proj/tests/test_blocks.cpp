#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <set>

#include "tlnet/blocks.hpp"
#include "tlnet/error.hpp"
#include "tlnet/gradcheck.hpp"
#include "tlnet/linalg.hpp"

using namespace tlnet;

namespace {

Tensor randn(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

Tensor ft(const Tensor& x, const Tensor& wr, const Tensor& wi, std::size_t n_out) {
  Graph g;
  return blocks::ft_block_forward(g.leaf(x), g.leaf(wr), g.leaf(wi), n_out).value();
}

// Explicit DFT matrices: out = Re(F_inv_out * W * F_in * x) with the
// Hermitian-extension weights c_k folded into the inverse.
Tensor ft_dense_oracle(const Tensor& x, const Tensor& wr, const Tensor& wi, std::size_t n_out) {
  using C = std::complex<double>;
  const std::size_t ch = x.dim(0), n_in = x.dim(1), fi = n_in / 2 + 1, fo = n_out / 2 + 1;
  Tensor out({ch, n_out});
  for (std::size_t c = 0; c < ch; ++c) {
    std::vector<C> spec(fi), mixed(fo);
    for (std::size_t k = 0; k < fi; ++k)
      for (std::size_t n = 0; n < n_in; ++n)
        spec[k] += x.at(c, n) * std::polar(1.0, -2 * std::numbers::pi * double(k * n) / double(n_in));
    for (std::size_t r = 0; r < fo; ++r)
      for (std::size_t k = 0; k < fi; ++k) mixed[r] += C(wr.at(c, r, k), wi.at(c, r, k)) * spec[k];
    for (std::size_t m = 0; m < n_out; ++m) {
      C acc = 0;
      for (std::size_t k = 0; k < fo; ++k) {
        const double weight = (k == 0 || (n_out % 2 == 0 && k == n_out / 2)) ? 1.0 : 2.0;
        acc += weight * mixed[k] * std::polar(1.0, 2 * std::numbers::pi * double(k * m) / double(n_out));
      }
      out.at(c, m) = acc.real() / double(n_out);
    }
  }
  return out;
}

Tensor dense_time_map(const Tensor& x, const Tensor& w) {
  Tensor out({x.dim(0), w.dim(0)});
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t i = 0; i < w.dim(0); ++i)
      for (std::size_t j = 0; j < w.dim(1); ++j) out.at(c, i) += w.at(i, j) * x.at(c, j);
  return out;
}

}  // namespace

TEST(FtBlock, IdentityAndZero) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {16u, 15u, 96u}) {
    const Tensor x = randn(rng, {3, n});
    const auto p = blocks::FtBlockParams::identity(3, n, n);
    EXPECT_LE(max_abs_diff(ft(x, p.w_re, p.w_im, n), x), 1e-10);
    EXPECT_EQ(max_abs_diff(ft(x, Tensor(p.w_re.shape()), Tensor(p.w_im.shape()), n), Tensor({3, n})), 0.0);
  }
}

TEST(FtBlock, MatchesDenseDftOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = randn(rng, {2, 16});
  const Tensor wr = randn(rng, {2, 5, 9}), wi = randn(rng, {2, 5, 9});
  EXPECT_LE(max_abs_diff(ft(x, wr, wi, 8), ft_dense_oracle(x, wr, wi, 8)), 1e-9);
  const Tensor wr2 = randn(rng, {2, 4, 9}), wi2 = randn(rng, {2, 4, 9});
  EXPECT_LE(max_abs_diff(ft(x, wr2, wi2, 7), ft_dense_oracle(x, wr2, wi2, 7)), 1e-9);
}

TEST(FtBlock, LinearInInput) {
  std::mt19937_64 rng(3);
  const Tensor x = randn(rng, {2, 12}), y = randn(rng, {2, 12});
  const Tensor wr = randn(rng, {2, 7, 7}), wi = randn(rng, {2, 7, 7});
  Tensor combo = x;
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = 2.5 * x[i] - 0.75 * y[i];
  Tensor expect = ft(x, wr, wi, 12);
  const Tensor fy = ft(y, wr, wi, 12);
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = 2.5 * expect[i] - 0.75 * fy[i];
  EXPECT_LE(max_abs_diff(ft(combo, wr, wi, 12), expect), 1e-10);
}

TEST(FtBlock, LengthMismatchThrows) {
  Graph g;
  EXPECT_THROW(blocks::ft_block_forward(g.leaf(Tensor({2, 10})), g.leaf(Tensor({2, 5, 5})),
                                        g.leaf(Tensor({2, 5, 5})), 8),
               DimensionError);
}

TEST(SvdBlock, ShapeAndOrientation) {
  std::mt19937_64 rng(4);
  Graph g;
  for (auto shape : {Shape{3, 5}, Shape{4, 4}, Shape{1, 9}, Shape{2, 3, 6}}) {
    const Shape ps(shape.end() - 2, shape.end());
    const Var y = blocks::svd_block_forward(g.leaf(randn(rng, shape)), g.leaf(randn(rng, ps)),
                                            ops::Activation::relu);
    EXPECT_EQ(y.shape(), shape);
  }
  try {
    blocks::svd_block_forward(g.leaf(Tensor({5, 3})), g.leaf(Tensor({5, 3})), ops::Activation::relu);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("transpose"), std::string::npos);
  }
}

TEST(SvdBlock, SingularValueProduct) {
  // Singular values are stored nonincreasing, so a phi with singular values
  // {2, 5} contributes [5, 2].
  Graph g;
  const Var x = g.leaf(Tensor({2, 3}, {3, 0, 0, 0, 1, 0}));
  const Var phi = g.leaf(Tensor({2, 3}, {0, 0, 2, 0, 5, 0}));
  const Var s = ops::mul(ops::svd(x).s, ops::svd(phi).s);
  EXPECT_NEAR(s.value()[0], 15.0, 1e-12);
  EXPECT_NEAR(s.value()[1], 2.0, 1e-12);
}

TEST(SvdBlock, MatchesScriptedReference) {
  std::mt19937_64 rng(5);
  const Tensor x = randn(rng, {4, 32}), phi = randn(rng, {4, 32});
  Graph g;
  const Tensor y = blocks::svd_block_forward(g.leaf(x), g.leaf(phi), ops::Activation::relu).value();
  const auto fx = linalg::svd(x), fp = linalg::svd(phi);
  Tensor ref({4, 32});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      double acc = 0;
      for (std::size_t r = 0; r < 4; ++r) {
        acc += fx.u.at(i, r) * fp.u.at(i, r) * fx.s[r] * fp.s[r] * fx.v.at(r, j) * fp.v.at(r, j);
      }
      ref.at(i, j) = std::max(acc, 0.0);
    }
  EXPECT_LE(max_abs_diff(y, ref), 1e-8);
}

TEST(SvdBlock, DeterministicAndBatchMatchesPerSample) {
  std::mt19937_64 rng(6);
  const Tensor x = randn(rng, {3, 2, 6}), phi = randn(rng, {2, 6});
  auto run = [&](const Tensor& in) {
    Graph g;
    return blocks::svd_block_forward(g.leaf(in), g.leaf(phi), ops::Activation::gelu).value();
  };
  const Tensor a = run(x), b = run(x);
  EXPECT_TRUE(a.bitwise_equal(b));
  for (std::size_t s = 0; s < 3; ++s) {
    Tensor one({2, 6});
    std::copy_n(x.data().begin() + long(s * 12), 12, one.data().begin());
    const Tensor y = run(one);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(a[s * 12 + i], y[i]);
  }
}

TEST(SparseMatrix, FullEmptyAndDefaultMask) {
  std::mt19937_64 rng(7);
  const Tensor x = randn(rng, {3, 40}), phi = randn(rng, {20, 40});
  auto run = [&](const Tensor& mask) {
    Graph g;
    return blocks::sparse_matrix_forward(g.leaf(x), g.leaf(phi), mask).value();
  };
  EXPECT_LE(max_abs_diff(run(Tensor::full({20, 40}, 1.0)), dense_time_map(x, phi)), 1e-12);
  EXPECT_EQ(max_abs_diff(run(Tensor({20, 40})), Tensor({3, 20})), 0.0);
  const Tensor mask = blocks::build_default_mask(20, 40, {3, 9, 27}, 4);
  Tensor masked = phi;
  for (std::size_t i = 0; i < phi.size(); ++i) masked[i] *= mask[i];
  EXPECT_LE(max_abs_diff(run(mask), dense_time_map(x, masked)), 1e-12);
}

TEST(SparseMatrix, ParamsValidateAndMaskedGradientsVanish) {
  EXPECT_THROW(blocks::SparseMatrixParams(Tensor({2, 2}), Tensor({2, 2}, {1, 0, 2, 1})), ValidationError);
  EXPECT_THROW(blocks::SparseMatrixParams(Tensor({2, 2}), Tensor({2, 3})), DimensionError);
  std::mt19937_64 rng(8);
  const blocks::SparseMatrixParams p(randn(rng, {8, 8}), blocks::build_default_mask(8, 8, {3}, 1));
  Graph g;
  const Var w = g.leaf(p.phi_m, true);
  const Var y = blocks::sparse_matrix_forward(g.leaf(randn(rng, {2, 3, 8})), w, p.mask());
  const Gradients gr = g.backward(ops::sum(ops::mul(y, y)));
  for (std::size_t i = 0; i < 64; ++i) {
    if (p.mask()[i] == 0.0) {
      EXPECT_EQ(gr[w][i], 0.0);
    }
  }
}

TEST(DefaultMask, Examples) {
  EXPECT_TRUE(blocks::build_default_mask(4, 4, {1}, 0).bitwise_equal(Tensor::identity(4)));
  const Tensor m3 = blocks::build_default_mask(8, 8, {3}, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 8; ++j) row += m3.at(i, j);
    EXPECT_EQ(row, 3.0);
  }
  EXPECT_EQ(m3.at(0, 7), 1.0);  // wraps around

  const std::size_t n = 64;
  const Tensor m = blocks::build_default_mask(n, n, {3, 9}, 2);
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    for (long w : {3L, 9L})
      for (long d = -w / 2; d <= w / 2; ++d) cells.insert({i, std::size_t((long(i) + d + long(n)) % long(n))});
  }
  for (std::size_t row : {0u, 32u})
    for (std::size_t j = 0; j < n; ++j) cells.insert({row, j});
  double nnz = 0;
  for (double v : m.data()) nnz += v;
  EXPECT_EQ(nnz, double(cells.size()));
  for (auto [i, j] : cells) EXPECT_EQ(m.at(i, j), 1.0);

  EXPECT_THROW(blocks::build_default_mask(4, 4, {2}, 0), ValidationError);
  EXPECT_THROW(blocks::build_default_mask(4, 4, {3}, 5), ValidationError);
}

TEST(ConvBlock, IdentityZeroAndMatrixForm) {
  std::mt19937_64 rng(9);
  const Tensor x = randn(rng, {3, 10});
  auto run = [&](const Tensor& k) {
    Graph g;
    return blocks::conv_block_forward(g.leaf(x), g.leaf(k)).value();
  };
  EXPECT_TRUE(run(blocks::delta_kernels(3, 3, 3)).bitwise_equal(x));
  EXPECT_EQ(max_abs_diff(run(Tensor({2, 3, 3})), Tensor({2, 10})), 0.0);

  // Conv as a (C_out*N, C_in*N) banded matrix acting on the flattened input.
  const std::size_t ci = 3, co = 2, n = 10, k = 5;
  const Tensor kern = randn(rng, {co, ci, k});
  Tensor mat({co * n, ci * n});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long src = long(t) + long(j) - long(k / 2);
          if (src >= 0 && src < long(n)) mat.at(o * n + t, c * n + std::size_t(src)) = kern.at(o, c, j);
        }
  const Tensor ref = linalg::matmul(mat, x.reshaped({ci * n, 1})).reshaped({co, n});
  EXPECT_LE(max_abs_diff(run(kern), ref), 1e-10);
}

TEST(Blocks, ParameterGradientsAtThreeConfigurations) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    for (const auto& r : gradcheck::block_suite(seed)) {
      EXPECT_TRUE(r.pass) << r.name << " seed " << seed << ": " << r.worst;
    }
  }
}
