#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tlnet/error.hpp"
#include "tlnet/metrics.hpp"

using namespace tlnet;

namespace {

Tensor randn(std::mt19937_64& rng, Shape shape) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = d(rng);
  return t;
}

// Independent scripted computation: long double accumulation, single-pass
// Pearson from raw moments.
struct Oracle {
  long double mse = 0, mae = 0, corr = 0;
};

Oracle scripted(const Tensor& p, const Tensor& t) {
  Oracle o;
  const std::size_t b = p.dim(0), d = p.dim(1), tau = p.dim(2);
  for (std::size_t w = 0; w < b; ++w)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t k = 0; k < tau; ++k) {
        const long double e = (long double)p.at(w, c, k) - t.at(w, c, k);
        o.mse += e * e;
        o.mae += e < 0 ? -e : e;
      }
  o.mse /= (long double)(b * d * tau);
  o.mae /= (long double)(b * d * tau);
  for (std::size_t c = 0; c < d; ++c) {
    long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, n = (long double)(b * tau);
    for (std::size_t w = 0; w < b; ++w)
      for (std::size_t k = 0; k < tau; ++k) {
        const long double x = p.at(w, c, k), y = t.at(w, c, k);
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
      }
    o.corr += (n * sxy - sx * sy) / sqrtl((n * sxx - sx * sx) * (n * syy - sy * sy));
  }
  o.corr /= (long double)d;
  return o;
}

metrics::MetricsReport report(double mse, double mae, std::size_t tau = 96) {
  metrics::MetricsReport r;
  r.dataset = "ETTh1";
  r.arch = "ft_svd";
  r.pred_len = tau;
  r.mse = mse;
  r.mae = mae;
  return r;
}

const std::filesystem::path kTable = std::filesystem::path(TLNET_SOURCE_DIR) / "data/baselines/table2.csv";

}  // namespace

TEST(Metrics, PerfectPredictor) {
  std::mt19937_64 rng(1);
  const Tensor t = randn(rng, {4, 3, 5});
  const metrics::Scores s = metrics::score(t, t);
  EXPECT_EQ(s.mse, 0.0);
  EXPECT_EQ(s.mae, 0.0);
  EXPECT_NEAR(s.corr, 1.0, 1e-15);
  EXPECT_TRUE(s.excluded_channels.empty());
}

TEST(Metrics, NegatedZeroMeanTargetHasCorrMinusOne) {
  std::mt19937_64 rng(2);
  Tensor t = randn(rng, {3, 2, 6});
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0;
    for (std::size_t w = 0; w < 3; ++w)
      for (std::size_t k = 0; k < 6; ++k) m += t.at(w, c, k);
    m /= 18;
    for (std::size_t w = 0; w < 3; ++w)
      for (std::size_t k = 0; k < 6; ++k) t.at(w, c, k) -= m;
  }
  Tensor neg = t;
  neg *= -1.0;
  EXPECT_NEAR(metrics::score(neg, t).corr, -1.0, 1e-15);
}

TEST(Metrics, MatchesScriptedComputation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Tensor p = randn(rng, {7, 3, 4}), t = randn(rng, {7, 3, 4});
    const metrics::Scores s = metrics::score(p, t);
    const Oracle o = scripted(p, t);
    EXPECT_NEAR(s.mse, double(o.mse), 1e-12);
    EXPECT_NEAR(s.mae, double(o.mae), 1e-12);
    EXPECT_NEAR(s.corr, double(o.corr), 1e-12);
  }
}

TEST(Metrics, CorrInvariantUnderPositiveAffinePerChannel) {
  std::mt19937_64 rng(3);
  const Tensor p = randn(rng, {5, 3, 4}), t = randn(rng, {5, 3, 4});
  Tensor q = p;
  const double scale[3] = {2.5, 0.1, 7.0}, shift[3] = {-3.0, 4.0, 0.5};
  for (std::size_t w = 0; w < 5; ++w)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < 4; ++k) q.at(w, c, k) = scale[c] * p.at(w, c, k) + shift[c];
  EXPECT_NEAR(metrics::score(q, t).corr, metrics::score(p, t).corr, 1e-12);
}

TEST(Metrics, InvariantToWindowOrder) {
  std::mt19937_64 rng(4);
  const Tensor p = randn(rng, {6, 2, 3}), t = randn(rng, {6, 2, 3});
  Tensor pr({6, 2, 3}), tr({6, 2, 3});
  const std::size_t perm[6] = {3, 0, 5, 1, 4, 2};
  for (std::size_t w = 0; w < 6; ++w)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 3; ++k) {
        pr.at(w, c, k) = p.at(perm[w], c, k);
        tr.at(w, c, k) = t.at(perm[w], c, k);
      }
  const metrics::Scores a = metrics::score(p, t), b = metrics::score(pr, tr);
  EXPECT_NEAR(a.mse, b.mse, 1e-14);
  EXPECT_NEAR(a.mae, b.mae, 1e-14);
  EXPECT_NEAR(a.corr, b.corr, 1e-14);
}

TEST(Metrics, ConstantChannelsExcludedAndCounted) {
  std::mt19937_64 rng(5);
  const Tensor t = randn(rng, {3, 2, 4});
  Tensor p = t;
  for (std::size_t w = 0; w < 3; ++w)
    for (std::size_t k = 0; k < 4; ++k) p.at(w, 1, k) = 2.0;
  const metrics::Scores s = metrics::score(p, t);
  ASSERT_EQ(s.excluded_channels, std::vector<std::size_t>{1});
  EXPECT_NEAR(s.corr, 1.0, 1e-15);
  const Tensor zeros({3, 2, 4});
  EXPECT_TRUE(std::isnan(metrics::score(zeros, zeros).corr));
}

TEST(Metrics, EmptyOrMismatchedInputsRejected) {
  EXPECT_THROW(metrics::score(Tensor({0, 2, 3}), Tensor({0, 2, 3})), ValidationError);
  EXPECT_THROW(metrics::score(Tensor({1, 2, 3}), Tensor({1, 2, 4})), DimensionError);
}

TEST(Metrics, NaiveLastValueRepeatsLastInput) {
  Tensor series({30, 1});
  for (std::size_t i = 0; i < 30; ++i) series.at(i, 0) = double(i);
  const data::WindowedDataset ds(series, 0, 30, 5, 3);
  const metrics::Forecast f = metrics::naive_last_value(ds);
  ASSERT_EQ(f.pred.shape(), (Shape{ds.size(), 1, 3}));
  for (std::size_t w = 0; w < ds.size(); ++w)
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(f.pred.at(w, 0, k), double(w + 4));
      EXPECT_EQ(f.target.at(w, 0, k), double(w + 5 + k));
    }
  // Errors are 1, 2, 3 at every window.
  EXPECT_NEAR(metrics::score(f.pred, f.target).mse, 14.0 / 3.0, 1e-12);
}

TEST(Metrics, ForecastMatchesModelPredict) {
  data::SyntheticSpec spec;
  spec.steps = 300;
  const data::Dataset ds = data::make_dataset(data::synthetic_series(spec), 16, 8);
  ModelConfig c;
  c.channels = 2;
  c.input_len = 16;
  c.pred_len = 8;
  c.mask = blocks::MaskSpec{{3}, 1};
  const Model m(c);
  const metrics::Forecast f = metrics::forecast(m, ds.test, nullptr, 7);
  const auto [x, y] = ds.test.batch({0, 5});
  const Tensor p = m.predict(x);
  for (std::size_t c2 = 0; c2 < 2; ++c2)
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_EQ(f.pred.at(5, c2, k), p.at(1, c2, k));
      EXPECT_EQ(f.target.at(0, c2, k), y.at(0, c2, k));
    }
  const metrics::Forecast orig = metrics::forecast(m, ds.test, &ds.stats, 7);
  EXPECT_NEAR(orig.target.at(0, 1, 0), f.target.at(0, 1, 0) * ds.stats.std[1] + ds.stats.mean[1], 1e-12);
}

TEST(Metrics, ReportCsvHasMetricColumnsAndIsStable) {
  const std::string csv = metrics::report_csv({report(0.4, 0.41)});
  const std::string header = csv.substr(0, csv.find('\n'));
  for (const char* col : {"mse", "mae", "corr", "n_windows", "seed", "config_hash"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  EXPECT_EQ(csv, metrics::report_csv({report(0.4, 0.41)}));
  EXPECT_NE(csv.find("0.40000000000000002"), std::string::npos);
}

TEST(Compare, PublishedTableCells) {
  const auto table = metrics::load_published(kTable);
  EXPECT_EQ(table.size(), 9u * 4u * 9u);
  const auto cell = [&](const std::string& ds, std::size_t h, const std::string& model) {
    for (const auto& r : table)
      if (r.dataset == ds && r.horizon == h && r.model == model) return r;
    ADD_FAILURE() << ds << "/" << h << "/" << model;
    return metrics::PublishedRow{};
  };
  EXPECT_EQ(cell("ETTh1", 96, "FT-Matrix").mse, 0.366);
  EXPECT_EQ(cell("ETTh1", 96, "FT-Matrix").mae, 0.388);
  EXPECT_EQ(cell("ETTh1", 96, "FT-SVD").mse, 0.371);
  EXPECT_EQ(cell("ETTh1", 96, "FT-SVD").mae, 0.391);
  EXPECT_EQ(cell("ILI", 24, "NLinear").mse, 1.683);
}

TEST(Compare, DeltasAgainstPublished) {
  const auto table = metrics::load_published(kTable);
  const auto deltas = metrics::compare_to_published(report(0.40, 0.391), table, "FT-SVD");
  ASSERT_EQ(deltas.size(), 9u);
  const auto own = std::find_if(deltas.begin(), deltas.end(), [](const auto& d) { return d.model == "FT-SVD"; });
  ASSERT_NE(own, deltas.end());
  EXPECT_NEAR(own->delta_mse, 0.029, 1e-12);
  EXPECT_EQ(own->delta_mae, 0.0);
  EXPECT_NEAR(own->ratio_mae, 1.0, 1e-15);
  EXPECT_FALSE(metrics::delta_table(report(0.40, 0.391), deltas).empty());
}

TEST(Compare, MissingCellsListedAsAbsent) {
  const auto table = metrics::load_published(kTable);
  const auto none = metrics::compare_to_published(report(0.4, 0.4, 97), table, "FT-SVD");
  ASSERT_EQ(none.size(), 1u);
  EXPECT_FALSE(none[0].present);
  const auto ablation = metrics::compare_to_published(report(0.4, 0.4), table, "SVD");
  EXPECT_FALSE(ablation.front().present);
  EXPECT_EQ(ablation.front().model, "SVD");
  EXPECT_NE(metrics::delta_table(report(0.4, 0.4), ablation).find("absent"), std::string::npos);
}

TEST(Compare, MalformedTableRejected) {
  const auto path = std::filesystem::temp_directory_path() / "tlnet_bad_table.csv";
  {
    std::ofstream out(path);
    out << "dataset,horizon,model,mse,mae\nETTh1,96,X,abc,0.1\n";
  }
  EXPECT_THROW(metrics::load_published(path), IoError);
  std::filesystem::remove(path);
}
