#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>

#include "tlnet/error.hpp"
#include "tlnet/trainer.hpp"

using namespace tlnet;

namespace {

ModelConfig tiny(Arch arch, std::size_t d = 2, std::size_t t = 16, std::size_t tau = 8) {
  ModelConfig c;
  c.arch = arch;
  c.channels = d;
  c.input_len = t;
  c.pred_len = tau;
  c.layers = 2;
  c.mask = blocks::MaskSpec{{3}, 1};
  c.seed = 7;
  return c;
}

data::Dataset sinusoids(std::size_t steps = 400, std::size_t t = 16, std::size_t tau = 8) {
  data::SyntheticSpec spec;
  spec.steps = steps;
  spec.periods = {8.0, 12.0};
  return data::make_dataset(data::synthetic_series(spec), t, tau);
}

// Every split holds the raw constant, so the model must learn ones -> ones.
data::Dataset constant_ones(std::size_t t, std::size_t tau, std::size_t d) {
  const Tensor series = data::constant_series(200, d, 1.0).values;
  data::Dataset ds;
  ds.train = data::WindowedDataset(series, 0, 140, t, tau, "train");
  ds.val = data::WindowedDataset(series, 140, 170, t, tau, "val");
  ds.test = data::WindowedDataset(series, 170, 200, t, tau, "test");
  return ds;
}

ParameterSet single(double v) {
  ParameterSet p;
  p.add("p", Tensor({1}, {v}));
  return p;
}

}  // namespace

TEST(Optimizer, SgdIsPlainGradientStep) {
  ParameterSet p = single(1.0);
  OptimizerState s;
  optimizer_step(p, {Tensor({1}, {0.5})}, s, 0.1, OptimizerKind::sgd);
  EXPECT_DOUBLE_EQ(p[0].item(), 0.95);
  EXPECT_EQ(s.step, 1u);
}

TEST(Optimizer, AdamWithZeroGradientLeavesParameters) {
  ParameterSet p = single(0.3);
  OptimizerState s;
  for (int i = 0; i < 20; ++i) optimizer_step(p, {Tensor({1}, {0.0})}, s, 1e-3, OptimizerKind::adam);
  EXPECT_EQ(p[0].item(), 0.3);
}

TEST(Optimizer, AdamFirstStepMatchesClosedForm) {
  // With zero moments the bias-corrected first step is lr * g / (|g| + eps).
  const double lr = 1e-3, g = 1.0, eps = 1e-8;
  ParameterSet p = single(2.0);
  OptimizerState s;
  optimizer_step(p, {Tensor({1}, {g})}, s, lr, OptimizerKind::adam);
  EXPECT_NEAR(p[0].item(), 2.0 - lr * g / (std::abs(g) + eps), 1e-15);
  EXPECT_NEAR(2.0 - p[0].item(), lr, 1e-10);
}

TEST(Optimizer, ShapeMismatchThrows) {
  ParameterSet p = single(1.0);
  OptimizerState s;
  EXPECT_THROW(optimizer_step(p, {Tensor({2}, {0.0, 0.0})}, s, 0.1, OptimizerKind::sgd), DimensionError);
  EXPECT_THROW(optimizer_step(p, {}, s, 0.1, OptimizerKind::sgd), DimensionError);
}

TEST(Optimizer, ClipGlobalNorm) {
  std::vector<Tensor> g{Tensor({1}, {3.0}), Tensor({1}, {4.0})};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0].item(), 0.6, 1e-15);
  EXPECT_NEAR(g[1].item(), 0.8, 1e-15);
  std::vector<Tensor> small{Tensor({1}, {0.1})};
  clip_global_norm(small, 1.0);
  EXPECT_EQ(small[0].item(), 0.1);
}

TEST(TrainConfig, ValidationNamesField) {
  TrainConfig tc;
  tc.batch_size = 0;
  try {
    tc.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  tc = {};
  tc.patience = 0;
  EXPECT_THROW(tc.validate(), ValidationError);
  tc = {};
  tc.lr = -1;
  EXPECT_THROW(tc.validate(), ValidationError);
}

TEST(Train, ZeroLearningRateLeavesParametersBitwise) {
  const data::Dataset ds = sinusoids();
  Model model(tiny(Arch::ft_svd));
  const ParameterSet before = model.params();
  TrainConfig tc;
  tc.lr = 0.0;
  tc.max_epochs = 1;
  const TrainResult r = train(model, ds, tc);
  ASSERT_EQ(r.epochs.size(), 1u);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_TRUE(model.params()[i].bitwise_equal(before[i])) << before.name(i);
  }
}

TEST(Train, SameSeedSameLosses) {
  const data::Dataset ds = sinusoids();
  TrainConfig tc;
  tc.max_steps = 10;
  tc.batch_size = 8;
  tc.seed = 3;
  Model a(tiny(Arch::ft_matrix)), b(tiny(Arch::ft_matrix));
  const TrainResult ra = train(a, ds, tc), rb = train(b, ds, tc);
  ASSERT_EQ(ra.step_losses.size(), 10u);
  ASSERT_EQ(rb.step_losses.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(ra.step_losses[i], rb.step_losses[i], 1e-12);
  EXPECT_EQ(ra.stop_reason, "max_steps");
}

TEST(Train, ConstantTargetIsLearnedByEveryArch) {
  const data::Dataset ds = constant_ones(8, 4, 2);
  for (Arch arch : {Arch::ft_svd, Arch::ft_matrix, Arch::ft_conv, Arch::conv_svd}) {
    Model model(tiny(arch, 2, 8, 4));
    TrainConfig tc;
    tc.lr = 1e-2;
    tc.batch_size = 16;
    tc.max_epochs = 1000;
    tc.patience = 1000;
    tc.max_steps = 200;
    const TrainResult r = train(model, ds, tc);
    EXPECT_LT(r.step_losses.back(), 1e-6) << to_string(arch);
    EXPECT_LT(evaluate_loss(model, ds.train, LossKind::mse), 1e-6) << to_string(arch);
  }
}

TEST(Train, SgdLossDecreasesMonotonicallyOnSinusoids) {
  // Full-batch steps so each step's loss is the whole training objective.
  const data::Dataset ds = sinusoids(300);
  Model model(tiny(Arch::ft_matrix));
  TrainConfig tc;
  tc.optimizer = OptimizerKind::sgd;
  tc.lr = 1e-2;
  tc.batch_size = ds.train.size();
  tc.max_epochs = 100;
  tc.patience = 100;
  tc.max_steps = 50;
  const TrainResult r = train(model, ds, tc);
  ASSERT_EQ(r.step_losses.size(), 50u);
  for (std::size_t i = 1; i < r.step_losses.size(); ++i) {
    EXPECT_LT(r.step_losses[i], r.step_losses[i - 1]) << "step " << i;
  }
}

TEST(Train, BestValParametersAreReturned) {
  const data::Dataset ds = sinusoids();
  Model model(tiny(Arch::ft_matrix));
  TrainConfig tc;
  tc.lr = 0.3;  // large enough that validation loss does not keep improving
  tc.batch_size = 8;
  tc.max_epochs = 30;
  tc.patience = 2;
  std::vector<double> vals;
  const TrainResult r = train(model, ds, tc, {[&](const EpochRecord& e) { vals.push_back(e.val_loss); }});
  ASSERT_EQ(vals.size(), r.epochs.size());
  const auto best = std::min_element(vals.begin(), vals.end());
  const std::size_t best_epoch = std::size_t(best - vals.begin()) + 1;
  EXPECT_EQ(r.best.epoch, best_epoch);
  EXPECT_EQ(r.best.best_val, *best);
  EXPECT_EQ(r.stop_reason, "early_stopping");
  EXPECT_LT(best_epoch, vals.size());
  EXPECT_EQ(evaluate_loss(model, ds.val, tc.loss), *best);
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    EXPECT_TRUE(model.params()[i].bitwise_equal(r.best.params[i]));
  }
}

TEST(Train, NonFiniteLossAbortsWithLocation) {
  const data::Dataset ds = sinusoids();
  Model model(tiny(Arch::ft_matrix));
  model.params()[0].data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  try {
    train(model, ds, tc);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
  }
}

TEST(Train, MismatchedDatasetRejected) {
  const data::Dataset ds = sinusoids();
  Model model(tiny(Arch::ft_matrix, 3));
  EXPECT_THROW(train(model, ds, TrainConfig{}), DimensionError);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const data::Dataset ds = sinusoids();
  Model model(tiny(Arch::ft_svd));
  TrainConfig tc;
  tc.max_steps = 15;
  tc.batch_size = 8;
  const TrainResult r = train(model, ds, tc);
  Checkpoint ck = r.best;
  ck.optimizer.m.clear();
  ck.optimizer.v.clear();
  OptimizerState opt;
  ParameterSet scratch = model.params();
  std::vector<Tensor> grads;
  for (std::size_t i = 0; i < scratch.size(); ++i) grads.push_back(scratch[i]);
  optimizer_step(scratch, grads, opt, 1e-3, OptimizerKind::adam);
  ck.optimizer = opt;

  const auto path = std::filesystem::temp_directory_path() / "tlnet_test_ckpt.bin";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  std::filesystem::remove(path);

  EXPECT_EQ(back.epoch, ck.epoch);
  EXPECT_EQ(back.step, ck.step);
  EXPECT_EQ(back.best_val, ck.best_val);
  EXPECT_EQ(back.lr, ck.lr);
  EXPECT_EQ(back.stats.mean, ck.stats.mean);
  EXPECT_EQ(back.stats.std, ck.stats.std);
  ASSERT_EQ(back.optimizer.m.size(), ck.optimizer.m.size());
  EXPECT_EQ(back.optimizer.step, ck.optimizer.step);
  for (std::size_t i = 0; i < ck.optimizer.m.size(); ++i) {
    EXPECT_TRUE(back.optimizer.m[i].bitwise_equal(ck.optimizer.m[i]));
    EXPECT_TRUE(back.optimizer.v[i].bitwise_equal(ck.optimizer.v[i]));
  }

  const Model restored = restore_model(back);
  const auto [x, y] = ds.test.batch({0, 1, 2});
  EXPECT_TRUE(restored.predict(x).bitwise_equal(model.predict(x)));
  EXPECT_NEAR(evaluate_loss(restored, ds.val, LossKind::mse), r.best.best_val, 1e-15);
}

TEST(Checkpoint, CorruptFilesRejected) {
  const auto path = std::filesystem::temp_directory_path() / "tlnet_test_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(path), IoError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, ArchMismatchRejected) {
  Checkpoint ck;
  ck.model = tiny(Arch::ft_svd);
  ck.params = Model(tiny(Arch::ft_matrix)).params();
  EXPECT_THROW(restore_model(ck), ValidationError);
}
