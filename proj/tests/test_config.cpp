#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "tlnet/config.hpp"
#include "tlnet/error.hpp"

using namespace tlnet;
using config::Json;

namespace {

std::string error_of(const Json& j) {
  try {
    config::run_from_json(j);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  config::RunConfig r;
  r.seed = 11;
  r.model.seed = 11;
  r.train.seed = 11;
  r.model.arch = Arch::conv_svd;
  r.model.mask.band_widths = {3, 7};
  r.train.optimizer = OptimizerKind::sgd;
  const Json j = config::to_json(r);
  const config::RunConfig back = config::run_from_json(j);
  EXPECT_EQ(config::to_json(back).dump(), j.dump());
  EXPECT_EQ(config::config_hash(back), config::config_hash(r));
}

TEST(Config, SeedPropagatesToModelAndTrainer) {
  const config::RunConfig r = config::run_from_json(Json::parse(R"({"seed": 5})"));
  EXPECT_EQ(r.model.seed, 5u);
  EXPECT_EQ(r.train.seed, 5u);
}

TEST(Config, UnknownKeysNamePath) {
  EXPECT_EQ(error_of(Json::parse(R"({"bogus": 1})")), "bogus: unknown key");
  EXPECT_EQ(error_of(Json::parse(R"({"model": {"arch": "ft_svd", "depth": 3}})")), "model.depth: unknown key");
  EXPECT_EQ(error_of(Json::parse(R"({"model": {"mask": {"width": 3}}})")), "model.mask.width: unknown key");
}

TEST(Config, InvalidValuesNameKey) {
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"model": {"pred_len": 0}})")), "model.pred_len"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"model": {"pred_len": -3}})")), "model.pred_len"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"model": {"pred_len": "x"}})")), "model.pred_len"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"model": {"arch": "lstm"}})")), "model.arch"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"train": {"lr": -1}})")), "train.lr"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"train": {"optimizer": "rmsprop"}})")), "train.optimizer"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"data": {"train_ratio": 0.95, "val_ratio": 0.1}})")),
                          "data.train_ratio"));
  EXPECT_TRUE(starts_with(error_of(Json::parse(R"({"eval": []})")), "eval"));
}

TEST(Config, FileLoadingResolvesRelativeDataPath) {
  const auto dir = std::filesystem::temp_directory_path() / "tlnet_cfg_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "run.json";
  {
    std::ofstream out(path);
    out << "// comment lines are allowed\n"
        << R"({"data": {"name": "x", "path": "../data/x.csv"}, "model": {"channels": 2}})";
  }
  const config::RunConfig r = config::load_run_config(path);
  EXPECT_EQ(r.data.path, (dir.parent_path() / "data/x.csv").lexically_normal().string());
  EXPECT_EQ(r.model.channels, 2u);
  std::filesystem::remove_all(dir);
}

TEST(Config, MissingOrMalformedFile) {
  EXPECT_THROW(config::load_run_config("/nonexistent/run.json"), ValidationError);
  const auto path = std::filesystem::temp_directory_path() / "tlnet_bad.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(config::load_run_config(path), ValidationError);
  std::filesystem::remove(path);
}

TEST(Config, HashIsStableAndSensitive) {
  EXPECT_EQ(config::hash_hex(""), "cbf29ce484222325");
  EXPECT_EQ(config::hash_hex("a"), "af63dc4c8601ec8c");
  config::RunConfig a, b;
  b.model.pred_len = 48;
  EXPECT_NE(config::config_hash(a), config::config_hash(b));
}

TEST(Config, HashIgnoresOutputDirectory) {
  config::RunConfig a, b;
  b.out_dir = "elsewhere";
  EXPECT_EQ(config::config_hash(a), config::config_hash(b));
}
