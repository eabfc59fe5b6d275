#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "tlnet/data.hpp"
#include "tlnet/model.hpp"
#include "tlnet/trainer.hpp"

// JSON run configuration. Every object rejects unknown keys and every error
// message starts with the offending key path, e.g. "model.pred_len: ...".
namespace tlnet::config {

using Json = nlohmann::ordered_json;

struct DataConfig {
  std::string name = "synthetic";
  std::string path;  // resolved against the config file's directory
  std::string date_column = "date";
  std::size_t steps = 2000;  // length of the generated series when name is "synthetic"
  data::SplitRatios split;
};

struct EvalConfig {
  bool original_scale = false;
  std::size_t prediction_windows = 16;  // evenly spaced test windows in the plot CSV
};

struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  std::string out_dir = "runs/default";
  std::uint64_t seed = 0;  // copied into model.seed and train.seed
};

Json to_json(const ModelConfig& m);
ModelConfig model_from_json(const Json& j, const std::string& prefix = "model");
Json to_json(const TrainConfig& t);
TrainConfig train_from_json(const Json& j, const std::string& prefix = "train");
Json to_json(const RunConfig& r);
RunConfig run_from_json(const Json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// The run's series: generated when data.name is "synthetic" and no path is
// set, otherwise read from data.path. The channel count must match the model.
data::RawSeries load_data(const RunConfig& r);

// FNV-1a of the text, as 16 hex digits.
std::string hash_hex(const std::string& text);
// Hash of the resolved config without out_dir.
std::string config_hash(const RunConfig& r);

}  // namespace tlnet::config
