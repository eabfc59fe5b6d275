#include "tlnet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "tlnet/error.hpp"

namespace tlnet::config {

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const Json& j, const std::string& prefix) {
  if (!j.is_object()) throw ValidationError((prefix.empty() ? "config" : prefix) + ": expected an object");
}

void reject_unknown(const Json& j, const std::string& prefix, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) throw ValidationError(join(prefix, key) + ": unknown key");
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& prefix, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() || it->template get<long long>() < 0) {
        throw ValidationError(join(prefix, key) + ": expected a nonnegative integer");
      }
    }
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(join(prefix, key) + ": wrong type (" + std::string(e.what()) + ")");
  }
}

// Runs a validate() and prefixes its "field: message" errors with the path.
template <typename F>
void validated(const std::string& prefix, F f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw ValidationError(join(prefix, e.what()));
  }
}

// Parses an enum-valued string field, naming the key on failure.
template <typename F>
auto parse_field(const Json& j, const char* key, const std::string& prefix, const std::string& fallback, F parse) {
  const std::string text = get<std::string>(j, key, prefix, fallback);
  try {
    return parse(text);
  } catch (const ValidationError& e) {
    throw ValidationError(join(prefix, key) + ": " + e.what());
  }
}

}  // namespace

Json to_json(const ModelConfig& m) {
  Json j;
  j["arch"] = std::string(to_string(m.arch));
  j["input_len"] = m.input_len;
  j["pred_len"] = m.pred_len;
  j["channels"] = m.channels;
  j["layers"] = m.layers;
  j["activation"] = std::string(ops::to_string(m.activation));
  j["mask"] = {{"band_widths", m.mask.band_widths}, {"global_rows", m.mask.global_rows}};
  j["conv_kernel"] = m.conv_kernel;
  j["expand_univariate"] = m.expand_univariate;
  j["seed"] = m.seed;
  return j;
}

ModelConfig model_from_json(const Json& j, const std::string& prefix) {
  require_object(j, prefix);
  reject_unknown(j, prefix, {"arch", "input_len", "pred_len", "channels", "layers", "activation", "mask",
                             "conv_kernel", "expand_univariate", "seed"});
  ModelConfig m;
  m.arch = parse_field(j, "arch", prefix, std::string(to_string(m.arch)), parse_arch);
  m.input_len = get<std::size_t>(j, "input_len", prefix, m.input_len);
  m.pred_len = get<std::size_t>(j, "pred_len", prefix, m.pred_len);
  m.channels = get<std::size_t>(j, "channels", prefix, m.channels);
  m.layers = get<std::size_t>(j, "layers", prefix, m.layers);
  m.activation = parse_field(j, "activation", prefix, std::string(ops::to_string(m.activation)),
                             ops::parse_activation);
  if (const auto it = j.find("mask"); it != j.end()) {
    const std::string mp = join(prefix, "mask");
    require_object(*it, mp);
    reject_unknown(*it, mp, {"band_widths", "global_rows"});
    m.mask.band_widths = get<std::vector<std::size_t>>(*it, "band_widths", mp, m.mask.band_widths);
    m.mask.global_rows = get<std::size_t>(*it, "global_rows", mp, m.mask.global_rows);
  }
  m.conv_kernel = get<std::size_t>(j, "conv_kernel", prefix, m.conv_kernel);
  m.expand_univariate = get<bool>(j, "expand_univariate", prefix, m.expand_univariate);
  m.seed = get<std::uint64_t>(j, "seed", prefix, m.seed);
  validated(prefix, [&] { m.validate(); });
  return m;
}

Json to_json(const TrainConfig& t) {
  Json j;
  j["lr"] = t.lr;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["loss"] = std::string(to_string(t.loss));
  j["optimizer"] = std::string(to_string(t.optimizer));
  j["lr_decay"] = t.lr_decay;
  j["decay_after"] = t.decay_after;
  j["clip_norm"] = t.clip_norm;
  j["max_steps"] = t.max_steps;
  j["eval_batch_size"] = t.eval_batch_size;
  j["seed"] = t.seed;
  return j;
}

TrainConfig train_from_json(const Json& j, const std::string& prefix) {
  require_object(j, prefix);
  reject_unknown(j, prefix, {"lr", "batch_size", "max_epochs", "patience", "loss", "optimizer", "lr_decay",
                             "decay_after", "clip_norm", "max_steps", "eval_batch_size", "seed"});
  TrainConfig t;
  t.lr = get<double>(j, "lr", prefix, t.lr);
  t.batch_size = get<std::size_t>(j, "batch_size", prefix, t.batch_size);
  t.max_epochs = get<std::size_t>(j, "max_epochs", prefix, t.max_epochs);
  t.patience = get<std::size_t>(j, "patience", prefix, t.patience);
  t.loss = parse_field(j, "loss", prefix, std::string(to_string(t.loss)), parse_loss);
  t.optimizer = parse_field(j, "optimizer", prefix, std::string(to_string(t.optimizer)), parse_optimizer);
  t.lr_decay = get<double>(j, "lr_decay", prefix, t.lr_decay);
  t.decay_after = get<std::size_t>(j, "decay_after", prefix, t.decay_after);
  t.clip_norm = get<double>(j, "clip_norm", prefix, t.clip_norm);
  t.max_steps = get<std::size_t>(j, "max_steps", prefix, t.max_steps);
  t.eval_batch_size = get<std::size_t>(j, "eval_batch_size", prefix, t.eval_batch_size);
  t.seed = get<std::uint64_t>(j, "seed", prefix, t.seed);
  validated(prefix, [&] { t.validate(); });
  return t;
}

Json to_json(const RunConfig& r) {
  Json j;
  j["seed"] = r.seed;
  j["out_dir"] = r.out_dir;
  j["data"] = {{"name", r.data.name},
               {"path", r.data.path},
               {"date_column", r.data.date_column},
               {"steps", r.data.steps},
               {"train_ratio", r.data.split.train},
               {"val_ratio", r.data.split.val}};
  j["model"] = to_json(r.model);
  j["train"] = to_json(r.train);
  j["eval"] = {{"original_scale", r.eval.original_scale}, {"prediction_windows", r.eval.prediction_windows}};
  return j;
}

RunConfig run_from_json(const Json& j, const std::filesystem::path& base_dir) {
  require_object(j, "");
  reject_unknown(j, "", {"seed", "out_dir", "data", "model", "train", "eval"});
  RunConfig r;
  r.seed = get<std::uint64_t>(j, "seed", "", r.seed);
  r.out_dir = get<std::string>(j, "out_dir", "", r.out_dir);
  if (const auto it = j.find("data"); it != j.end()) {
    require_object(*it, "data");
    reject_unknown(*it, "data", {"name", "path", "date_column", "steps", "train_ratio", "val_ratio"});
    r.data.name = get<std::string>(*it, "name", "data", r.data.name);
    r.data.path = get<std::string>(*it, "path", "data", r.data.path);
    r.data.date_column = get<std::string>(*it, "date_column", "data", r.data.date_column);
    r.data.steps = get<std::size_t>(*it, "steps", "data", r.data.steps);
    r.data.split.train = get<double>(*it, "train_ratio", "data", r.data.split.train);
    r.data.split.val = get<double>(*it, "val_ratio", "data", r.data.split.val);
    const auto& s = r.data.split;
    if (!(s.train > 0 && s.val >= 0 && s.train + s.val < 1)) {
      throw ValidationError("data.train_ratio: train > 0, val >= 0 and train + val < 1 required");
    }
  }
  Json model = j.value("model", Json::object());
  if (model.is_object()) model["seed"] = r.seed;
  r.model = model_from_json(model, "model");
  Json train = j.value("train", Json::object());
  if (train.is_object()) train["seed"] = r.seed;
  r.train = train_from_json(train, "train");
  if (const auto it = j.find("eval"); it != j.end()) {
    require_object(*it, "eval");
    reject_unknown(*it, "eval", {"original_scale", "prediction_windows"});
    r.eval.original_scale = get<bool>(*it, "original_scale", "eval", r.eval.original_scale);
    r.eval.prediction_windows = get<std::size_t>(*it, "prediction_windows", "eval", r.eval.prediction_windows);
  }
  if (!r.data.path.empty() && !base_dir.empty() && std::filesystem::path(r.data.path).is_relative()) {
    r.data.path = (base_dir / r.data.path).lexically_normal().string();
  }
  return r;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_from_json(j, path.parent_path());
}

data::RawSeries load_data(const RunConfig& r) {
  data::RawSeries raw;
  if (r.data.path.empty()) {
    if (r.data.name != "synthetic") throw ValidationError("data.path: required for dataset '" + r.data.name + "'");
    data::SyntheticSpec spec;
    spec.steps = r.data.steps;
    spec.channels = r.model.channels;
    spec.seed = r.seed;
    raw = data::synthetic_series(spec);
  } else {
    if (!std::filesystem::exists(r.data.path)) throw ValidationError("data.path: no such file " + r.data.path);
    raw = data::ingest_csv(r.data.path, r.data.date_column);
  }
  if (raw.channels() != r.model.channels) {
    throw ValidationError("model.channels: config says " + std::to_string(r.model.channels) + " but the data has " +
                          std::to_string(raw.channels()) + " value columns");
  }
  return raw;
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& r) {
  Json j = to_json(r);
  j.erase("out_dir");  // where results go does not change what they are
  return hash_hex(j.dump());
}

}  // namespace tlnet::config
