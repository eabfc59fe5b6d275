#include "tlnet/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "tlnet/config.hpp"
#include "tlnet/error.hpp"

namespace tlnet {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ValidationError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("lr: must be finite and >= 0");
  if (batch_size < 1) throw ValidationError("batch_size: must be >= 1");
  if (patience < 1) throw ValidationError("patience: must be >= 1");
  if (max_epochs < 1) throw ValidationError("max_epochs: must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("lr_decay: must be in (0, 1]");
  if (decay_after < 1) throw ValidationError("decay_after: must be >= 1");
  if (!(clip_norm >= 0.0)) throw ValidationError("clip_norm: must be >= 0");
  if (eval_batch_size < 1) throw ValidationError("eval_batch_size: must be >= 1");
}

void optimizer_step(ParameterSet& params, const std::vector<Tensor>& grads, OptimizerState& state, double lr,
                    OptimizerKind kind, const AdamHyper& hyper) {
  if (grads.size() != params.size()) {
    throw DimensionError("optimizer: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) {
      throw DimensionError("optimizer: gradient " + shape_str(grads[i].shape()) + " for parameter '" +
                           params.name(i) + "' " + shape_str(params[i].shape()));
    }
  }
  ++state.step;
  if (kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].data();
      const auto g = grads[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
    }
    return;
  }
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params[i].shape());
      state.v.emplace_back(params[i].shape());
    }
  }
  const double c1 = 1.0 - std::pow(hyper.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + hyper.eps);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) g *= factor;
  }
  return norm;
}

double evaluate_loss(const Model& model, const data::WindowedDataset& split, LossKind kind, std::size_t batch_size) {
  if (split.size() == 0) throw ValidationError("cannot evaluate an empty split");
  double total = 0.0;
  std::size_t elements = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(split.size(), start + batch_size); ++i) idx.push_back(i);
    const auto [x, y] = split.batch(idx);
    Graph g(false);
    const auto bound = model.bind(g, false);
    const double l = loss(model.forward(bound, g.leaf(x)), g.leaf(y), kind).value().item();
    total += l * double(y.size());
    elements += y.size();
  }
  return total / double(elements);
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[8] = {'T', 'L', 'N', 'E', 'T', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("checkpoint truncated reading " + what);
  return v;
}

// Doubles round-trip through JSON text only approximately, so scalars that
// must be exact are stored as their bit patterns.
std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }
double from_bits(std::uint64_t b) { return std::bit_cast<double>(b); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  config::Json header;
  header["format"] = "tlnet-checkpoint";
  header["model"] = config::to_json(ckpt.model);
  header["epoch"] = ckpt.epoch;
  header["step"] = ckpt.step;
  header["best_val_bits"] = bits(ckpt.best_val);
  header["best_val"] = ckpt.best_val;
  header["lr_bits"] = bits(ckpt.lr);
  header["optimizer_step"] = ckpt.optimizer.step;
  header["has_moments"] = !ckpt.optimizer.m.empty();

  // Norm stats travel as tensors so they round-trip bit-exactly.
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) tensors.emplace_back("param/" + ckpt.params.name(i), &ckpt.params[i]);
  for (std::size_t i = 0; i < ckpt.optimizer.m.size(); ++i) {
    tensors.emplace_back("adam.m/" + ckpt.params.name(i), &ckpt.optimizer.m[i]);
    tensors.emplace_back("adam.v/" + ckpt.params.name(i), &ckpt.optimizer.v[i]);
  }
  const std::size_t d = ckpt.stats.mean.size();
  const Tensor mean({d}, ckpt.stats.mean), sd({d}, ckpt.stats.std);
  if (d > 0) {
    tensors.emplace_back("stats/mean", &mean);
    tensors.emplace_back("stats/std", &sd);
  }
  header["constant_channels"] = ckpt.stats.constant_channels;

  std::uint64_t offset = 0;
  config::Json dir = config::Json::array();
  for (const auto& [name, t] : tensors) {
    dir.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}});
    offset += t->size() * sizeof(double);
  }
  header["tensors"] = dir;
  const std::string text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint64_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors) {
      out.write(reinterpret_cast<const char*>(t->data().data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + " is not a tlnet checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto len = read_pod<std::uint64_t>(in, "header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw IoError("checkpoint truncated in header");
  const config::Json header = config::Json::parse(text);

  Checkpoint ck;
  ck.model = config::model_from_json(header.at("model"), "model");
  ck.epoch = header.at("epoch").get<std::size_t>();
  ck.step = header.at("step").get<std::uint64_t>();
  ck.best_val = from_bits(header.at("best_val_bits").get<std::uint64_t>());
  ck.lr = from_bits(header.at("lr_bits").get<std::uint64_t>());
  ck.optimizer.step = header.at("optimizer_step").get<std::uint64_t>();
  ck.stats.constant_channels = header.at("constant_channels").get<std::vector<std::size_t>>();

  std::uint64_t expected_offset = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    if (entry.at("offset").get<std::uint64_t>() != expected_offset) throw IoError("checkpoint directory is not contiguous");
    std::vector<double> values(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw IoError("checkpoint truncated in tensor '" + name + "'");
    }
    expected_offset += values.size() * sizeof(double);
    Tensor t(shape, std::move(values));
    const auto slash = name.find('/');
    const std::string kind = name.substr(0, slash), key = name.substr(slash + 1);
    if (kind == "param") {
      ck.params.add(key, std::move(t));
    } else if (kind == "adam.m") {
      ck.optimizer.m.push_back(std::move(t));
    } else if (kind == "adam.v") {
      ck.optimizer.v.push_back(std::move(t));
    } else if (name == "stats/mean") {
      ck.stats.mean = t.vec();
    } else if (name == "stats/std") {
      ck.stats.std = t.vec();
    } else {
      throw IoError("unknown checkpoint tensor '" + name + "'");
    }
  }
  return ck;
}

Model restore_model(const Checkpoint& ckpt) {
  Model model(ckpt.model);
  ParameterSet& p = model.params();
  if (p.size() != ckpt.params.size()) {
    throw ValidationError("checkpoint has " + std::to_string(ckpt.params.size()) + " parameters, model expects " +
                          std::to_string(p.size()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.name(i) != ckpt.params.name(i) || p[i].shape() != ckpt.params[i].shape()) {
      throw ValidationError("checkpoint parameter '" + ckpt.params.name(i) + "' " + shape_str(ckpt.params[i].shape()) +
                            " does not match model parameter '" + p.name(i) + "' " + shape_str(p[i].shape()));
    }
    p[i] = ckpt.params[i];
  }
  return model;
}

// ---- training loop ----

TrainResult train(Model& model, const data::Dataset& ds, const TrainConfig& tc, const TrainHooks& hooks) {
  tc.validate();
  const data::WindowedDataset& tr = ds.train;
  if (tr.size() == 0) throw ValidationError("training split is empty");
  const ModelConfig& mc = model.config();
  if (tr.channels() != mc.channels || tr.input_len() != mc.input_len || tr.pred_len() != mc.pred_len) {
    throw DimensionError("dataset windows (" + std::to_string(tr.channels()) + ", " + std::to_string(tr.input_len()) +
                         ", " + std::to_string(tr.pred_len()) + ") do not match the model config");
  }

  TrainResult result;
  OptimizerState opt;
  double lr = tc.lr;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::uint64_t steps = 0;
  auto snapshot = [&](std::size_t epoch) {
    Checkpoint c;
    c.model = mc;
    c.params = model.params();
    c.optimizer = opt;
    c.epoch = epoch;
    c.step = steps;
    c.best_val = best_val;
    c.lr = lr;
    c.stats = ds.stats;
    return c;
  };
  result.best = snapshot(0);
  result.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const std::vector<std::size_t> order = data::shuffled_order(tr.size(), tc.seed, epoch);
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    bool capped = false;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      idx.assign(order.begin() + long(start), order.begin() + long(std::min(order.size(), start + tc.batch_size)));
      const auto [x, y] = tr.batch(idx);
      Graph g(false);
      const auto bound = model.bind(g, true);
      const Var l = loss(model.forward(bound, g.leaf(x)), g.leaf(y), tc.loss);
      const double lv = l.value().item();
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(steps + 1));
      }
      Gradients grads = g.backward(l);
      std::vector<Tensor> gs;
      gs.reserve(bound.size());
      for (const Var& p : bound) gs.push_back(grads.take(p));
      const double norm = clip_global_norm(gs, tc.clip_norm);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(steps + 1));
      }
      optimizer_step(model.params(), gs, opt, lr, tc.optimizer);
      ++steps;
      result.step_losses.push_back(lv);
      epoch_loss += lv;
      ++epoch_batches;
      if (tc.max_steps > 0 && steps >= tc.max_steps) {
        capped = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / double(epoch_batches);
    rec.val_loss = evaluate_loss(model, ds.val, tc.loss, tc.eval_batch_size);
    rec.lr = lr;
    rec.steps = steps;
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch) + ", step " +
                         std::to_string(steps));
    }
    rec.improved = rec.val_loss < best_val;
    if (rec.improved) {
      best_val = rec.val_loss;
      stale = 0;
      result.best = snapshot(epoch);
    } else {
      ++stale;
      if (stale % tc.decay_after == 0) lr *= tc.lr_decay;
    }
    result.epochs.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (capped) {
      result.stop_reason = "max_steps";
      break;
    }
    if (stale >= tc.patience) {
      result.stop_reason = "early_stopping";
      break;
    }
  }
  model.params() = result.best.params;
  return result;
}

}  // namespace tlnet
