#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tlnet/data.hpp"
#include "tlnet/model.hpp"

namespace tlnet {

enum class OptimizerKind { sgd, adam };
OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 10;
  std::size_t patience = 6;  // epochs without val improvement before stopping
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr_decay = 0.5;           // applied after every `decay_after` stale epochs
  std::size_t decay_after = 3;
  double clip_norm = 5.0;          // global gradient norm; 0 disables
  std::size_t max_steps = 0;       // 0 = no cap
  std::size_t eval_batch_size = 256;

  void validate() const;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;
};

// sgd: p -= lr * g. adam: bias-corrected first/second moments. Moments are
// created on first use.
void optimizer_step(ParameterSet& params, const std::vector<Tensor>& grads, OptimizerState& state, double lr,
                    OptimizerKind kind, const AdamHyper& hyper = {});

// Scales grads in place so their joint L2 norm is at most max_norm; returns
// the norm before scaling.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

// Loss averaged over every element of every window of the split.
double evaluate_loss(const Model& model, const data::WindowedDataset& split, LossKind kind,
                     std::size_t batch_size = 256);

struct Checkpoint {
  ModelConfig model;
  ParameterSet params;
  OptimizerState optimizer;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double best_val = 0.0;
  double lr = 0.0;
  data::NormStats stats;
};

// Binary container: 8-byte magic "TLNETCKP", u32 version, u64 header length,
// JSON header (config, counters, norm stats, tensor directory), then every
// tensor as little-endian fp64 in directory order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Model with the checkpoint's config and parameters; names and shapes must
// match exactly.
Model restore_model(const Checkpoint& ckpt);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::uint64_t steps = 0;  // cumulative
  bool improved = false;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<EpochRecord> epochs;
  Checkpoint best;
  std::string stop_reason;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

// Seeded shuffled mini-batches, val loss after every epoch, best-val
// checkpoint, lr decay and early stopping. On return the model holds the
// best-val parameters. A non-finite loss or gradient throws NumericError
// naming the epoch and step.
TrainResult train(Model& model, const data::Dataset& ds, const TrainConfig& tc, const TrainHooks& hooks = {});

}  // namespace tlnet
