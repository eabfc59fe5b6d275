#pragma once

#include <string>
#include <vector>

#include "tlnet/config.hpp"
#include "tlnet/metrics.hpp"
#include "tlnet/trainer.hpp"

// End-to-end runs shared by the command-line tool, the acceptance checks and
// the Python module.
namespace tlnet::pipeline {

struct TrainRun {
  data::Dataset dataset;
  TrainResult result;  // result.best is the checkpoint to save
};

// Loads the run's data, windows it and trains a fresh model.
TrainRun train_run(const config::RunConfig& r, const TrainHooks& hooks = {});

struct EvalRun {
  data::Dataset dataset;
  double val_loss = 0.0;
  metrics::Forecast forecast;
  // The model on the test split, then the naive last-value baseline.
  std::vector<metrics::MetricsReport> reports;
};

// Evaluates a checkpoint on the run's data. The checkpoint fixes the model;
// the config supplies data, split, loss and scale settings.
EvalRun eval_run(const config::RunConfig& r, const Checkpoint& ck);

}  // namespace tlnet::pipeline
