#include "tlnet/pipeline.hpp"

#include "tlnet/error.hpp"

namespace tlnet::pipeline {

TrainRun train_run(const config::RunConfig& r, const TrainHooks& hooks) {
  TrainRun run;
  run.dataset = data::make_dataset(config::load_data(r), r.model.input_len, r.model.pred_len, r.data.split);
  Model model(r.model);
  run.result = train(model, run.dataset, r.train, hooks);
  return run;
}

EvalRun eval_run(const config::RunConfig& r, const Checkpoint& ck) {
  const std::string hash = config::config_hash(r);
  const Model model = restore_model(ck);
  config::RunConfig data_cfg = r;
  data_cfg.model = ck.model;
  data::RawSeries raw;
  try {
    raw = config::load_data(data_cfg);
  } catch (const ValidationError& e) {
    if (std::string(e.what()).rfind("model.channels", 0) != 0) throw;
    throw ValidationError("checkpoint expects " + std::to_string(ck.model.channels) + " channels: " + e.what());
  }
  EvalRun run;
  run.dataset = data::make_dataset(raw, ck.model.input_len, ck.model.pred_len, r.data.split);
  const data::Dataset& ds = run.dataset;
  run.val_loss = evaluate_loss(model, ds.val, r.train.loss, r.train.eval_batch_size);
  const data::NormStats* scale = r.eval.original_scale ? &ds.stats : nullptr;
  run.forecast = metrics::forecast(model, ds.test, scale, r.train.eval_batch_size);
  const metrics::Forecast naive = metrics::naive_last_value(ds.test, scale);
  const std::string arch(to_string(ck.model.arch));
  run.reports = {
      metrics::make_report(run.forecast, r.data.name, arch, ck.model.input_len, r.seed, hash, r.eval.original_scale),
      metrics::make_report(naive, r.data.name, "naive_last_value", ck.model.input_len, r.seed, hash,
                           r.eval.original_scale)};
  return run;
}

}  // namespace tlnet::pipeline
