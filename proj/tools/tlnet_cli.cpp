// tlnet: train, evaluate, predict, verify, gradcheck and compare from the shell.
// Exit codes: 0 ok, 1 check failure, 2 usage or config error, 3 numeric abort.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tlnet/config.hpp"
#include "tlnet/error.hpp"
#include "tlnet/gradcheck.hpp"
#include "tlnet/metrics.hpp"
#include "tlnet/pipeline.hpp"
#include "tlnet/trainer.hpp"
#include "tlnet/verify.hpp"
#include "tlnet/version.hpp"

namespace fs = std::filesystem;
using namespace tlnet;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

#ifndef TLNET_BASELINE_DIR
#define TLNET_BASELINE_DIR "data/baselines"
#endif

struct Flags {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
  std::string arch = "all";
  std::size_t seeds = 5;
  std::string metrics;
  std::vector<std::string> tables;
  std::string fault;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Worker-thread cap from TLNET_THREADS. Execution is single-threaded, so the
// value is validated and echoed but never raises parallelism.
std::size_t thread_cap() {
  const char* env = std::getenv("TLNET_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ValidationError("TLNET_THREADS: expected a positive integer, got '" + std::string(env) + "'");
  return std::size_t(v);
}

config::RunConfig resolve(const Flags& f) {
  if (f.config.empty()) throw ValidationError("--config: required");
  config::RunConfig r = config::load_run_config(f.config);
  if (!f.data.empty()) r.data.path = fs::absolute(f.data).lexically_normal().string();
  if (!f.out.empty()) r.out_dir = f.out;
  if (f.seed) {
    r.seed = *f.seed;
    r.model.seed = *f.seed;
    r.train.seed = *f.seed;
  }
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_resolved(const fs::path& dir, const config::RunConfig& r, const data::NormStats& stats) {
  config::Json j = config::to_json(r);
  j["config_hash"] = config::config_hash(r);
  j["code_version"] = std::string(code_version());
  j["threads"] = 1;
  j["normalization"] = {{"method", "z-score per channel, statistics from the train split only"},
                        {"mean", stats.mean},
                        {"std", stats.std},
                        {"constant_channels", stats.constant_channels}};
  write_text(dir / "config.resolved.json", j.dump(2) + "\n");
}

fs::path checkpoint_path(const Flags& f, const config::RunConfig* r) {
  if (!f.checkpoint.empty()) return f.checkpoint;
  if (r) return fs::path(r->out_dir) / "checkpoint.bin";
  throw ValidationError("--checkpoint: required");
}

int cmd_train(const Flags& f) {
  const config::RunConfig r = resolve(f);
  thread_cap();
  const fs::path dir = r.out_dir;
  fs::create_directories(dir);
  std::ofstream epochs(dir / "epochs.csv", std::ios::binary | std::ios::trunc);
  epochs << "epoch,train_loss,val_loss,lr,steps,improved\n";
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& e) {
    epochs << e.epoch << ',' << num(e.train_loss) << ',' << num(e.val_loss) << ',' << num(e.lr) << ',' << e.steps
           << ',' << (e.improved ? 1 : 0) << '\n';
    epochs.flush();
    std::printf("epoch %3zu  train %.6f  val %.6f  lr %.2e%s\n", e.epoch, e.train_loss, e.val_loss, e.lr,
                e.improved ? "  *" : "");
    std::fflush(stdout);
  };
  std::cout << "train " << to_string(r.model.arch) << " on " << r.data.name << " (T=" << r.model.input_len
            << ", tau=" << r.model.pred_len << ")" << std::endl;
  const pipeline::TrainRun run = pipeline::train_run(r, hooks);
  write_resolved(dir, r, run.dataset.stats);

  std::string history = "step,loss\n";
  for (std::size_t i = 0; i < run.result.step_losses.size(); ++i) {
    history += std::to_string(i + 1) + "," + num(run.result.step_losses[i]) + "\n";
  }
  write_text(dir / "loss_history.csv", history);
  save_checkpoint(dir / "checkpoint.bin", run.result.best);
  std::cout << "stopped: " << run.result.stop_reason << "; best epoch " << run.result.best.epoch << ", val loss "
            << num(run.result.best.best_val) << "\ncheckpoint: " << (dir / "checkpoint.bin").string() << "\n";
  return kOk;
}

int cmd_eval(const Flags& f) {
  const config::RunConfig r = resolve(f);
  const Checkpoint ck = load_checkpoint(checkpoint_path(f, &r));
  const pipeline::EvalRun run = pipeline::eval_run(r, ck);
  const fs::path dir = r.out_dir;
  fs::create_directories(dir);
  std::cout << "val_loss " << num(run.val_loss) << "\n";
  metrics::write_report_csv(dir / "metrics.csv", run.reports);
  metrics::write_predictions_csv(dir / "predictions.csv", run.forecast, run.dataset.test.first_row(),
                                 ck.model.input_len, r.eval.prediction_windows);
  write_text(dir / "eval_val_loss.txt", num(run.val_loss) + "\n");
  std::cout << metrics::report_table(run.reports) << "metrics: " << (dir / "metrics.csv").string() << "\n";
  return kOk;
}

int cmd_predict(const Flags& f) {
  if (f.data.empty()) throw ValidationError("--data: required");
  std::string date_column = "date";
  std::optional<config::RunConfig> r;
  if (!f.config.empty()) {
    r = resolve(f);
    date_column = r->data.date_column;
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path(f, r ? &*r : nullptr));
  const Model model = restore_model(ck);
  if (!fs::exists(f.data)) throw ValidationError("--data: no such file " + f.data);
  const data::RawSeries raw = data::ingest_csv(f.data, date_column);
  const std::size_t t = ck.model.input_len, tau = ck.model.pred_len, d = ck.model.channels;
  if (raw.channels() != d) {
    throw ValidationError("--data: checkpoint expects " + std::to_string(d) + " channels, " + f.data + " has " +
                          std::to_string(raw.channels()));
  }
  if (raw.steps() < t) {
    throw ValidationError("--data: need at least " + std::to_string(t) + " rows, " + f.data + " has " +
                          std::to_string(raw.steps()));
  }
  Tensor x({1, d, t});
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t k = 0; k < t; ++k) x.at(0, c, k) = raw.values.at(raw.steps() - t + k, c);
  const Tensor pred = data::denormalize(model.predict(data::normalize(x, ck.stats)), ck.stats);

  const fs::path out = f.out.empty() ? fs::path("forecast.csv") : fs::path(f.out);
  std::string text = "step";
  for (const auto& c : raw.columns) text += "," + c;
  text += "\n";
  for (std::size_t k = 0; k < tau; ++k) {
    text += std::to_string(k + 1);
    for (std::size_t c = 0; c < d; ++c) text += "," + num(pred.at(0, c, k));
    text += "\n";
  }
  write_text(out, text);
  std::cout << "forecast of " << tau << " steps after " << raw.timestamps.back() << ": " << out.string() << "\n";
  return kOk;
}

int cmd_verify(const Flags& f) {
  const auto results = verify::run_all(f.seeds, f.tolerance);
  std::cout << verify::format_table(results);
  bool ok = true;
  for (const auto& r : results) {
    if (r.gated && !r.pass) {
      std::cerr << "FAILED: " << r.name << " (" << r.instance << "): max abs error " << r.max_abs_error << " > "
                << r.tolerance << "\n";
      ok = false;
    }
  }
  std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kOk : kCheckFailed;
}

int cmd_gradcheck(const Flags& f) {
  if (!f.fault.empty()) set_backward_fault_for_testing(f.fault);
  gradcheck::Options opt;
  if (f.tolerance) opt.rel_tol = *f.tolerance;
  std::vector<Arch> archs;
  if (f.arch == "all") {
    archs = all_archs();
  } else {
    try {
      archs.push_back(parse_arch(f.arch));
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("--arch: ") + e.what());
    }
  }
  const std::uint64_t base = f.seed.value_or(0);
  std::size_t failed = 0, total = 0;
  auto report = [&](const gradcheck::Result& r, std::uint64_t seed) {
    ++total;
    if (!r.pass) {
      ++failed;
      std::cerr << "FAILED: " << r.name << " (seed " << seed << "): max rel error " << r.max_rel_error << "; "
                << r.worst << "\n";
    }
  };
  for (std::uint64_t s = base; s < base + f.seeds; ++s) {
    double worst = 0.0;
    for (const auto& r : gradcheck::op_suite(s, opt)) {
      report(r, s);
      worst = std::max(worst, r.max_rel_error);
    }
    for (const auto& r : gradcheck::block_suite(s, opt)) {
      report(r, s);
      worst = std::max(worst, r.max_rel_error);
    }
    for (Arch a : archs) {
      const auto r = gradcheck::model_check(a, s, opt);
      report(r, s);
      worst = std::max(worst, r.max_rel_error);
    }
    std::printf("seed %llu: worst relative error %.3e\n", static_cast<unsigned long long>(s), worst);
  }
  std::printf("%zu/%zu gradient checks passed (rel tol %.1e)\n", total - failed, total, opt.rel_tol);
  return failed == 0 ? kOk : kCheckFailed;
}

int cmd_compare(const Flags& f) {
  fs::path path = f.metrics;
  if (path.empty()) {
    if (f.config.empty()) throw ValidationError("--metrics: required (or --config to use its out_dir)");
    path = fs::path(resolve(f).out_dir) / "metrics.csv";
  }
  std::vector<std::string> tables = f.tables;
  if (tables.empty()) {
    tables = {std::string(TLNET_BASELINE_DIR) + "/table2.csv", std::string(TLNET_BASELINE_DIR) + "/ablation.csv"};
  }
  std::vector<metrics::PublishedRow> published;
  for (const auto& t : tables) {
    const auto rows = metrics::load_published(t);
    published.insert(published.end(), rows.begin(), rows.end());
  }
  std::string csv = "dataset,horizon,arch,published_model,present,published_mse,published_mae,delta_mse,delta_mae\n";
  for (const auto& rep : metrics::read_report_csv(path)) {
    std::string own;
    try {
      own = metrics::published_name(parse_arch(rep.arch));
    } catch (const ValidationError&) {
      continue;  // baseline rows such as naive_last_value
    }
    const auto deltas = metrics::compare_to_published(rep, published, own);
    std::cout << metrics::delta_table(rep, deltas) << "\n";
    for (const auto& d : deltas) {
      csv += rep.dataset + "," + std::to_string(rep.pred_len) + "," + rep.arch + "," + d.model + "," +
             (d.present ? "1" : "0") + "," + num(d.published_mse) + "," + num(d.published_mae) + "," +
             num(d.delta_mse) + "," + num(d.delta_mae) + "\n";
    }
  }
  if (!f.out.empty()) write_text(f.out, csv);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tlnet: transform-block forecasting networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(code_version()));
  Flags f;

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--config", f.config, "run config (JSON)")->required();
  train->add_option("--data", f.data, "override data.path");
  train->add_option("--out", f.out, "override out_dir");
  train->add_option("--seed", f.seed, "override the run seed");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--config", f.config, "run config (JSON)")->required();
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint (default: <out_dir>/checkpoint.bin)");
  eval->add_option("--data", f.data, "override data.path");
  eval->add_option("--out", f.out, "override out_dir");
  eval->add_option("--seed", f.seed, "override the run seed");

  auto* predict = app.add_subcommand("predict", "forecast past the end of a CSV series");
  predict->add_option("--checkpoint", f.checkpoint, "checkpoint")->required();
  predict->add_option("--data", f.data, "CSV series")->required();
  predict->add_option("--config", f.config, "run config, for the date column");
  predict->add_option("--out", f.out, "output CSV (default forecast.csv)");

  auto* verify = app.add_subcommand("verify", "run the numeric identity checks");
  verify->add_option("--tolerance", f.tolerance, "override every gated tolerance");
  verify->add_option("--seeds", f.seeds, "number of seeds")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of ops, blocks and models");
  grad->add_option("--arch", f.arch, "architecture for the model check, or 'all'");
  grad->add_option("--seed", f.seed, "first seed");
  grad->add_option("--seeds", f.seeds, "number of seeds")->check(CLI::PositiveNumber);
  grad->add_option("--tolerance", f.tolerance, "relative tolerance");
#ifdef TLNET_FAULT_INJECTION
  grad->add_option("--inject-fault", f.fault, "negate the backward rule of this op");
#endif

  auto* compare = app.add_subcommand("compare", "deltas of a metrics report against published numbers");
  compare->add_option("--metrics", f.metrics, "metrics CSV written by eval");
  compare->add_option("--config", f.config, "run config; uses <out_dir>/metrics.csv");
  compare->add_option("--table", f.tables, "published CSV (repeatable)");
  compare->add_option("--out", f.out, "write the deltas as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(f);
    if (*eval) return cmd_eval(f);
    if (*predict) return cmd_predict(f);
    if (*verify) return cmd_verify(f);
    if (*grad) return cmd_gradcheck(f);
    if (*compare) return cmd_compare(f);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kCheckFailed;
  }
  return kUsage;
}
