#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tlnet/data.hpp"
#include "tlnet/model.hpp"

// Forecast metrics, report files and comparison against published numbers.
namespace tlnet::metrics {

struct Scores {
  double mse = 0.0;
  double mae = 0.0;
  // Mean over channels of the Pearson correlation between the concatenated
  // predictions and targets of that channel. NaN when every channel is excluded.
  double corr = 0.0;
  std::vector<std::size_t> excluded_channels;  // zero variance in prediction or target
};

// pred and target are (B, d, tau); mse and mae average over every element.
Scores score(const Tensor& pred, const Tensor& target);

// Pearson correlation of two equal-length sequences; NaN if either is constant.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct Forecast {
  Tensor pred;    // (n_windows, d, tau)
  Tensor target;  // (n_windows, d, tau)
};

// Runs the model over every window of the split in order. With `stats`,
// predictions and targets are mapped back to the original scale.
Forecast forecast(const Model& model, const data::WindowedDataset& split, const data::NormStats* stats = nullptr,
                  std::size_t batch_size = 256);

// Repeats the last input value of each channel across the horizon.
Forecast naive_last_value(const data::WindowedDataset& split, const data::NormStats* stats = nullptr);

struct MetricsReport {
  std::string dataset;
  std::string arch;
  std::size_t input_len = 0;
  std::size_t pred_len = 0;
  std::string split = "test";
  std::string scale = "normalized";
  std::size_t n_windows = 0;
  double mse = 0.0;
  double mae = 0.0;
  double corr = 0.0;
  std::size_t excluded_channels = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

MetricsReport make_report(const Forecast& f, std::string dataset, std::string arch, std::size_t input_len,
                          std::uint64_t seed, std::string config_hash, bool original_scale);

// One header line plus one row per report; numbers use %.17g so identical runs
// give identical bytes.
std::string report_csv(const std::vector<MetricsReport>& reports);
void write_report_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports);
// Parses a file written by write_report_csv.
std::vector<MetricsReport> read_report_csv(const std::filesystem::path& path);
std::string report_table(const std::vector<MetricsReport>& reports);

// Long-format plot data: window, step, row, channel, target, prediction for up
// to `max_windows` evenly spaced windows. `first_row` is the split's offset in
// the full series.
void write_predictions_csv(const std::filesystem::path& path, const Forecast& f, std::size_t first_row,
                           std::size_t input_len, std::size_t max_windows);

struct PublishedRow {
  std::string dataset;
  std::size_t horizon = 0;
  std::string model;
  double mse = 0.0;
  double mae = 0.0;
};

// CSV with header dataset,horizon,model,mse,mae; lines starting with '#' are comments.
std::vector<PublishedRow> load_published(const std::filesystem::path& path);

// Column name used by the published tables for an architecture.
std::string published_name(Arch arch);

struct Delta {
  std::string model;
  bool present = false;  // false when the table has no such cell
  double published_mse = 0.0;
  double published_mae = 0.0;
  double delta_mse = 0.0;  // ours - published
  double delta_mae = 0.0;
  double ratio_mse = 0.0;  // ours / published
  double ratio_mae = 0.0;
};

// Deltas of the report against every published model for the same dataset and
// horizon, plus an absent entry for `own_model` if the table lacks it.
std::vector<Delta> compare_to_published(const MetricsReport& report, const std::vector<PublishedRow>& table,
                                        const std::string& own_model);
std::string delta_table(const MetricsReport& report, const std::vector<Delta>& deltas);

}  // namespace tlnet::metrics
