#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tlnet/tensor.hpp"

// CSV ingestion, z-score normalization and chronological windowing.
namespace tlnet::data {

struct RawSeries {
  std::vector<std::string> timestamps;
  std::vector<std::string> columns;  // value columns, date column excluded
  Tensor values;                     // (steps, channels)

  std::size_t steps() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::size_t channels() const { return columns.size(); }
};

// First line is the header; `date_column` names the timestamp column and every
// other column must hold finite floats. Timestamps must strictly increase.
RawSeries ingest_csv(const std::filesystem::path& path, std::string_view date_column = "date");
RawSeries parse_csv(std::istream& in, std::string_view date_column = "date",
                    std::string_view source = "<stream>");

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std; 1 where the train split is constant
  std::vector<std::size_t> constant_channels;
};

// Statistics of the first `train_rows` rows. Warns on stderr for constant
// channels.
NormStats fit_stats(const Tensor& values, std::size_t train_rows);
// Accepts a (steps, d) series or a (B, d, t) batch of windows.
Tensor normalize(const Tensor& values, const NormStats& stats);
Tensor denormalize(const Tensor& values, const NormStats& stats);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;  // test takes the remainder
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

SplitSizes split_sizes(std::size_t steps, const SplitRatios& ratios = {});

enum class Split { train, val, test };
std::string_view to_string(Split s);

// Stride-1 (input, target) windows over rows [begin, end) of a (steps, d)
// series. Holds its own copy of the rows.
class WindowedDataset {
 public:
  WindowedDataset() = default;
  WindowedDataset(const Tensor& series, std::size_t begin, std::size_t end, std::size_t input_len,
                  std::size_t pred_len, std::string_view name = "series");

  std::size_t size() const { return count_; }
  std::size_t channels() const { return channels_; }
  std::size_t input_len() const { return input_len_; }
  std::size_t pred_len() const { return pred_len_; }
  // Row of the full series where this split starts.
  std::size_t first_row() const { return begin_; }

  Tensor input(std::size_t i) const;   // (d, T), rows [i, i+T) of the split
  Tensor target(std::size_t i) const;  // (d, tau), rows [i+T, i+T+tau)
  // Stacks the listed windows: (B, d, T) inputs and (B, d, tau) targets.
  std::pair<Tensor, Tensor> batch(const std::vector<std::size_t>& indices) const;

 private:
  Tensor rows_;  // (n_s, d)
  std::size_t begin_ = 0;
  std::size_t channels_ = 0;
  std::size_t input_len_ = 0;
  std::size_t pred_len_ = 0;
  std::size_t count_ = 0;
};

struct Dataset {
  NormStats stats;
  SplitSizes sizes;
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;

  const WindowedDataset& split(Split s) const;
};

// Normalizes with train-split statistics, then windows each split on its own.
Dataset make_dataset(const RawSeries& raw, std::size_t input_len, std::size_t pred_len,
                     const SplitRatios& ratios = {});

// Hourly series where channel c is sum_k amp_k * sin(2*pi*t/period_k + c*phase_step)
// plus optional seeded Gaussian noise. Timestamps start at 2000-01-01 00:00.
struct SyntheticSpec {
  std::size_t steps = 1000;
  std::size_t channels = 2;
  std::vector<double> periods = {24.0, 50.0};
  std::vector<double> amplitudes = {1.0, 0.5};
  double phase_step = 0.7;
  double noise = 0.0;
  std::uint64_t seed = 0;
};
RawSeries synthetic_series(const SyntheticSpec& spec);

// Constant value on every channel; handy for learnability checks.
RawSeries constant_series(std::size_t steps, std::size_t channels, double value);

// Writes a header line plus one row per step, values printed round-trip exact.
void write_csv(const std::filesystem::path& path, const RawSeries& series, std::string_view date_column = "date");

// Seeded permutation of [0, n) for one epoch.
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace tlnet::data
