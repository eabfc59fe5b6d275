#include "tlnet/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>

#include "tlnet/error.hpp"

namespace tlnet::data {

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '"')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '"')) cell.remove_suffix(1);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

// Y-M-D with optional " HH:MM[:SS[.fff]]" or "THH:..." suffix, as a sortable
// tuple. Fractional seconds are kept in the last slot.
using TimeKey = std::array<double, 6>;

bool parse_timestamp(const std::string& s, TimeKey& key) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, consumed = 0;
  double sec = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%n", &y, &mo, &d, &consumed) != 3) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
  const char* rest = s.c_str() + consumed;
  if (*rest == ' ' || *rest == 'T') {
    int used = 0;
    const int n = std::sscanf(rest + 1, "%d:%d%n", &h, &mi, &used);
    if (n != 2 || h > 23 || mi > 59) return false;
    rest += 1 + used;
    if (*rest == ':') {
      if (std::sscanf(rest + 1, "%lf%n", &sec, &used) != 1 || sec >= 61) return false;
      rest += 1 + used;
    }
  }
  if (*rest == 'Z') ++rest;
  if (*rest != '\0') return false;
  key = {double(y), double(mo), double(d), double(h), double(mi), sec};
  return true;
}

std::string cell_ref(std::size_t row, std::size_t col, const std::string& name) {
  return "row " + std::to_string(row) + " (line " + std::to_string(row + 2) + "), column " +
         std::to_string(col) + " '" + name + "'";
}

}  // namespace

RawSeries ingest_csv(const std::filesystem::path& path, std::string_view date_column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_csv(in, date_column, path.string());
}

RawSeries parse_csv(std::istream& in, std::string_view date_column, std::string_view source) {
  const std::string src(source);
  std::string line;
  if (!std::getline(in, line)) throw IoError(src + ": empty file, header row expected");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const std::vector<std::string> header = split_line(line);
  const auto date_it = std::find(header.begin(), header.end(), date_column);
  if (date_it == header.end()) {
    throw ValidationError(src + ": no '" + std::string(date_column) + "' column in header");
  }
  const std::size_t date_idx = static_cast<std::size_t>(date_it - header.begin());
  RawSeries raw;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != date_idx) raw.columns.push_back(header[c]);
  }
  if (raw.columns.empty()) throw ValidationError(src + ": no value columns");

  std::vector<double> values;
  TimeKey prev{};
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError(src + ": row " + std::to_string(row) + " (line " + std::to_string(row + 2) +
                            ") has " + std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
    }
    TimeKey key;
    if (!parse_timestamp(cells[date_idx], key)) {
      throw ValidationError(src + ": " + cell_ref(row, date_idx, header[date_idx]) +
                            ": unparsable timestamp '" + cells[date_idx] + "'");
    }
    if (row > 0 && !(prev < key)) {
      throw ValidationError(src + ": timestamps not strictly increasing at row " + std::to_string(row) +
                            " ('" + cells[date_idx] + "' after '" + raw.timestamps.back() + "')");
    }
    prev = key;
    raw.timestamps.push_back(cells[date_idx]);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == date_idx) continue;
      const std::string& cell = cells[c];
      double v = 0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ValidationError(src + ": " + cell_ref(row, c, header[c]) + ": '" + cell +
                              "' is not a finite number");
      }
      values.push_back(v);
    }
    ++row;
  }
  if (row == 0) throw ValidationError(src + ": no data rows");
  raw.values = Tensor({row, raw.columns.size()}, std::move(values));
  return raw;
}

NormStats fit_stats(const Tensor& values, std::size_t train_rows) {
  if (values.rank() != 2) throw DimensionError("fit_stats expects (steps, channels)");
  if (train_rows == 0 || train_rows > values.dim(0)) {
    throw ValidationError("normalization needs a nonempty train range within the series, got " +
                          std::to_string(train_rows) + " rows");
  }
  const std::size_t d = values.dim(1);
  NormStats s{std::vector<double>(d), std::vector<double>(d), {}};
  for (std::size_t c = 0; c < d; ++c) {
    double sum = 0;
    for (std::size_t r = 0; r < train_rows; ++r) sum += values.at(r, c);
    const double mean = sum / double(train_rows);
    double sq = 0;
    for (std::size_t r = 0; r < train_rows; ++r) sq += (values.at(r, c) - mean) * (values.at(r, c) - mean);
    const double sd = std::sqrt(sq / double(train_rows));
    s.mean[c] = mean;
    if (sd > 0.0) {
      s.std[c] = sd;
    } else {
      s.std[c] = 1.0;
      s.constant_channels.push_back(c);
      std::cerr << "warning: channel " << c << " is constant over the train split; using std = 1\n";
    }
  }
  return s;
}

namespace {

template <typename F>
Tensor per_channel(const Tensor& values, const NormStats& stats, F f) {
  Tensor out = values;
  const std::size_t d = stats.mean.size();
  if (values.rank() == 2 && values.dim(1) == d) {
    for (std::size_t r = 0; r < values.dim(0); ++r)
      for (std::size_t c = 0; c < d; ++c) out.at(r, c) = f(values.at(r, c), c);
    return out;
  }
  if (values.rank() == 3 && values.dim(1) == d) {
    for (std::size_t b = 0; b < values.dim(0); ++b)
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t t = 0; t < values.dim(2); ++t) out.at(b, c, t) = f(values.at(b, c, t), c);
    return out;
  }
  throw DimensionError("normalization stats for " + std::to_string(d) + " channels cannot apply to " +
                       shape_str(values.shape()));
}

}  // namespace

Tensor normalize(const Tensor& values, const NormStats& stats) {
  return per_channel(values, stats, [&](double v, std::size_t c) { return (v - stats.mean[c]) / stats.std[c]; });
}

Tensor denormalize(const Tensor& values, const NormStats& stats) {
  return per_channel(values, stats, [&](double v, std::size_t c) { return v * stats.std[c] + stats.mean[c]; });
}

SplitSizes split_sizes(std::size_t steps, const SplitRatios& ratios) {
  if (ratios.train <= 0 || ratios.val < 0 || ratios.train + ratios.val >= 1.0) {
    throw ValidationError("split ratios must satisfy train > 0, val >= 0, train + val < 1");
  }
  // The nudge keeps e.g. 0.7 * 100 from flooring to 69.
  auto part = [&](double r) { return static_cast<std::size_t>(std::floor(r * double(steps) + 1e-9)); };
  SplitSizes s;
  s.train = part(ratios.train);
  s.val = part(ratios.val);
  s.test = steps - s.train - s.val;
  return s;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

WindowedDataset::WindowedDataset(const Tensor& series, std::size_t begin, std::size_t end,
                                 std::size_t input_len, std::size_t pred_len, std::string_view name)
    : begin_(begin), input_len_(input_len), pred_len_(pred_len) {
  if (series.rank() != 2) throw DimensionError("windowing expects (steps, channels)");
  if (begin > end || end > series.dim(0)) throw ValidationError("window range outside the series");
  if (input_len == 0 || pred_len == 0) throw ValidationError("input_len and pred_len must be positive");
  const std::size_t n = end - begin;
  const std::size_t need = input_len + pred_len;
  if (n < need) {
    throw ValidationError("split '" + std::string(name) + "' has " + std::to_string(n) +
                          " rows; needs at least input_len + pred_len = " + std::to_string(need));
  }
  channels_ = series.dim(1);
  count_ = n - need + 1;
  std::vector<double> rows(series.data().begin() + long(begin * channels_),
                           series.data().begin() + long(end * channels_));
  rows_ = Tensor({n, channels_}, std::move(rows));
}

Tensor WindowedDataset::input(std::size_t i) const {
  if (i >= count_) throw ValidationError("window index out of range");
  Tensor out({channels_, input_len_});
  for (std::size_t c = 0; c < channels_; ++c)
    for (std::size_t t = 0; t < input_len_; ++t) out.at(c, t) = rows_.at(i + t, c);
  return out;
}

Tensor WindowedDataset::target(std::size_t i) const {
  if (i >= count_) throw ValidationError("window index out of range");
  Tensor out({channels_, pred_len_});
  for (std::size_t c = 0; c < channels_; ++c)
    for (std::size_t t = 0; t < pred_len_; ++t) out.at(c, t) = rows_.at(i + input_len_ + t, c);
  return out;
}

std::pair<Tensor, Tensor> WindowedDataset::batch(const std::vector<std::size_t>& indices) const {
  const std::size_t b = indices.size();
  Tensor x({b, channels_, input_len_});
  Tensor y({b, channels_, pred_len_});
  for (std::size_t s = 0; s < b; ++s) {
    const std::size_t i = indices[s];
    if (i >= count_) throw ValidationError("window index out of range");
    for (std::size_t c = 0; c < channels_; ++c) {
      for (std::size_t t = 0; t < input_len_; ++t) x.at(s, c, t) = rows_.at(i + t, c);
      for (std::size_t t = 0; t < pred_len_; ++t) y.at(s, c, t) = rows_.at(i + input_len_ + t, c);
    }
  }
  return {std::move(x), std::move(y)};
}

const WindowedDataset& Dataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return test;
}

Dataset make_dataset(const RawSeries& raw, std::size_t input_len, std::size_t pred_len,
                     const SplitRatios& ratios) {
  Dataset ds;
  ds.sizes = split_sizes(raw.steps(), ratios);
  ds.stats = fit_stats(raw.values, ds.sizes.train);
  const Tensor norm = normalize(raw.values, ds.stats);
  const std::size_t a = ds.sizes.train, b = a + ds.sizes.val;
  ds.train = WindowedDataset(norm, 0, a, input_len, pred_len, "train");
  ds.val = WindowedDataset(norm, a, b, input_len, pred_len, "val");
  ds.test = WindowedDataset(norm, b, raw.steps(), input_len, pred_len, "test");
  return ds;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + epoch);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

// Days since 1970-01-01 to a civil date.
void civil_from_days(long long z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400) + (m <= 2);
}

std::vector<std::string> hourly_timestamps(std::size_t steps) {
  constexpr long long kStartDay = 10957;  // 2000-01-01
  std::vector<std::string> out;
  out.reserve(steps);
  char buf[32];
  for (std::size_t t = 0; t < steps; ++t) {
    int y;
    unsigned m, d;
    civil_from_days(kStartDay + static_cast<long long>(t / 24), y, m, d);
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02zu:00:00", y, m, d, t % 24);
    out.emplace_back(buf);
  }
  return out;
}

std::vector<std::string> channel_names(std::size_t channels) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < channels; ++c) names.push_back("x" + std::to_string(c));
  return names;
}

}  // namespace

RawSeries synthetic_series(const SyntheticSpec& spec) {
  if (spec.steps == 0 || spec.channels == 0) throw ValidationError("synthetic series needs steps and channels > 0");
  if (spec.periods.size() != spec.amplitudes.size()) {
    throw ValidationError("synthetic series: periods and amplitudes differ in length");
  }
  for (double p : spec.periods) {
    if (!(p > 0)) throw ValidationError("synthetic series: periods must be > 0");
  }
  RawSeries raw;
  raw.timestamps = hourly_timestamps(spec.steps);
  raw.columns = channel_names(spec.channels);
  raw.values = Tensor({spec.steps, spec.channels});
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double two_pi = 2.0 * std::acos(-1.0);
  for (std::size_t t = 0; t < spec.steps; ++t) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      double v = 0.0;
      for (std::size_t k = 0; k < spec.periods.size(); ++k) {
        v += spec.amplitudes[k] * std::sin(two_pi * double(t) / spec.periods[k] + double(c) * spec.phase_step);
      }
      if (spec.noise > 0) v += spec.noise * noise(rng);
      raw.values.at(t, c) = v;
    }
  }
  return raw;
}

RawSeries constant_series(std::size_t steps, std::size_t channels, double value) {
  RawSeries raw;
  raw.timestamps = hourly_timestamps(steps);
  raw.columns = channel_names(channels);
  raw.values = Tensor({steps, channels});
  for (double& v : raw.values.data()) v = value;
  return raw;
}

void write_csv(const std::filesystem::path& path, const RawSeries& series, std::string_view date_column) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << date_column;
  for (const auto& c : series.columns) out << ',' << c;
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < series.steps(); ++t) {
    out << series.timestamps[t];
    for (std::size_t c = 0; c < series.channels(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", series.values.at(t, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tlnet::data
