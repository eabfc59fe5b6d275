#include "tlnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tlnet/error.hpp"

namespace tlnet::metrics {

namespace {

void require_same(const Tensor& pred, const Tensor& target) {
  if (pred.rank() != 3 || pred.shape() != target.shape()) {
    throw DimensionError("metrics need matching (B, d, tau) tensors, got " + shape_str(pred.shape()) + " and " +
                         shape_str(target.shape()));
  }
  if (pred.dim(0) == 0) throw ValidationError("metrics need at least one window");
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw DimensionError("pearson needs equal nonempty sequences");
  const double n = double(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Scores score(const Tensor& pred, const Tensor& target) {
  require_same(pred, target);
  const std::size_t b = pred.dim(0), d = pred.dim(1), tau = pred.dim(2);
  Scores s;
  const auto p = pred.data();
  const auto t = target.data();
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double e = p[i] - t[i];
    se += e * e;
    ae += std::abs(e);
  }
  s.mse = se / double(p.size());
  s.mae = ae / double(p.size());
  double corr_sum = 0;
  std::size_t used = 0;
  std::vector<double> pc(b * tau), tc(b * tau);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t w = 0; w < b; ++w) {
      for (std::size_t k = 0; k < tau; ++k) {
        pc[w * tau + k] = pred.at(w, c, k);
        tc[w * tau + k] = target.at(w, c, k);
      }
    }
    const double r = pearson(pc, tc);
    if (std::isnan(r)) {
      s.excluded_channels.push_back(c);
    } else {
      corr_sum += r;
      ++used;
    }
  }
  s.corr = used ? corr_sum / double(used) : std::numeric_limits<double>::quiet_NaN();
  return s;
}

Forecast forecast(const Model& model, const data::WindowedDataset& split, const data::NormStats* stats,
                  std::size_t batch_size) {
  if (split.size() == 0) throw ValidationError("cannot evaluate an empty split");
  if (batch_size == 0) throw ValidationError("batch_size must be >= 1");
  const std::size_t n = split.size(), d = split.channels(), tau = split.pred_len();
  Forecast f{Tensor({n, d, tau}), Tensor({n, d, tau})};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
    const auto [x, y] = split.batch(idx);
    const Tensor p = model.predict(x);
    const std::size_t off = start * d * tau;
    std::copy(p.data().begin(), p.data().end(), f.pred.data().begin() + long(off));
    std::copy(y.data().begin(), y.data().end(), f.target.data().begin() + long(off));
  }
  if (stats) {
    f.pred = data::denormalize(f.pred, *stats);
    f.target = data::denormalize(f.target, *stats);
  }
  return f;
}

Forecast naive_last_value(const data::WindowedDataset& split, const data::NormStats* stats) {
  if (split.size() == 0) throw ValidationError("cannot evaluate an empty split");
  const std::size_t n = split.size(), d = split.channels(), t = split.input_len(), tau = split.pred_len();
  Forecast f{Tensor({n, d, tau}), Tensor({n, d, tau})};
  for (std::size_t w = 0; w < n; ++w) {
    const Tensor x = split.input(w);
    const Tensor y = split.target(w);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t k = 0; k < tau; ++k) {
        f.pred.at(w, c, k) = x.at(c, t - 1);
        f.target.at(w, c, k) = y.at(c, k);
      }
    }
  }
  if (stats) {
    f.pred = data::denormalize(f.pred, *stats);
    f.target = data::denormalize(f.target, *stats);
  }
  return f;
}

MetricsReport make_report(const Forecast& f, std::string dataset, std::string arch, std::size_t input_len,
                          std::uint64_t seed, std::string config_hash, bool original_scale) {
  const Scores s = score(f.pred, f.target);
  MetricsReport r;
  r.dataset = std::move(dataset);
  r.arch = std::move(arch);
  r.input_len = input_len;
  r.pred_len = f.pred.dim(2);
  r.scale = original_scale ? "original" : "normalized";
  r.n_windows = f.pred.dim(0);
  r.mse = s.mse;
  r.mae = s.mae;
  r.corr = s.corr;
  r.excluded_channels = s.excluded_channels.size();
  r.seed = seed;
  r.config_hash = std::move(config_hash);
  return r;
}

std::string report_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << "dataset,arch,input_len,pred_len,split,scale,n_windows,mse,mae,corr,excluded_channels,seed,config_hash\n";
  for (const auto& r : reports) {
    out << r.dataset << ',' << r.arch << ',' << r.input_len << ',' << r.pred_len << ',' << r.split << ','
        << r.scale << ',' << r.n_windows << ',' << num(r.mse) << ',' << num(r.mae) << ',' << num(r.corr) << ','
        << r.excluded_channels << ',' << r.seed << ',' << r.config_hash << '\n';
  }
  return out.str();
}

void write_report_csv(const std::filesystem::path& path, const std::vector<MetricsReport>& reports) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_csv(reports);
}

std::vector<MetricsReport> read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != report_csv({}).substr(0, report_csv({}).size() - 1)) {
    throw IoError(path.string() + ": not a metrics report (unexpected header)");
  }
  std::vector<MetricsReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (line.back() == ',') c.emplace_back();
    if (c.size() != 13) throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 13 cells");
    try {
      MetricsReport r;
      r.dataset = c[0];
      r.arch = c[1];
      r.input_len = std::stoul(c[2]);
      r.pred_len = std::stoul(c[3]);
      r.split = c[4];
      r.scale = c[5];
      r.n_windows = std::stoul(c[6]);
      r.mse = std::stod(c[7]);
      r.mae = std::stod(c[8]);
      r.corr = std::stod(c[9]);
      r.excluded_channels = std::stoul(c[10]);
      r.seed = std::stoull(c[11]);
      r.config_hash = c[12];
      out.push_back(r);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

std::string report_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  out << pad("dataset", 12) << pad("arch", 18) << pad("T", 6) << pad("tau", 6) << pad("windows", 9) << pad("mse", 10)
      << pad("mae", 10) << pad("corr", 10) << "scale\n";
  for (const auto& r : reports) {
    out << pad(r.dataset, 12) << pad(r.arch, 18) << pad(std::to_string(r.input_len), 6)
        << pad(std::to_string(r.pred_len), 6) << pad(std::to_string(r.n_windows), 9) << pad(fixed(r.mse), 10)
        << pad(fixed(r.mae), 10) << pad(fixed(r.corr), 10) << r.scale << '\n';
  }
  return out.str();
}

void write_predictions_csv(const std::filesystem::path& path, const Forecast& f, std::size_t first_row,
                           std::size_t input_len, std::size_t max_windows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "window,step,row,channel,target,prediction\n";
  const std::size_t n = f.pred.dim(0), d = f.pred.dim(1), tau = f.pred.dim(2);
  const std::size_t count = std::min(n, max_windows);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t w = count == 1 ? 0 : j * (n - 1) / (count - 1);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t k = 0; k < tau; ++k) {
        out << w << ',' << k << ',' << first_row + w + input_len + k << ',' << c << ',' << num(f.target.at(w, c, k))
            << ',' << num(f.pred.at(w, c, k)) << '\n';
      }
    }
  }
}

std::vector<PublishedRow> load_published(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<PublishedRow> rows;
  std::string line;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      if (line != "dataset,horizon,model,mse,mae") throw IoError(path.string() + ": unexpected header '" + line + "'");
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 5 cells");
    try {
      rows.push_back({cells[0], std::stoul(cells[1]), cells[2], std::stod(cells[3]), std::stod(cells[4])});
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return rows;
}

std::string published_name(Arch arch) {
  switch (arch) {
    case Arch::ft_svd: return "FT-SVD";
    case Arch::ft_matrix: return "FT-Matrix";
    case Arch::ft_conv: return "FT-Conv";
    case Arch::conv_svd: return "Conv-SVD";
    case Arch::ft_only: return "FT";
    case Arch::svd_only: return "SVD";
    case Arch::matrix_only: return "Matrix";
    case Arch::conv_only: return "Conv";
  }
  return "";
}

std::vector<Delta> compare_to_published(const MetricsReport& report, const std::vector<PublishedRow>& table,
                                        const std::string& own_model) {
  std::vector<Delta> out;
  bool own_found = false;
  for (const auto& row : table) {
    if (row.dataset != report.dataset || row.horizon != report.pred_len) continue;
    Delta d;
    d.model = row.model;
    d.present = true;
    d.published_mse = row.mse;
    d.published_mae = row.mae;
    d.delta_mse = report.mse - row.mse;
    d.delta_mae = report.mae - row.mae;
    d.ratio_mse = report.mse / row.mse;
    d.ratio_mae = report.mae / row.mae;
    own_found = own_found || row.model == own_model;
    out.push_back(d);
  }
  if (!own_found) out.insert(out.begin(), Delta{own_model});
  return out;
}

std::string delta_table(const MetricsReport& report, const std::vector<Delta>& deltas) {
  std::ostringstream out;
  out << "ours: " << report.dataset << " tau=" << report.pred_len << " " << report.arch << " mse=" << fixed(report.mse)
      << " mae=" << fixed(report.mae) << " (" << report.scale << " scale)\n";
  out << pad("published", 14) << pad("mse", 9) << pad("mae", 9) << pad("d_mse", 10) << pad("d_mae", 10)
      << pad("r_mse", 8) << "r_mae\n";
  for (const auto& d : deltas) {
    if (!d.present) {
      out << pad(d.model, 14) << "absent from table\n";
      continue;
    }
    char sm[16], sa[16];
    std::snprintf(sm, sizeof sm, "%+.4f", d.delta_mse);
    std::snprintf(sa, sizeof sa, "%+.4f", d.delta_mae);
    out << pad(d.model, 14) << pad(fixed(d.published_mse, 3), 9) << pad(fixed(d.published_mae, 3), 9) << pad(sm, 10)
        << pad(sa, 10) << pad(fixed(d.ratio_mse, 3), 8) << fixed(d.ratio_mae, 3) << '\n';
  }
  return out.str();
}

}  // namespace tlnet::metrics
