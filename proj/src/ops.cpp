#include "tlnet/ops.hpp"

#include <cmath>
#include <numbers>

#include "tlnet/error.hpp"
#include "tlnet/fft.hpp"
#include "tlnet/linalg.hpp"

namespace tlnet::ops {

namespace {

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

Graph& graph_of(const Var& a) {
  if (!a.valid()) throw StateError("operation on an unbound Var");
  return a.graph();
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  if (name == "tanh") return Activation::tanh;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::gelu: return "gelu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return graph_of(a).record("add", std::move(out), {a, b},
                            [](const Tensor& g, std::vector<Tensor*>& in) {
                              if (in[0]) *in[0] += g;
                              if (in[1]) *in[1] += g;
                            });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return graph_of(a).record("sub", std::move(out), {a, b},
                            [](const Tensor& g, std::vector<Tensor*>& in) {
                              if (in[0]) *in[0] += g;
                              if (in[1]) {
                                for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] -= g[i];
                              }
                            });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Graph& g = graph_of(a);
  const NodeId ia = a.id(), ib = b.id();
  return g.record("mul", std::move(out), {a, b},
                  [&g, ia, ib](const Tensor& grad, std::vector<Tensor*>& in) {
                    const Tensor& av = g.value(ia);
                    const Tensor& bv = g.value(ib);
                    if (in[0]) {
                      for (std::size_t i = 0; i < grad.size(); ++i) (*in[0])[i] += grad[i] * bv[i];
                    }
                    if (in[1]) {
                      for (std::size_t i = 0; i < grad.size(); ++i) (*in[1])[i] += grad[i] * av[i];
                    }
                  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  out *= factor;
  return graph_of(a).record("scale", std::move(out), {a},
                            [factor](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += factor * g[i];
                            });
}

Var abs(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::abs(v);
  Graph& g = graph_of(a);
  const NodeId ia = a.id();
  return g.record("abs", std::move(out), {a}, [&g, ia](const Tensor& grad, std::vector<Tensor*>& in) {
    const Tensor& av = g.value(ia);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double sgn = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
      (*in[0])[i] += sgn * grad[i];
    }
  });
}

Var activation(const Var& x, Activation kind) {
  Tensor out = x.value();
  switch (kind) {
    case Activation::relu:
      for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::gelu:
      for (double& v : out.data()) v = gelu(v);
      break;
    case Activation::tanh:
      for (double& v : out.data()) v = std::tanh(v);
      break;
  }
  Graph& g = graph_of(x);
  const NodeId ix = x.id();
  std::string name = "activation." + std::string(to_string(kind));
  return g.record(name, std::move(out), {x},
                  [&g, ix, kind](const Tensor& grad, std::vector<Tensor*>& in) {
                    const Tensor& xv = g.value(ix);
                    Tensor& gx = *in[0];
                    for (std::size_t i = 0; i < grad.size(); ++i) {
                      double d = 0.0;
                      switch (kind) {
                        case Activation::relu: d = xv[i] > 0.0 ? 1.0 : 0.0; break;
                        case Activation::gelu: d = gelu_grad(xv[i]); break;
                        case Activation::tanh: {
                          const double t = std::tanh(xv[i]);
                          d = 1.0 - t * t;
                          break;
                        }
                      }
                      gx[i] += d * grad[i];
                    }
                  });
}

Var sum(const Var& a) {
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  return graph_of(a).record("sum", Tensor::scalar(acc), {a},
                            [](const Tensor& g, std::vector<Tensor*>& in) {
                              const double gv = g[0];
                              for (double& v : in[0]->data()) v += gv;
                            });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : a.value().data()) acc += v;
  const double inv = 1.0 / static_cast<double>(n);
  return graph_of(a).record("mean", Tensor::scalar(acc * inv), {a},
                            [inv](const Tensor& g, std::vector<Tensor*>& in) {
                              const double gv = g[0] * inv;
                              for (double& v : in[0]->data()) v += gv;
                            });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return graph_of(a).record("reshape", std::move(out), {a},
                            [](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                            });
}

Var transpose(const Var& a) {
  if (a.value().rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_str(a.shape()));
  return graph_of(a).record("transpose", linalg::transpose(a.value()), {a},
                            [](const Tensor& g, std::vector<Tensor*>& in) {
                              *in[0] += linalg::transpose(g);
                            });
}

Var select(const Var& a, std::size_t index) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || index >= av.dim(0)) {
    throw DimensionError("select index " + std::to_string(index) + " out of range for " +
                         shape_str(av.shape()));
  }
  Shape shape(av.shape().begin() + 1, av.shape().end());
  const std::size_t block = shape_size(shape);
  const std::size_t offset = index * block;
  std::vector<double> data(av.data().begin() + static_cast<std::ptrdiff_t>(offset),
                           av.data().begin() + static_cast<std::ptrdiff_t>(offset + block));
  Tensor out(std::move(shape));
  std::copy(data.begin(), data.end(), out.data().begin());
  return graph_of(a).record("select", std::move(out), {a},
                            [offset](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[offset + i] += g[i];
                            });
}

Var stack(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("stack of zero tensors");
  const Shape& inner = parts.front().shape();
  for (const Var& p : parts) {
    if (p.shape() != inner) throw DimensionError("stack: mismatched part shapes");
  }
  Shape shape{parts.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor out(shape);
  const std::size_t block = shape_size(inner);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto src = parts[i].value().data();
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * block));
  }
  return graph_of(parts.front())
      .record("stack", std::move(out), parts, [block](const Tensor& g, std::vector<Tensor*>& in) {
        for (std::size_t p = 0; p < in.size(); ++p) {
          if (!in[p]) continue;
          for (std::size_t i = 0; i < block; ++i) (*in[p])[i] += g[p * block + i];
        }
      });
}

Var narrow_last(const Var& a, std::size_t start, std::size_t len) {
  const Tensor& av = a.value();
  if (av.rank() == 0 || start + len > av.shape().back()) {
    throw DimensionError("narrow_last [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of range for " +
                         shape_str(av.shape()));
  }
  const std::size_t n = av.shape().back();
  const std::size_t rows = av.size() / n;
  Shape shape = av.shape();
  shape.back() = len;
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < len; ++i) out[r * len + i] = av[r * n + start + i];
  }
  return graph_of(a).record("narrow_last", std::move(out), {a},
                            [rows, n, start, len](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t i = 0; i < len; ++i) {
                                  (*in[0])[r * n + start + i] += g[r * len + i];
                                }
                              }
                            });
}

Var slice_flat(const Var& a, std::size_t offset, Shape shape) {
  const std::size_t count = shape_size(shape);
  if (offset + count > a.value().size()) throw DimensionError("slice_flat out of range");
  Tensor out(std::move(shape));
  const auto src = a.value().data();
  std::copy(src.begin() + static_cast<std::ptrdiff_t>(offset),
            src.begin() + static_cast<std::ptrdiff_t>(offset + count), out.data().begin());
  return graph_of(a).record("slice", std::move(out), {a},
                            [offset](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[offset + i] += g[i];
                            });
}

Var diag(const Var& s) {
  if (s.value().rank() != 1) throw DimensionError("diag expects a vector, got " + shape_str(s.shape()));
  const std::size_t k = s.value().size();
  Tensor out({k, k});
  for (std::size_t i = 0; i < k; ++i) out.at(i, i) = s.value()[i];
  return graph_of(s).record("diag", std::move(out), {s},
                            [k](const Tensor& g, std::vector<Tensor*>& in) {
                              for (std::size_t i = 0; i < k; ++i) (*in[0])[i] += g.at(i, i);
                            });
}

Var matmul(const Var& a, const Var& b) {
  Graph& g = graph_of(a);
  const NodeId ia = a.id(), ib = b.id();
  return g.record("matmul", linalg::matmul(a.value(), b.value()), {a, b},
                  [&g, ia, ib](const Tensor& grad, std::vector<Tensor*>& in) {
                    if (in[0]) *in[0] += linalg::matmul(grad, linalg::transpose(g.value(ib)));
                    if (in[1]) *in[1] += linalg::matmul(linalg::transpose(g.value(ia)), grad);
                  });
}

Var masked_matmul(const Var& w, const Tensor& mask, const Var& x) {
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  if (wv.rank() != 2 || xv.rank() != 2 || mask.shape() != wv.shape()) {
    throw DimensionError("masked_matmul shapes: w " + shape_str(wv.shape()) + ", mask " +
                         shape_str(mask.shape()) + ", x " + shape_str(xv.shape()));
  }
  const std::size_t p = wv.dim(0), q = wv.dim(1), r = xv.dim(1);
  if (xv.dim(0) != q) {
    throw DimensionError("masked_matmul inner dimensions differ: " + shape_str(wv.shape()) +
                         " x " + shape_str(xv.shape()));
  }
  // Active (row, col) positions, row-major.
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == 1.0) active.push_back(i);
    else if (mask[i] != 0.0) throw ValidationError("masked_matmul: mask entries must be 0 or 1");
  }
  Tensor out({p, r});
  for (std::size_t idx : active) {
    const std::size_t i = idx / q, l = idx % q;
    const double wl = wv[idx];
    double* o = &out.at(i, 0);
    const double* xr = &xv.at(l, 0);
    for (std::size_t j = 0; j < r; ++j) o[j] += wl * xr[j];
  }
  Graph& g = graph_of(w);
  const NodeId iw = w.id(), ix = x.id();
  return g.record("masked_matmul", std::move(out), {w, x},
                  [&g, iw, ix, active = std::move(active), q, r](const Tensor& grad,
                                                                  std::vector<Tensor*>& in) {
                    const Tensor& wv = g.value(iw);
                    const Tensor& xv = g.value(ix);
                    for (std::size_t idx : active) {
                      const std::size_t i = idx / q, l = idx % q;
                      const double* gr = &grad.at(i, 0);
                      if (in[0]) {
                        const double* xr = &xv.at(l, 0);
                        double acc = 0.0;
                        for (std::size_t j = 0; j < r; ++j) acc += gr[j] * xr[j];
                        (*in[0])[idx] += acc;
                      }
                      if (in[1]) {
                        const double wl = wv[idx];
                        double* gx = &in[1]->at(l, 0);
                        for (std::size_t j = 0; j < r; ++j) gx[j] += wl * gr[j];
                      }
                    }
                  });
}

Var conv1d(const Var& x, const Var& kernels, ConvMode mode) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  if ((xv.rank() != 2 && xv.rank() != 3) || kv.rank() != 3) {
    throw DimensionError("conv1d expects x (C_in, N) or (B, C_in, N) and kernels (C_out, C_in, K), got " +
                         shape_str(xv.shape()) + " and " + shape_str(kv.shape()));
  }
  const bool batched = xv.rank() == 3;
  const std::size_t batch = batched ? xv.dim(0) : 1;
  const std::size_t c_in = xv.dim(batched ? 1 : 0);
  const std::size_t n = xv.shape().back();
  const std::size_t c_out = kv.dim(0);
  const std::size_t k = kv.dim(2);
  if (kv.dim(1) != c_in) {
    throw DimensionError("conv1d: kernels expect " + std::to_string(kv.dim(1)) +
                         " input channels, x has " + std::to_string(c_in));
  }
  if (k % 2 == 0) throw ValidationError("conv1d: kernel size must be odd, got " + std::to_string(k));
  if (k > n) {
    throw ValidationError("conv1d: kernel size " + std::to_string(k) + " exceeds length " +
                          std::to_string(n));
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(n);
  const bool circular = mode == ConvMode::circular;

  // Calls f(b, o, c, j, t, m) for every output t reading input position m.
  auto for_each_tap = [=](auto&& f) {
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t c = 0; c < c_in; ++c) {
          for (std::size_t j = 0; j < k; ++j) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - half;
            for (std::ptrdiff_t t = 0; t < len; ++t) {
              std::ptrdiff_t m = t + shift;
              if (circular) {
                m = ((m % len) + len) % len;
              } else if (m < 0 || m >= len) {
                continue;
              }
              f(b, o, c, j, static_cast<std::size_t>(t), static_cast<std::size_t>(m));
            }
          }
        }
      }
    }
  };

  Shape out_shape = batched ? Shape{batch, c_out, n} : Shape{c_out, n};
  Tensor out(out_shape);
  for_each_tap([&](std::size_t b, std::size_t o, std::size_t c, std::size_t j, std::size_t t,
                   std::size_t m) {
    out[(b * c_out + o) * n + t] += kv[(o * c_in + c) * k + j] * xv[(b * c_in + c) * n + m];
  });

  Graph& g = graph_of(x);
  const NodeId ix = x.id(), ik = kernels.id();
  return g.record(circular ? "conv1d.circular" : "conv1d.same", std::move(out), {x, kernels},
                  [&g, ix, ik, for_each_tap, c_in, c_out, n, k](const Tensor& grad,
                                                                 std::vector<Tensor*>& in) {
                    const Tensor& xv = g.value(ix);
                    const Tensor& kv = g.value(ik);
                    for_each_tap([&](std::size_t b, std::size_t o, std::size_t c, std::size_t j,
                                     std::size_t t, std::size_t m) {
                      const double gv = grad[(b * c_out + o) * n + t];
                      if (in[0]) (*in[0])[(b * c_in + c) * n + m] += kv[(o * c_in + c) * k + j] * gv;
                      if (in[1]) (*in[1])[(o * c_in + c) * k + j] += xv[(b * c_in + c) * n + m] * gv;
                    });
                  });
}

Var rfft(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0 || xv.rank() > 3) throw DimensionError("rfft expects rank 1..3, got " + shape_str(xv.shape()));
  const std::size_t n = xv.shape().back();
  if (n < 2) throw DimensionError("rfft needs N >= 2");
  const std::size_t bins = fft::rfft_bins(n);
  const std::size_t rows = xv.size() / n;
  Shape shape = xv.shape();
  shape.back() = bins;
  shape.push_back(2);
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    fft::rfft_row(xv.data().subspan(r * n, n), out.data().subspan(r * 2 * bins, 2 * bins));
  }
  return graph_of(x).record("rfft", std::move(out), {x},
                            [rows, n, bins](const Tensor& grad, std::vector<Tensor*>& in) {
                              // dL/dx(t) = sum_k Re(G_k e^{+i 2 pi k t / N}) over kept bins,
                              // i.e. N * irfft(G / c) with c = 1 at DC/Nyquist, 2 elsewhere.
                              std::vector<double> spec(2 * bins);
                              std::vector<double> row(n);
                              for (std::size_t r = 0; r < rows; ++r) {
                                for (std::size_t kk = 0; kk < bins; ++kk) {
                                  const bool edge = kk == 0 || 2 * kk == n;
                                  const double f = static_cast<double>(n) * (edge ? 1.0 : 0.5);
                                  spec[2 * kk] = grad[r * 2 * bins + 2 * kk] * f;
                                  spec[2 * kk + 1] = grad[r * 2 * bins + 2 * kk + 1] * f;
                                }
                                fft::irfft_row(spec, row);
                                for (std::size_t t = 0; t < n; ++t) (*in[0])[r * n + t] += row[t];
                              }
                            });
}

Var irfft(const Var& spectrum, std::size_t out_len) {
  const Tensor& sv = spectrum.value();
  const std::size_t bins = fft::rfft_bins(out_len);
  if (sv.rank() < 2 || sv.shape().back() != 2 || sv.shape()[sv.rank() - 2] != bins) {
    throw DimensionError("irfft: spectrum " + shape_str(sv.shape()) +
                         " inconsistent with out_len " + std::to_string(out_len));
  }
  const std::size_t rows = sv.size() / (2 * bins);
  Shape shape(sv.shape().begin(), sv.shape().end() - 2);
  shape.push_back(out_len);
  Tensor out(shape);
  for (std::size_t r = 0; r < rows; ++r) {
    fft::irfft_row(sv.data().subspan(r * 2 * bins, 2 * bins),
                   out.data().subspan(r * out_len, out_len));
  }
  return graph_of(spectrum).record(
      "irfft", std::move(out), {spectrum}, [rows, out_len, bins](const Tensor& grad, std::vector<Tensor*>& in) {
        // dL/dY_k = (c_k / N) * rfft(g)_k, with c = 1 at DC/Nyquist, 2 elsewhere.
        std::vector<double> spec(2 * bins);
        const double inv_n = 1.0 / static_cast<double>(out_len);
        for (std::size_t r = 0; r < rows; ++r) {
          fft::rfft_row(grad.data().subspan(r * out_len, out_len), spec);
          for (std::size_t kk = 0; kk < bins; ++kk) {
            const bool edge = kk == 0 || 2 * kk == out_len;
            const double f = (edge ? 1.0 : 2.0) * inv_n;
            (*in[0])[r * 2 * bins + 2 * kk] += spec[2 * kk] * f;
            (*in[0])[r * 2 * bins + 2 * kk + 1] += spec[2 * kk + 1] * f;
          }
        }
      });
}

Var spectral_matmul(const Var& spectrum, const Var& w_re, const Var& w_im) {
  const Tensor& xv = spectrum.value();
  const Tensor& wr = w_re.value();
  const Tensor& wi = w_im.value();
  if (wr.rank() != 3 || wr.shape() != wi.shape()) {
    throw DimensionError("spectral_matmul: weights must be (C, F_out, F_in), got " +
                         shape_str(wr.shape()) + " and " + shape_str(wi.shape()));
  }
  const std::size_t channels = wr.dim(0), f_out = wr.dim(1), f_in = wr.dim(2);
  const bool batched = xv.rank() == 4;
  if ((xv.rank() != 3 && !batched) || xv.shape().back() != 2 ||
      xv.shape()[xv.rank() - 2] != f_in || xv.shape()[xv.rank() - 3] != channels) {
    throw DimensionError("spectral_matmul: spectrum " + shape_str(xv.shape()) +
                         " does not match weights " + shape_str(wr.shape()));
  }
  const std::size_t batch = batched ? xv.dim(0) : 1;
  Shape shape = xv.shape();
  shape[shape.size() - 2] = f_out;
  Tensor out(shape);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double* x = &xv[(b * channels + c) * f_in * 2];
      double* y = &out[(b * channels + c) * f_out * 2];
      for (std::size_t o = 0; o < f_out; ++o) {
        const double* rr = &wr[(c * f_out + o) * f_in];
        const double* ri = &wi[(c * f_out + o) * f_in];
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < f_in; ++i) {
          re += rr[i] * x[2 * i] - ri[i] * x[2 * i + 1];
          im += rr[i] * x[2 * i + 1] + ri[i] * x[2 * i];
        }
        y[2 * o] = re;
        y[2 * o + 1] = im;
      }
    }
  }
  Graph& g = graph_of(spectrum);
  const NodeId ix = spectrum.id(), ir = w_re.id(), ii = w_im.id();
  return g.record(
      "spectral_matmul", std::move(out), {spectrum, w_re, w_im},
      [&g, ix, ir, ii, batch, channels, f_out, f_in](const Tensor& grad, std::vector<Tensor*>& in) {
        const Tensor& xv = g.value(ix);
        const Tensor& wr = g.value(ir);
        const Tensor& wi = g.value(ii);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < channels; ++c) {
            const double* x = &xv[(b * channels + c) * f_in * 2];
            const double* gy = &grad[(b * channels + c) * f_out * 2];
            for (std::size_t o = 0; o < f_out; ++o) {
              const double gr = gy[2 * o];
              const double gi = gy[2 * o + 1];
              const std::size_t row = (c * f_out + o) * f_in;
              if (in[1] || in[2]) {
                for (std::size_t i = 0; i < f_in; ++i) {
                  const double xr = x[2 * i], xi = x[2 * i + 1];
                  if (in[1]) (*in[1])[row + i] += gr * xr + gi * xi;
                  if (in[2]) (*in[2])[row + i] += -gr * xi + gi * xr;
                }
              }
              if (in[0]) {
                double* gx = &(*in[0])[(b * channels + c) * f_in * 2];
                for (std::size_t i = 0; i < f_in; ++i) {
                  gx[2 * i] += wr[row + i] * gr + wi[row + i] * gi;
                  gx[2 * i + 1] += -wi[row + i] * gr + wr[row + i] * gi;
                }
              }
            }
          }
        }
      });
}

SvdVars svd(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("svd expects a matrix, got " + shape_str(xv.shape()));
  linalg::SvdFactors f = linalg::svd(xv);
  const std::size_t k = xv.dim(0), n = xv.dim(1);
  Tensor packed({k * k + k + k * n});
  auto dst = packed.data().begin();
  dst = std::copy(f.u.data().begin(), f.u.data().end(), dst);
  dst = std::copy(f.s.data().begin(), f.s.data().end(), dst);
  std::copy(f.v.data().begin(), f.v.data().end(), dst);

  Var node = graph_of(x).record(
      "svd", std::move(packed), {x},
      [f = std::move(f), k, n](const Tensor& grad, std::vector<Tensor*>& in) {
        const auto gd = grad.data();
        Tensor gu({k, k}, std::vector<double>(gd.begin(), gd.begin() + static_cast<std::ptrdiff_t>(k * k)));
        Tensor gs({k}, std::vector<double>(gd.begin() + static_cast<std::ptrdiff_t>(k * k),
                                           gd.begin() + static_cast<std::ptrdiff_t>(k * k + k)));
        Tensor gv({k, n}, std::vector<double>(gd.begin() + static_cast<std::ptrdiff_t>(k * k + k), gd.end()));
        *in[0] += linalg::svd_backward(f, gu, gs, gv);
      });
  return SvdVars{slice_flat(node, 0, {k, k}), slice_flat(node, k * k, {k}),
                 slice_flat(node, k * k + k, {k, n})};
}

}  // namespace tlnet::ops
