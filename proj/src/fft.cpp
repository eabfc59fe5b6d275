#include "tlnet/fft.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <unordered_map>

#include "tlnet/error.hpp"

namespace tlnet::fft {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

// exp(-2 pi i k / n), evaluated directly rather than by recurrence.
Complex unit_root(std::size_t k, std::size_t n) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

struct Radix2Plan {
  std::size_t n;
  std::vector<std::size_t> bitrev;
  std::vector<Complex> twiddle;  // n/2 forward twiddles

  explicit Radix2Plan(std::size_t size) : n(size), bitrev(size), twiddle(size / 2) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev[i] = r;
    }
    for (std::size_t k = 0; k < n / 2; ++k) twiddle[k] = unit_root(k, n);
  }

  void run(std::span<Complex> a, bool inverse) const {
    for (std::size_t i = 0; i < n; ++i) {
      if (i < bitrev[i]) std::swap(a[i], a[bitrev[i]]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n / len;
      for (std::size_t start = 0; start < n; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          Complex w = twiddle[j * stride];
          if (inverse) w = std::conj(w);
          const Complex u = a[start + j];
          const Complex v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }
};

struct BluesteinPlan {
  std::size_t n;
  std::size_t m;
  std::vector<Complex> chirp;          // exp(-i pi k^2 / n)
  std::vector<Complex> kernel_fft;     // FFT of the conjugate chirp, length m
  std::shared_ptr<const Radix2Plan> inner;

  explicit BluesteinPlan(std::size_t size, std::shared_ptr<const Radix2Plan> radix)
      : n(size), m(radix->n), chirp(size), kernel_fft(radix->n), inner(std::move(radix)) {
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small and exact.
      const std::size_t k2 = (k * k) % (2 * n);
      const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
      chirp[k] = {std::cos(angle), std::sin(angle)};
    }
    kernel_fft[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
      kernel_fft[k] = std::conj(chirp[k]);
      kernel_fft[m - k] = std::conj(chirp[k]);
    }
    inner->run(kernel_fft, false);
  }

  void run(std::span<Complex> a, bool inverse) const {
    std::vector<Complex> work(m);
    for (std::size_t k = 0; k < n; ++k) {
      const Complex x = inverse ? std::conj(a[k]) : a[k];
      work[k] = x * chirp[k];
    }
    inner->run(work, false);
    for (std::size_t k = 0; k < m; ++k) work[k] *= kernel_fft[k];
    inner->run(work, true);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) {
      const Complex y = work[k] * scale * chirp[k];
      a[k] = inverse ? std::conj(y) : y;
    }
  }
};

struct PlanCache {
  std::unordered_map<std::size_t, std::shared_ptr<const Radix2Plan>> radix;
  std::unordered_map<std::size_t, std::shared_ptr<const BluesteinPlan>> bluestein;

  std::shared_ptr<const Radix2Plan> radix2(std::size_t n) {
    auto& slot = radix[n];
    if (!slot) slot = std::make_shared<const Radix2Plan>(n);
    return slot;
  }

  std::shared_ptr<const BluesteinPlan> chirp_z(std::size_t n) {
    auto& slot = bluestein[n];
    if (!slot) slot = std::make_shared<const BluesteinPlan>(n, radix2(next_pow2(2 * n - 1)));
    return slot;
  }
};

PlanCache& plans() {
  thread_local PlanCache cache;
  return cache;
}

}  // namespace

void transform(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (is_pow2(n)) {
    plans().radix2(n)->run(data, inverse);
  } else {
    plans().chirp_z(n)->run(data, inverse);
  }
}

void rfft_row(std::span<const double> x, std::span<double> out_interleaved) {
  const std::size_t n = x.size();
  const std::size_t bins = rfft_bins(n);
  if (out_interleaved.size() != 2 * bins) {
    throw DimensionError("rfft_row output holds " + std::to_string(out_interleaved.size()) +
                         " values, need " + std::to_string(2 * bins));
  }
  thread_local std::vector<Complex> work;
  work.assign(n, Complex{});
  for (std::size_t i = 0; i < n; ++i) work[i] = x[i];
  transform(work, false);
  for (std::size_t k = 0; k < bins; ++k) {
    out_interleaved[2 * k] = work[k].real();
    out_interleaved[2 * k + 1] = work[k].imag();
  }
  // Exact zeros where a real signal's spectrum is real.
  out_interleaved[1] = 0.0;
  if (n % 2 == 0) out_interleaved[2 * (bins - 1) + 1] = 0.0;
}

void irfft_row(std::span<const double> in_interleaved, std::span<double> out) {
  const std::size_t n = out.size();
  const std::size_t bins = rfft_bins(n);
  if (in_interleaved.size() != 2 * bins) {
    throw DimensionError("irfft_row: " + std::to_string(in_interleaved.size() / 2) +
                         " bins cannot produce length " + std::to_string(n));
  }
  thread_local std::vector<Complex> work;
  work.assign(n, Complex{});
  work[0] = {in_interleaved[0], 0.0};
  for (std::size_t k = 1; k < bins; ++k) {
    const Complex v{in_interleaved[2 * k], in_interleaved[2 * k + 1]};
    if (2 * k == n) {
      work[k] = {v.real(), 0.0};
    } else {
      work[k] = v;
      work[n - k] = std::conj(v);
    }
  }
  transform(work, true);
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = work[i].real() * scale;
}

ComplexSpectrum rfft(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("rfft expects (N) or (C, N), got " + shape_str(x.shape()));
  }
  const std::size_t n = x.shape().back();
  if (n < 2) throw DimensionError("rfft needs N >= 2");
  const std::size_t channels = x.rank() == 2 ? x.dim(0) : 1;
  const std::size_t bins = rfft_bins(n);
  ComplexSpectrum out(channels, bins);
  std::vector<double> row(2 * bins);
  for (std::size_t c = 0; c < channels; ++c) {
    rfft_row(x.data().subspan(c * n, n), row);
    for (std::size_t k = 0; k < bins; ++k) out.set(c, k, {row[2 * k], row[2 * k + 1]});
  }
  return out;
}

Tensor irfft(const ComplexSpectrum& spectrum, std::size_t out_len) {
  if (spectrum.n_freq != rfft_bins(out_len)) {
    throw DimensionError("irfft: " + std::to_string(spectrum.n_freq) +
                         " bins inconsistent with out_len " + std::to_string(out_len));
  }
  Tensor out({spectrum.channels, out_len});
  std::vector<double> row(2 * spectrum.n_freq);
  for (std::size_t c = 0; c < spectrum.channels; ++c) {
    for (std::size_t k = 0; k < spectrum.n_freq; ++k) {
      row[2 * k] = spectrum.re[c * spectrum.n_freq + k];
      row[2 * k + 1] = spectrum.im[c * spectrum.n_freq + k];
    }
    irfft_row(row, out.data().subspan(c * out_len, out_len));
  }
  return out;
}

}  // namespace tlnet::fft
