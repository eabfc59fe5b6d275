#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "tlnet/tensor.hpp"

namespace tlnet::fft {

using Complex = std::complex<double>;

// Half spectrum of real rows: shape (channels, n_freq), n_freq = N/2 + 1.
struct ComplexSpectrum {
  std::size_t channels = 0;
  std::size_t n_freq = 0;
  std::vector<double> re;
  std::vector<double> im;

  ComplexSpectrum() = default;
  ComplexSpectrum(std::size_t channels, std::size_t n_freq)
      : channels(channels), n_freq(n_freq), re(channels * n_freq), im(channels * n_freq) {}

  Complex at(std::size_t c, std::size_t k) const {
    return {re[c * n_freq + k], im[c * n_freq + k]};
  }
  void set(std::size_t c, std::size_t k, Complex v) {
    re[c * n_freq + k] = v.real();
    im[c * n_freq + k] = v.imag();
  }
};

constexpr std::size_t rfft_bins(std::size_t n) { return n / 2 + 1; }

// Unnormalized DFT in place, X(k) = sum_n x(n) e^{-2 pi i k n / N}. Radix-2
// for powers of two, Bluestein chirp-z otherwise. inverse=true uses the
// conjugate kernel, still without the 1/N factor.
void transform(std::span<Complex> data, bool inverse = false);

// Real DFT of one row; writes n/2+1 bins as interleaved (re, im) pairs.
void rfft_row(std::span<const double> x, std::span<double> out_interleaved);

// Real inverse of one half spectrum given as interleaved pairs. Imaginary
// parts of bin 0 and (for even n) bin n/2 are ignored, which makes the
// result the real part of the inverse DFT of the Hermitian extension.
void irfft_row(std::span<const double> in_interleaved, std::span<double> out);

// Per-row transforms of a (C, N) or (N) tensor.
ComplexSpectrum rfft(const Tensor& x);
Tensor irfft(const ComplexSpectrum& spectrum, std::size_t out_len);

}  // namespace tlnet::fft
