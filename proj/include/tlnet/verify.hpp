#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlnet/tensor.hpp"

// Numeric instantiations of the convolution, receptive-field, spectral and
// attention identities, each against an independent construction.
namespace tlnet::verify {

struct VerificationResult {
  std::string name;
  double max_abs_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string instance;
  // Informational results are reported but never fail a run.
  bool gated = true;
};

inline constexpr double kLinearTolerance = 1e-10;

// F[x (*) h] = F[x] . F[h] with the circular convolution taken from its
// defining sum, plus the library's circular conv1d against the same sum.
VerificationResult circular_conv_theorem(std::size_t n, std::size_t trials, std::uint64_t seed,
                                         double tol = kLinearTolerance);

// Same-padded conv as an explicit (C_out*N, C_in*N) block matrix of banded
// kernel blocks; also bounds each row's structural nonzeros by K * C_in.
VerificationResult conv_matrix_equiv(std::size_t n, std::size_t c_in, std::size_t c_out, std::size_t k,
                                     std::uint64_t seed, double tol = kLinearTolerance);

// C[a][b] = h[(a - b) mod N]. C*C must have h0^2, 2h0h1, 2h0h2 + h1^2, 2h1h2,
// h2^2 on lags 0..4, five nonzeros per row, and match two passes of conv1d.
VerificationResult two_layer_receptive_field(const std::array<double, 3>& h, std::size_t n,
                                             double tol = kLinearTolerance);
// The commonly quoted coefficient at (0, N-2), h0h2 + h1^2, which omits the
// factor 2 on h0h2. Informational.
VerificationResult two_layer_receptive_field_literal(const std::array<double, 3>& h, std::size_t n,
                                                     double tol = kLinearTolerance);

// H_k = h0 + h1 w^k + h2 w^2k against rfft of the zero-padded kernel, and the
// inverse of H supported on three taps only.
VerificationResult kernel_frequency(const std::array<double, 3>& h, std::size_t n,
                                    double tol = kLinearTolerance);

struct AttentionForms {
  Tensor standard;   // concat_i softmax(Q_i K_i^T / sqrt(d_k)) V_i, then W_O
  Tensor blockwise;  // head-stacked Q K^T, block mask, per-block softmax
  Tensor literal;    // full-row softmax, then the mask
  double max_row_sum_error = 0.0;  // blockwise softmax rows vs 1
};

AttentionForms attention_forms(std::size_t n_tokens, std::size_t d_model, std::size_t heads,
                               std::uint64_t seed);
VerificationResult attention_as_matrix(std::size_t n_tokens, std::size_t d_model, std::size_t heads,
                                       std::uint64_t seed, double tol = kLinearTolerance);
VerificationResult attention_literal(std::size_t n_tokens, std::size_t d_model, std::size_t heads,
                                     std::uint64_t seed, double tol = kLinearTolerance);

// Every check over `seeds` seeds; `tolerance` overrides the gated tolerances.
std::vector<VerificationResult> run_all(std::size_t seeds = 5, std::optional<double> tolerance = {});
bool all_pass(const std::vector<VerificationResult>& results);
std::string format_table(const std::vector<VerificationResult>& results);

}  // namespace tlnet::verify
