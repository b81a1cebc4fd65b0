#pragma once

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include "liquid_s4/fft.hpp"

namespace liquid_s4 {

/// y_k = sum_{d=0}^{min(k, K-1)} taps[d] * u_{k-d}, evaluated term by term.
inline std::vector<double> causal_conv_direct(std::span<const double> taps, std::span<const double> u) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const std::size_t last = std::min(k + 1, taps.size());
    double acc = 0.0;
    for (std::size_t d = 0; d < last; ++d) acc += taps[d] * u[k - d];
    y[k] = acc;
  }
  return y;
}

/// Linear (non-circular) causal convolution through zero-padded radix-2 FFTs,
/// truncated to the input length.
inline std::vector<double> causal_conv_fft(std::span<const double> taps, std::span<const double> u) {
  const std::size_t len = u.size();
  if (len == 0 || taps.empty()) return std::vector<double>(len, 0.0);
  const std::size_t klen = std::min(taps.size(), len);  // taps beyond L never reach an output
  const std::size_t padded = next_power_of_two(len + klen - 1);

  // pack kernel in the real part and signal in the imaginary part of one transform
  std::vector<std::complex<double>> packed(padded);
  for (std::size_t i = 0; i < klen; ++i) packed[i].real(taps[i]);
  for (std::size_t i = 0; i < len; ++i) packed[i].imag(u[i]);
  fft_inplace(packed, false);

  // split: K_j = (Z_j + conj Z_{-j})/2, U_j = (Z_j - conj Z_{-j})/(2i)
  std::vector<std::complex<double>> prod(padded);
  for (std::size_t j = 0; j < padded; ++j) {
    const auto zj = packed[j];
    const auto zn = std::conj(packed[(padded - j) % padded]);
    const auto kj = 0.5 * (zj + zn);
    const auto uj = std::complex<double>(0.0, -0.5) * (zj - zn);
    prod[j] = kj * uj;
  }
  fft_inplace(prod, true);

  std::vector<double> y(len);
  for (std::size_t i = 0; i < len; ++i) y[i] = prod[i].real();
  return y;
}

/// Dispatches to the direct sum for short problems, FFT otherwise. Both
/// compute the same linear convolution.
inline std::vector<double> causal_conv(std::span<const double> taps, std::span<const double> u) {
  const std::size_t work = std::min(taps.size(), u.size()) * u.size();
  if (work <= 4096) return causal_conv_direct(taps, u);
  return causal_conv_fft(taps, u);
}

}  // namespace liquid_s4
