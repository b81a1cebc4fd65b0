#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "liquid_s4/error.hpp"

namespace liquid_s4 {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

/// In-place iterative radix-2 transform.
/// Forward: X_k = sum_j x_j exp(-2 pi i jk/n). Inverse applies the conjugate
/// twiddles and divides by n.
inline void fft_inplace(std::span<std::complex<double>> data, bool inverse = false) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) throw Error(ErrorKind::InvalidDimension, "fft length must be a power of two");
  if (n == 1) return;

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  // one full-resolution twiddle table; sub-stages stride through it
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(angle), std::sin(angle)};
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto t = twiddle[k * stride] * data[start + k + half];
        const auto u = data[start + k];
        data[start + k] = u + t;
        data[start + k + half] = u - t;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= scale;
  }
}

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> data) {
  fft_inplace(data, false);
  return data;
}

inline std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> data) {
  fft_inplace(data, true);
  return data;
}

}  // namespace liquid_s4
