#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "liquid_s4/convolution.hpp"
#include "liquid_s4/ssm_core.hpp"

namespace liquid_s4 {

enum class LiquidMode { None, KB, PB };

inline std::string to_string(LiquidMode mode) {
  switch (mode) {
    case LiquidMode::None: return "none";
    case LiquidMode::KB: return "kb";
    case LiquidMode::PB: return "pb";
  }
  return "none";
}

inline LiquidMode parse_liquid_mode(const std::string& text) {
  std::string lower = text;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "none") return LiquidMode::None;
  if (lower == "kb") return LiquidMode::KB;
  if (lower == "pb") return LiquidMode::PB;
  throw Error(ErrorKind::Config, "unknown liquid mode '" + text + "'");
}

inline constexpr int kMaxLiquidOrder = 10;

/// values[k] = u_k u_{k-1} ... u_{k-p+1} for k >= p-1, zero before.
struct CorrelationSignal {
  int order = 2;
  std::vector<double> values;
};

/// Window L_tilde = ceil(L/64), at least 8, never longer than L.
inline std::size_t default_liquid_window(std::size_t seq_length) {
  const std::size_t w = std::max<std::size_t>(8, (seq_length + 63) / 64);
  return std::min(w, seq_length);
}

inline CorrelationSignal correlation_signal(std::span<const double> u, int p) {
  if (p < 2) throw Error(ErrorKind::InvalidOrder, "correlation order must be >= 2");
  if (static_cast<std::size_t>(p) > u.size()) {
    std::ostringstream os;
    os << "correlation order " << p << " exceeds sequence length " << u.size();
    throw Error(ErrorKind::InvalidOrder, os.str());
  }
  CorrelationSignal sig{p, std::vector<double>(u.size(), 0.0)};
  for (std::size_t k = static_cast<std::size_t>(p) - 1; k < u.size(); ++k) {
    double prod = 1.0;
    for (int j = 0; j < p; ++j) prod *= u[k - static_cast<std::size_t>(j)];
    sig.values[k] = prod;
  }
  return sig;
}

inline ComplexVec elementwise_power(const ComplexVec& v, int p) {
  ComplexVec out = ComplexVec::Ones(v.size());
  for (int i = 0; i < p; ++i) out = out.cwiseProduct(v);
  return out;
}

struct LiquidTaps {
  std::vector<double> taps;
  double residual_imag = 0.0;
};

namespace detail {

inline void check_liquid_args(int p, std::size_t l_tilde) {
  if (p < 2 || p > kMaxLiquidOrder) {
    std::ostringstream os;
    os << "liquid order must lie in [2, " << kMaxLiquidOrder << "], got " << p;
    throw Error(ErrorKind::InvalidOrder, os.str());
  }
  if (l_tilde < 1) throw Error(ErrorKind::InvalidDimension, "liquid window must be >= 1");
}

}  // namespace detail

/// Lag-ordered KB taps: tap(d) = Re(c^H A^d b^{op}), d = 0..L_tilde-1.
inline LiquidTaps liquid_kernel_kb(const DiscreteSystem& d, int p, std::size_t l_tilde) {
  detail::check_liquid_args(p, l_tilde);
  LiquidTaps out{std::vector<double>(l_tilde), 0.0};
  ComplexVec x = elementwise_power(d.b_bar, p);
  for (std::size_t lag = 0; lag < l_tilde; ++lag) {
    const Complex tap = d.c_bar.dot(x);
    out.taps[lag] = tap.real();
    out.residual_imag = std::max(out.residual_imag, std::abs(tap.imag()));
    if (lag + 1 < l_tilde) x = d.apply_a(x);
  }
  return out;
}

/// The stored descending form (c A^{L_tilde-1} b^p, ..., c A b^p, c b^p):
/// the lag-ordered taps seen through the backward identity J.
inline LiquidTaps liquid_kernel_kb_descending(const DiscreteSystem& d, int p, std::size_t l_tilde) {
  detail::check_liquid_args(p, l_tilde);
  LiquidTaps out{std::vector<double>(l_tilde), 0.0};
  ComplexVec x = elementwise_power(d.b_bar, p);
  for (std::size_t power = 0; power < l_tilde; ++power) {
    const Complex tap = d.c_bar.dot(x);
    out.taps[l_tilde - 1 - power] = tap.real();
    out.residual_imag = std::max(out.residual_imag, std::abs(tap.imag()));
    if (power + 1 < l_tilde) x = d.apply_a(x);
  }
  return out;
}

inline std::vector<double> flip(std::vector<double> v) {
  std::reverse(v.begin(), v.end());
  return v;
}

inline LiquidTaps liquid_kernel_kb(const DplrSystem& sys, double dt, int p, std::size_t l_tilde) {
  return liquid_kernel_kb(discretize_bilinear(sys, dt), p, l_tilde);
}

/// PB taps: the contraction kappa_p = Re(sum_n conj(c_n) b_n^p) repeated L_tilde times.
inline LiquidTaps liquid_kernel_pb(const DiscreteSystem& d, int p, std::size_t l_tilde) {
  detail::check_liquid_args(p, l_tilde);
  const Complex kappa = d.c_bar.dot(elementwise_power(d.b_bar, p));
  return LiquidTaps{std::vector<double>(l_tilde, kappa.real()), std::abs(kappa.imag())};
}

inline LiquidTaps liquid_kernel_pb(const DplrSystem& sys, double dt, int p, std::size_t l_tilde) {
  return liquid_kernel_pb(discretize_bilinear(sys, dt), p, l_tilde);
}

struct LiquidKernelSet {
  LiquidMode mode = LiquidMode::None;
  int max_order = 1;
  std::size_t window = 0;
  std::vector<std::vector<double>> taps;  // taps[p - 2], one entry per order
  std::vector<double> residual_imag;

  int order_of(std::size_t index) const { return static_cast<int>(index) + 2; }
};

inline LiquidKernelSet build_liquid_kernels(const DiscreteSystem& d, LiquidMode mode, int max_order,
                                            std::size_t l_tilde) {
  LiquidKernelSet set{mode, max_order, l_tilde, {}, {}};
  if (mode == LiquidMode::None) return set;
  if (max_order < 2 || max_order > kMaxLiquidOrder)
    throw Error(ErrorKind::InvalidOrder, "liquid max order must lie in [2, 10]");
  for (int p = 2; p <= max_order; ++p) {
    LiquidTaps t = mode == LiquidMode::KB ? liquid_kernel_kb(d, p, l_tilde) : liquid_kernel_pb(d, p, l_tilde);
    set.taps.push_back(std::move(t.taps));
    set.residual_imag.push_back(t.residual_imag);
  }
  return set;
}

/// sum over orders of causal_conv(taps_p, correlation_signal(u, p)), length L.
inline std::vector<double> apply_liquid(const LiquidKernelSet& set, std::span<const double> u) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t i = 0; i < set.taps.size(); ++i) {
    const int p = set.order_of(i);
    if (static_cast<std::size_t>(p) > u.size()) break;  // no complete window of this order
    const CorrelationSignal sig = correlation_signal(u, p);
    const std::vector<double> part = causal_conv(set.taps[i], sig.values);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += part[k];
  }
  return y;
}

/// Brute-force evaluation of the kernel-path semantics with dense matrix
/// powers: every main term c A^d b u_{k-d} plus, for p = 2..max_order and
/// d < L_tilde, every consecutive-window term c M^d b^p u_{k-d} ... u_{k-d-p+1},
/// with M = A_bar (KB) or I (PB).
inline std::vector<double> liquid_oracle(const DiscreteSystem& d, std::span<const double> u, int max_order,
                                         std::size_t l_tilde, LiquidMode mode = LiquidMode::KB) {
  const std::size_t len = u.size();
  if (len > 64 || max_order > 5)
    throw Error(ErrorKind::OracleGuard, "liquid_oracle is limited to L <= 64 and P <= 5");
  const auto n = d.state_size();

  std::vector<ComplexMatrix> powers;
  powers.reserve(len);
  powers.push_back(ComplexMatrix::Identity(n, n));
  for (std::size_t i = 1; i < len; ++i) powers.push_back(powers.back() * d.a_bar);

  std::vector<double> y(len, 0.0);
  for (std::size_t k = 0; k < len; ++k) {
    double acc = 0.0;
    for (std::size_t lag = 0; lag <= k; ++lag)
      acc += d.c_bar.dot(powers[lag] * d.b_bar).real() * u[k - lag];
    if (mode != LiquidMode::None) {
      for (int p = 2; p <= max_order; ++p) {
        const ComplexVec bp = elementwise_power(d.b_bar, p);
        for (std::size_t lag = 0; lag < l_tilde; ++lag) {
          if (lag + static_cast<std::size_t>(p) > k + 1) break;  // window would start before u_0
          double prod = 1.0;
          for (int j = 0; j < p; ++j) prod *= u[k - lag - static_cast<std::size_t>(j)];
          const ComplexMatrix& m = mode == LiquidMode::KB ? powers[lag] : powers[0];
          acc += d.c_bar.dot(m * bp).real() * prod;
        }
      }
    }
    y[k] = acc;
  }
  return y;
}

/// Exact liquid dynamics x_k = A x_{k-1} + (b o x_{k-1}) u_k + b u_k, x_{-1} = 0.
inline std::vector<double> recurrent_liquid(const DiscreteSystem& d, std::span<const double> u) {
  std::vector<double> y(u.size());
  ComplexVec x = ComplexVec::Zero(d.state_size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    x = d.apply_a(x) + d.b_bar.cwiseProduct(x) * u[k] + d.b_bar * u[k];
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e150) {
      std::ostringstream os;
      os << "liquid recurrence diverged at step " << k;
      throw Error(ErrorKind::Diverged, os.str());
    }
    y[k] = d.c_bar.dot(x).real();
  }
  return y;
}

}  // namespace liquid_s4
