#pragma once

#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "liquid_s4/convolution.hpp"
#include "liquid_s4/kernel_gen.hpp"
#include "liquid_s4/liquid_kernel.hpp"

namespace liquid_s4 {

/// Real values addressed row-major as (batch, time, feature).
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t features = 0;
  std::vector<double> values;

  SequenceBatch() = default;
  SequenceBatch(std::size_t b, std::size_t l, std::size_t h)
      : batch(b), length(l), features(h), values(b * l * h, 0.0) {}

  double& at(std::size_t b, std::size_t t, std::size_t f) { return values[(b * length + t) * features + f]; }
  double at(std::size_t b, std::size_t t, std::size_t f) const { return values[(b * length + t) * features + f]; }

  std::vector<double> sequence(std::size_t b, std::size_t f) const {
    std::vector<double> out(length);
    for (std::size_t t = 0; t < length; ++t) out[t] = at(b, t, f);
    return out;
  }

  void set_sequence(std::size_t b, std::size_t f, std::span<const double> seq) {
    for (std::size_t t = 0; t < length; ++t) at(b, t, f) = seq[t];
  }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Exact sequential evaluation of x_k = A x_{k-1} + B u_k, y_k = Re(c^H x_k), x_{-1} = 0.
inline std::vector<double> recurrent_s4(const DiscreteSystem& d, std::span<const double> u) {
  std::vector<double> y(u.size());
  ComplexVec x = ComplexVec::Zero(d.state_size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    x = d.apply_a(x) + d.b_bar * u[k];
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e150) {
      std::ostringstream os;
      os << "recurrence diverged at step " << k;
      throw Error(ErrorKind::Diverged, os.str());
    }
    y[k] = d.c_bar.dot(x).real();
  }
  return y;
}

/// Main and liquid kernels for one SISO feature, reusable across sequences.
struct LiquidS4Kernels {
  Kernel main;
  LiquidKernelSet liquid;
};

inline LiquidS4Kernels prepare_liquid_s4(const DplrSystem& sys, double dt, std::size_t length, LiquidMode mode,
                                         int max_order, std::size_t l_tilde) {
  if (mode != LiquidMode::None && (max_order < 2 || max_order > kMaxLiquidOrder))
    throw Error(ErrorKind::InvalidOrder, "liquid modes need 2 <= P <= 10");
  LiquidS4Kernels k;
  k.main = kernel_genfn(sys, dt, std::max<std::size_t>(length, 1));
  if (mode != LiquidMode::None) {
    const std::size_t window = std::min(l_tilde, std::max<std::size_t>(length, 1));
    k.liquid = build_liquid_kernels(discretize_bilinear(sys, dt), mode, max_order, window);
  }
  return k;
}

inline std::vector<double> apply_liquid_s4(const LiquidS4Kernels& k, std::span<const double> u) {
  std::vector<double> y = causal_conv(k.main.taps, u);
  if (k.liquid.mode != LiquidMode::None) {
    const std::vector<double> liquid = apply_liquid(k.liquid, u);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += liquid[i];
  }
  return y;
}

/// y = K * u + sum_p K_liquid_p * v_p(u).
inline std::vector<double> forward_liquid_s4(const DplrSystem& sys, double dt, std::span<const double> u,
                                             LiquidMode mode, int max_order, std::size_t l_tilde) {
  if (u.empty()) return {};
  return apply_liquid_s4(prepare_liquid_s4(sys, dt, u.size(), mode, max_order, l_tilde), u);
}

}  // namespace liquid_s4
