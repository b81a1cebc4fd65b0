#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "liquid_s4/fft.hpp"
#include "liquid_s4/ssm_core.hpp"

namespace liquid_s4 {

struct Kernel {
  std::vector<double> taps;
  double residual_imag = 0.0;  // largest |imag| dropped when taking real parts

  std::size_t size() const { return taps.size(); }
};

namespace detail {

// Plain complex product; std::complex's operator* takes a slow NaN-recovery
// path unless the consumer builds with -fcx-limited-range.
template <class T>
std::complex<T> mul(std::complex<T> a, std::complex<T> b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace detail

/// Roots of unity omega_k = exp(2 pi i k / L).
struct FrequencyGrid {
  std::vector<Complex> nodes;

  explicit FrequencyGrid(std::size_t l) : nodes(l) {
    for (std::size_t k = 0; k < l; ++k) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(l);
      nodes[k] = {std::cos(angle), std::sin(angle)};
    }
    // exact values where they are representable
    nodes[0] = 1.0;
    if (l % 2 == 0) nodes[l / 2] = -1.0;
    if (l % 4 == 0) {
      nodes[l / 4] = Complex(0.0, 1.0);
      nodes[3 * l / 4] = Complex(0.0, -1.0);
    }
  }
};

/// taps[i] = Re(c^H A^i b), by repeated (structured when available) matvecs.
inline Kernel kernel_naive(const DiscreteSystem& d, std::size_t l) {
  Kernel k;
  k.taps.resize(l);
  ComplexVec x = d.b_bar;
  for (std::size_t i = 0; i < l; ++i) {
    const Complex tap = d.c_bar.dot(x);
    k.taps[i] = tap.real();
    k.residual_imag = std::max(k.residual_imag, std::abs(tap.imag()));
    if (i + 1 < l) x = d.apply_a(x);
  }
  return k;
}

inline ComplexMatrix matrix_power(const ComplexMatrix& m, std::size_t exponent) {
  ComplexMatrix result = ComplexMatrix::Identity(m.rows(), m.cols());
  ComplexMatrix base = m;
  while (exponent > 0) {
    if (exponent & 1U) result = result * base;
    exponent >>= 1U;
    if (exponent > 0) base = base * base;
  }
  return result;
}

/// C_tilde = (I - A_bar^L)^H c_bar, with A_bar^L by repeated squaring.
inline ComplexVec truncate_generating_c(const DiscreteSystem& d, std::size_t l) {
  const auto n = d.state_size();
  const ComplexMatrix power = matrix_power(d.a_bar, l);
  return (ComplexMatrix::Identity(n, n) - power).adjoint() * d.c_bar;
}

/// Same quantity in O(N l) without dense matrices. A^H = diag(conj lambda) - p p^H
/// is DPLR too and A_bar^H is its bilinear transform, applied here with the
/// rank-1 Sherman-Morrison solve. Written as the telescoped sum
///   sum_{j<l} (A_bar^H)^j (I - A_bar)^H c,   I - A_bar = -dt (I - dt/2 A)^{-1} A,
/// so nothing cancels when A_bar^l is close to I. The chain runs in long double;
/// its rounding otherwise reaches the taps at ~1e-12 for l = 1024.
inline ComplexVec truncate_generating_c(const DplrSystem& sys, double dt, std::size_t l) {
  using Wide = std::complex<long double>;
  const auto n = static_cast<std::size_t>(sys.state_size());
  const long double half = 0.5L * dt;
  std::vector<Wide> lam(n), p(n), inv_diag(n), d_inv_p(n), x(n), acc(n), y(n);
  Wide p_dinv_p = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    lam[i] = std::conj(Wide(sys.lambda[ii]));
    p[i] = Wide(sys.p_vec[ii]);
    inv_diag[i] = 1.0L / (1.0L - half * lam[i]);
    d_inv_p[i] = p[i] * inv_diag[i];
    p_dinv_p += std::conj(p[i]) * d_inv_p[i];
  }
  const Wide denom = 1.0L + half * p_dinv_p;
  if (std::abs(denom) < 1e-14L) throw Error(ErrorKind::Discretization, "rank-1 correction of I - dt/2*A is singular");

  // y <- (I - dt/2 A^H)^{-1} y
  auto solve = [&](std::vector<Wide>& v) {
    Wide pv = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = detail::mul(v[i], inv_diag[i]);
      pv += detail::mul(std::conj(p[i]), v[i]);
    }
    const Wide coeff = half * pv / denom;
    for (std::size_t i = 0; i < n; ++i) v[i] -= detail::mul(coeff, d_inv_p[i]);
  };
  // out <- [v +] scale * A^H v
  auto apply_a = [&](const std::vector<Wide>& v, std::vector<Wide>& out, long double scale, bool add_v) {
    Wide pv = 0.0L;
    for (std::size_t i = 0; i < n; ++i) pv += detail::mul(std::conj(p[i]), v[i]);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = (add_v ? v[i] : Wide(0.0L)) + scale * (detail::mul(lam[i], v[i]) - detail::mul(p[i], pv));
  };

  for (std::size_t i = 0; i < n; ++i) y[i] = Wide(sys.c_vec[static_cast<Eigen::Index>(i)]);
  solve(y);
  apply_a(y, x, -static_cast<long double>(dt), false);
  acc = x;
  for (std::size_t j = 1; j < l; ++j) {
    apply_a(x, y, half, true);
    solve(y);
    x.swap(y);
    for (std::size_t i = 0; i < n; ++i) acc[i] += x[i];
  }
  ComplexVec out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    out[static_cast<Eigen::Index>(i)] = Complex(static_cast<double>(acc[i].real()), static_cast<double>(acc[i].imag()));
  return out;
}

namespace detail {


template <class C = Complex>
C pairwise_sum(std::span<const C> terms) {
  if (terms.size() <= 8) {
    C acc = 0.0;
    for (const auto& t : terms) acc += t;
    return acc;
  }
  const std::size_t mid = terms.size() / 2;
  return pairwise_sum<C>(terms.first(mid)) + pairwise_sum<C>(terms.subspan(mid));
}

inline void check_pole(Complex z, const ComplexVec& lambda) {
  for (Eigen::Index n = 0; n < lambda.size(); ++n) {
    if (std::norm(z - lambda[n]) < 1e-28)
      throw Error(ErrorKind::Pole, "evaluation node coincides with an eigenvalue");
  }
}

}  // namespace detail

/// sum_n conj(v_n) w_n / (z - lambda_n), pairwise-summed.
inline Complex cauchy_dot(const ComplexVec& v, const ComplexVec& w, Complex z, const ComplexVec& lambda) {
  if (v.size() != w.size() || v.size() != lambda.size())
    throw Error(ErrorKind::InvalidDimension, "cauchy_dot vectors disagree in length");
  detail::check_pole(z, lambda);
  std::vector<Complex> terms(static_cast<std::size_t>(v.size()));
  for (Eigen::Index n = 0; n < v.size(); ++n)
    terms[static_cast<std::size_t>(n)] = std::conj(v[n]) * w[n] / (z - lambda[n]);
  return detail::pairwise_sum<Complex>(terms);
}

namespace detail {

/// Generating function at every root of unity of a power-of-two length.
/// Node sums and the Woodbury combination run in long double: at low
/// frequencies k00 and k01 k10 / (1 + k11) nearly cancel, and with small dt the
/// node values are ~L times the taps, so double rounding there shows up in the
/// taps at the 1e-12 level.
inline std::vector<Complex> generating_function(const DplrSystem& sys, double dt, std::size_t l,
                                                const ComplexVec& c_tilde) {
  using Wide = std::complex<long double>;
  const auto n = static_cast<std::size_t>(sys.state_size());
  std::vector<Complex> values(l);
  std::vector<Wide> t00(n), t01(n), t10(n), t11(n);
  std::vector<Wide> lam(n), cc(n), pp(n), bb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    lam[i] = Wide(sys.lambda[ii]);
    cc[i] = std::conj(Wide(c_tilde[ii]));
    pp[i] = Wide(sys.p_vec[ii]);
    bb[i] = Wide(sys.b_vec[ii]);
  }
  const long double pi = std::numbers::pi_v<long double>;

  for (std::size_t k = 0; k < l; ++k) {
    if (2 * k == l) {
      // At omega = -1, 2/(1+omega) (z - A)^{-1} -> (dt/2) I exactly, for any A.
      values[k] = 0.5 * dt * c_tilde.dot(sys.b_vec);
      continue;
    }
    // With omega = exp(i theta) and t = tan(theta/2):  (1-omega)/(1+omega) = -i t
    // and 2/(1+omega) = 1 - i t. Forming them from t avoids the 1 - cos(theta)
    // cancellation near omega = 1.
    const long double t = std::tan(pi * static_cast<long double>(k) / static_cast<long double>(l));
    const Wide z(0.0L, -(2.0L / dt) * t);
    for (std::size_t i = 0; i < n; ++i) {
      const Wide gap = z - lam[i];
      const long double mag2 = std::norm(gap);
      if (mag2 < 1e-28L) throw Error(ErrorKind::Pole, "evaluation node coincides with an eigenvalue");
      const long double inv = 1.0L / mag2;
      const Wide r(gap.real() * inv, -gap.imag() * inv);
      const Wide ct = detail::mul(cc[i], r);
      const Wide pc = detail::mul(std::conj(pp[i]), r);
      t00[i] = detail::mul(ct, bb[i]);
      t01[i] = detail::mul(ct, pp[i]);
      t10[i] = detail::mul(pc, bb[i]);
      t11[i] = detail::mul(pc, pp[i]);
    }
    const Wide k00 = pairwise_sum<Wide>(t00), k01 = pairwise_sum<Wide>(t01);
    const Wide k10 = pairwise_sum<Wide>(t10), k11 = pairwise_sum<Wide>(t11);
    const Wide denom = 1.0L + k11;
    if (std::abs(denom) < 1e-14L) throw Error(ErrorKind::WoodburySingular, "1 + k11 vanished");
    const Wide v = detail::mul(Wide(1.0L, -t), k00 - detail::mul(k01, k10) / denom);
    values[k] = Complex(static_cast<double>(v.real()), static_cast<double>(v.imag()));
  }
  return values;
}

}  // namespace detail

/// Kernel through the truncated generating function: Cauchy sums at the roots
/// of unity, rank-1 Woodbury correction, inverse transform. Non-power-of-two
/// lengths are generated at the next power of two and truncated.
inline Kernel kernel_genfn(const DplrSystem& sys, double dt, std::size_t l) {
  sys.validate();
  if (l < 1) throw Error(ErrorKind::InvalidDimension, "kernel length must be >= 1");
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidRange, "dt must be positive");
  const std::size_t m = next_power_of_two(l);

  const ComplexVec c_tilde = truncate_generating_c(sys, dt, m);
  std::vector<Complex> values = detail::generating_function(sys, dt, m, c_tilde);

  // values_k = sum_i K_i omega_k^i with omega_k = exp(+2 pi i k/m), so
  // K_i = (1/m) sum_k values_k exp(-2 pi i ik/m): a forward transform scaled by 1/m.
  fft_inplace(values, false);
  Kernel out;
  out.taps.resize(l);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < l; ++i) {
    const Complex tap = values[i] * scale;
    out.taps[i] = tap.real();
    out.residual_imag = std::max(out.residual_imag, std::abs(tap.imag()));
  }
  return out;
}

/// max |a - b| / max |b|
inline double relative_linf(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  if (a.size() != b.size()) return INFINITY;
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace liquid_s4
