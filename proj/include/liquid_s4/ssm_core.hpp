#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "liquid_s4/error.hpp"

namespace liquid_s4 {

using Complex = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVec = Eigen::VectorXcd;

inline constexpr double kDefaultDtMax = 0.2;

/// Continuous-time SSM in diagonal-plus-low-rank form, A = diag(lambda) - p p^H.
/// Outputs read y = Re(c^H x).
struct DplrSystem {
  ComplexVec lambda;
  ComplexVec p_vec;
  ComplexVec b_vec;
  ComplexVec c_vec;

  Eigen::Index state_size() const { return lambda.size(); }

  void validate() const {
    const auto n = lambda.size();
    if (n < 1 || p_vec.size() != n || b_vec.size() != n || c_vec.size() != n) {
      std::ostringstream os;
      os << "dplr vectors must share a length >= 1 (lambda " << lambda.size() << ", p "
         << p_vec.size() << ", b " << b_vec.size() << ", c " << c_vec.size() << ")";
      throw Error(ErrorKind::InvalidDimension, os.str());
    }
  }

  ComplexMatrix dense_a() const {
    ComplexMatrix a = -p_vec * p_vec.adjoint();
    a.diagonal() += lambda;
    return a;
  }
};

/// (I - dt/2 A) and (I + dt/2 A) for A = diag(lambda) - p p^H, applied in O(N)
/// using a rank-1 Sherman-Morrison correction of the diagonal solve.
class BilinearOperator {
 public:
  BilinearOperator(ComplexVec lambda, ComplexVec p_vec, double dt)
      : lambda_(std::move(lambda)), p_(std::move(p_vec)), dt_(dt) {
    if (!(dt_ > 0.0)) throw Error(ErrorKind::InvalidRange, "dt must be positive");
    const double half = 0.5 * dt_;
    diag_ = (ComplexVec::Ones(lambda_.size()) - half * lambda_);
    for (Eigen::Index i = 0; i < diag_.size(); ++i) {
      if (std::abs(diag_[i]) < 1e-14)
        throw Error(ErrorKind::Discretization, "I - dt/2*Lambda is singular");
    }
    inv_diag_ = diag_.cwiseInverse();
    d_inv_p_ = p_.cwiseQuotient(diag_);
    denom_ = Complex(1.0) + half * p_.dot(d_inv_p_);  // dot() conjugates p
    if (std::abs(denom_) < 1e-14)
      throw Error(ErrorKind::Discretization, "rank-1 correction of I - dt/2*A is singular");
  }

  double dt() const { return dt_; }
  const ComplexVec& lambda() const { return lambda_; }
  const ComplexVec& p_vec() const { return p_; }

  /// (I - dt/2 A)^{-1} y
  ComplexVec solve(const ComplexVec& y) const {
    ComplexVec d_inv_y = y.cwiseQuotient(diag_);
    const Complex coeff = 0.5 * dt_ * p_.dot(d_inv_y) / denom_;
    return d_inv_y - coeff * d_inv_p_;
  }

  /// (I + dt/2 A) x
  ComplexVec forward(const ComplexVec& x) const {
    return x + 0.5 * dt_ * (lambda_.cwiseProduct(x) - p_ * p_.dot(x));
  }

  ComplexVec apply_a_bar(const ComplexVec& x) const { return solve(forward(x)); }

  /// apply_a_bar without temporaries, for long power chains.
  void apply_a_bar_inplace(ComplexVec& x) const {
    const double half = 0.5 * dt_;
    const Complex px = p_.dot(x);
    Complex py = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x[i] = (x[i] + half * (lambda_[i] * x[i] - p_[i] * px)) * inv_diag_[i];
      py += std::conj(p_[i]) * x[i];
    }
    const Complex coeff = half * py / denom_;
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] -= coeff * d_inv_p_[i];
  }

 private:
  ComplexVec lambda_;
  ComplexVec p_;
  double dt_;
  ComplexVec diag_;
  ComplexVec inv_diag_;
  ComplexVec d_inv_p_;
  Complex denom_;
};

/// Discrete-time system x_k = A_bar x_{k-1} + B_bar u_k, y_k = Re(c_bar^H x_k).
/// The dense operator is always materialized; systems produced by
/// discretize_bilinear additionally carry the O(N) structured form.
struct DiscreteSystem {
  ComplexMatrix a_bar;
  ComplexVec b_bar;
  ComplexVec c_bar;
  double dt = 1.0;
  std::optional<BilinearOperator> structured;

  Eigen::Index state_size() const { return b_bar.size(); }

  ComplexVec apply_a(const ComplexVec& x) const {
    if (structured) return structured->apply_a_bar(x);
    return a_bar * x;
  }

  static DiscreteSystem from_dense(ComplexMatrix a, ComplexVec b, ComplexVec c, double dt = 1.0) {
    if (a.rows() != a.cols() || a.rows() != b.size() || b.size() != c.size() || b.size() < 1)
      throw Error(ErrorKind::InvalidDimension, "discrete system shapes disagree");
    return DiscreteSystem{std::move(a), std::move(b), std::move(c), dt, std::nullopt};
  }

  static DiscreteSystem scalar(double a, double b, double c) {
    return from_dense(ComplexMatrix::Constant(1, 1, a), ComplexVec::Constant(1, b),
                      ComplexVec::Constant(1, c));
  }
};

struct StepSizeSchedule {
  double dt_min = 0.0;
  double dt_max = kDefaultDtMax;
  std::vector<double> per_feature_dt;
};

inline RealMatrix hippo_legs(Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidDimension, "hippo_legs needs n >= 1");
  RealMatrix a = RealMatrix::Zero(n, n);
  for (Eigen::Index row = 0; row < n; ++row) {
    for (Eigen::Index col = 0; col < row; ++col)
      a(row, col) = -std::sqrt(2.0 * row + 1.0) * std::sqrt(2.0 * col + 1.0);
    a(row, row) = -(static_cast<double>(row) + 1.0);
  }
  return a;
}

/// B_k = sqrt(2k+1), P_k = sqrt(k+1/2).
inline std::pair<ComplexVec, ComplexVec> legs_init_vectors(Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidDimension, "legs_init_vectors needs n >= 1");
  ComplexVec b(n), p(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    b[k] = Complex(std::sqrt(2.0 * k + 1.0), 0.0);
    p[k] = Complex(std::sqrt(k + 0.5), 0.0);
  }
  return {b, p};
}

struct NplrDecomposition {
  DplrSystem system;           // expressed in the eigenbasis of the normal part
  ComplexMatrix basis;         // unitary V with hippo = V (Lambda - P P^H) V^H
  double normal_residual = 0;  // ||S + S^T + I||_F
  double reconstruction_residual = 0;
};

inline double reconstruction_residual(const ComplexMatrix& basis, const DplrSystem& sys,
                                      const RealMatrix& target) {
  const ComplexMatrix rebuilt = basis * sys.dense_a() * basis.adjoint();
  return (rebuilt - target.cast<Complex>()).norm();
}

/// Rotates a real output vector of the original HiPPO basis into the eigenbasis.
inline ComplexVec rotate_output(const ComplexMatrix& basis, const Eigen::VectorXd& c_real) {
  return basis.adjoint() * c_real.cast<Complex>();
}

/// Output vector drawn i.i.d. standard normal in the original (real) basis,
/// so every kernel of the rotated system stays real.
inline ComplexVec random_output_vector(const ComplexMatrix& basis, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd c(basis.rows());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = normal(rng);
  return rotate_output(basis, c);
}

/// Splits hippo_legs(n) into (-1/2 I + skew) - P P^T, diagonalizes the normal
/// part and returns Lambda, P, B (and a seeded C) in its eigenbasis.
inline NplrDecomposition nplr_decompose(Eigen::Index n, std::uint64_t c_seed = 0) {
  const RealMatrix hippo = hippo_legs(n);
  auto [b, p] = legs_init_vectors(n);
  const Eigen::VectorXd p_real = p.real();
  const RealMatrix s = hippo + p_real * p_real.transpose();

  NplrDecomposition out;
  out.normal_residual = (s + s.transpose() + RealMatrix::Identity(n, n)).norm();
  if (out.normal_residual > 1e-8) {
    std::ostringstream os;
    os << "hippo + P P^T is not -1/2 I + skew (residual " << out.normal_residual << ")";
    throw Error(ErrorKind::Decomposition, os.str());
  }

  // skew = S + I/2; -i*skew is Hermitian, so its eigenvectors form a unitary basis
  // and the eigenvalues of S are -1/2 + i*mu with mu ascending.
  const RealMatrix skew = 0.5 * (s - s.transpose());
  const ComplexMatrix herm = Complex(0.0, -1.0) * skew.cast<Complex>();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(herm);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::Decomposition, "hermitian eigensolver did not converge");

  out.basis = solver.eigenvectors();
  DplrSystem& sys = out.system;
  sys.lambda = ComplexVec(n);
  for (Eigen::Index k = 0; k < n; ++k) sys.lambda[k] = Complex(-0.5, solver.eigenvalues()[k]);
  sys.p_vec = out.basis.adjoint() * p;
  sys.b_vec = out.basis.adjoint() * b;
  sys.c_vec = random_output_vector(out.basis, c_seed);

  out.reconstruction_residual = reconstruction_residual(out.basis, sys, hippo);
  if (!(out.reconstruction_residual < 1e-6)) {
    std::ostringstream os;
    os << "eigenbasis does not reconstruct hippo (residual " << out.reconstruction_residual << ")";
    throw Error(ErrorKind::Decomposition, os.str());
  }
  return out;
}

/// Dense bilinear (trapezoidal) discretization with the structured operator attached.
inline DiscreteSystem discretize_bilinear(const DplrSystem& sys, double dt) {
  sys.validate();
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidRange, "dt must be positive");
  const auto n = sys.state_size();
  const ComplexMatrix a = sys.dense_a();
  const ComplexMatrix eye = ComplexMatrix::Identity(n, n);
  const ComplexMatrix lhs = eye - 0.5 * dt * a;
  Eigen::PartialPivLU<ComplexMatrix> lu(lhs);
  if (!(lu.rcond() > 1e-14)) throw Error(ErrorKind::Discretization, "I - dt/2*A is singular");

  DiscreteSystem out;
  out.a_bar = lu.solve(eye + 0.5 * dt * a);
  out.b_bar = lu.solve(dt * sys.b_vec);
  out.c_bar = sys.c_vec;
  out.dt = dt;
  out.structured.emplace(sys.lambda, sys.p_vec, dt);
  return out;
}

/// B_bar through the rank-1 Woodbury solve only, no dense matrices.
inline ComplexVec discretize_b_structured(const DplrSystem& sys, double dt) {
  sys.validate();
  const BilinearOperator op(sys.lambda, sys.p_vec, dt);
  return op.solve(dt * sys.b_vec);
}

inline double default_dt_min(std::size_t seq_length) {
  if (seq_length == 0) throw Error(ErrorKind::InvalidRange, "sequence length must be positive");
  return 1.0 / static_cast<double>(seq_length);
}

/// Per-feature step sizes, log-uniform on [dt_min, dt_max].
inline StepSizeSchedule init_dt_schedule(std::size_t features, double dt_min, double dt_max,
                                         std::uint64_t seed) {
  if (!(dt_min > 0.0) || !(dt_max >= dt_min) || !std::isfinite(dt_max))
    throw Error(ErrorKind::InvalidRange, "need 0 < dt_min <= dt_max");
  if (features < 1) throw Error(ErrorKind::InvalidDimension, "need at least one feature");
  StepSizeSchedule sched{dt_min, dt_max, {}};
  sched.per_feature_dt.reserve(features);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = std::log(dt_min), hi = std::log(dt_max);
  for (std::size_t h = 0; h < features; ++h) {
    const double dt = std::exp(lo + (hi - lo) * unit(rng));
    sched.per_feature_dt.push_back(std::clamp(dt, dt_min, dt_max));
  }
  return sched;
}

/// Random stable DPLR system whose spectrum and vectors come in conjugate pairs,
/// so all of its kernels are real. Odd n adds one real mode.
template <class Rng>
DplrSystem random_stable_system(Eigen::Index n, Rng& rng) {
  if (n < 1) throw Error(ErrorKind::InvalidDimension, "random_stable_system needs n >= 1");
  std::uniform_real_distribution<double> log_decay(std::log(0.05), std::log(2.0));
  std::uniform_real_distribution<double> freq(0.0, 8.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto cnormal = [&] { return Complex(normal(rng), normal(rng)) / std::sqrt(2.0); };

  DplrSystem sys{ComplexVec(n), ComplexVec(n), ComplexVec(n), ComplexVec(n)};
  Eigen::Index k = 0;
  for (; k + 1 < n; k += 2) {
    sys.lambda[k] = Complex(-std::exp(log_decay(rng)), freq(rng));
    sys.p_vec[k] = 0.5 * cnormal();
    sys.b_vec[k] = cnormal();
    sys.c_vec[k] = cnormal();
    sys.lambda[k + 1] = std::conj(sys.lambda[k]);
    sys.p_vec[k + 1] = std::conj(sys.p_vec[k]);
    sys.b_vec[k + 1] = std::conj(sys.b_vec[k]);
    sys.c_vec[k + 1] = std::conj(sys.c_vec[k]);
  }
  if (k < n) {
    sys.lambda[k] = Complex(-std::exp(log_decay(rng)), 0.0);
    sys.p_vec[k] = 0.5 * normal(rng);
    sys.b_vec[k] = normal(rng);
    sys.c_vec[k] = normal(rng);
  }
  return sys;
}

/// LegS-initialized system with a seeded output vector.
inline DplrSystem legs_system(Eigen::Index n, std::uint64_t c_seed) {
  return nplr_decompose(n, c_seed).system;
}

}  // namespace liquid_s4
