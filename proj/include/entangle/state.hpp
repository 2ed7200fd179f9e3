#pragma once

// Two-qubit states: validated density matrices, the fixed tilde-invariant
// Bell basis, spin flip, signed concurrence, relative entropy, the PPT test
// and seeded random generators.

#include <array>
#include <cmath>
#include <random>
#include <string>

#include "entangle/errors.hpp"
#include "entangle/linalg.hpp"

namespace entangle {

using Rng = std::mt19937_64;

inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPsdTol = 1e-10;

/// Pauli matrices; pauli(0) is the identity.
inline Mat2 pauli(int i) {
  const cplx I(0.0, 1.0);
  Mat2 m;
  switch (i) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, -I, I, 0; break;
    case 3: m << 1, 0, 0, -1; break;
    default: throw Error(ErrorCode::DimensionMismatch, "pauli index must be 0..3");
  }
  return m;
}

/// sigma_2 (x) sigma_2, the spin-flip kernel.
inline Mat4 spin_flip() { return kron(pauli(2), pauli(2)); }

inline Vec4 phi_plus() {
  const double r = 1.0 / std::sqrt(2.0);
  return Vec4(r, 0, 0, r);
}

/// Columns e_0 = i|phi+>, e_l = (I (x) sigma_l)|phi+>. Orthonormal and
/// invariant under the tilde operation.
inline Mat4 magic_basis() {
  Mat4 e;
  const Vec4 pp = phi_plus();
  e.col(0) = cplx(0.0, 1.0) * pp;
  for (int l = 1; l < 4; ++l) e.col(l) = kron(pauli(0), pauli(l)) * pp;
  return e;
}

/// |psi~> = (sigma_2 (x) sigma_2)|psi*>
inline Vec4 tilde_state(const Vec4& v) { return spin_flip() * v.conjugate(); }

/// rho~ = (sigma_2 (x) sigma_2) rho* (sigma_2 (x) sigma_2)
inline Mat4 tilde_op(const Mat4& m) {
  const Mat4 y = spin_flip();
  return y * m.conjugate() * y;
}

inline Mat2 partial_trace_b(const Mat4& m) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r(i, j) = m(2 * i, 2 * j) + m(2 * i + 1, 2 * j + 1);
  return r;
}

inline Mat2 partial_trace_a(const Mat4& m) {
  Mat2 r;
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) r(k, l) = m(k, l) + m(2 + k, 2 + l);
  return r;
}

/// Transpose on the second qubit: (2i+k, 2j+l) -> (2i+l, 2j+k).
inline Mat4 partial_transpose_b(const Mat4& m) {
  Mat4 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) r(2 * i + l, 2 * j + k) = m(2 * i + k, 2 * j + l);
  return r;
}

/// A 4x4 Hermitian, unit-trace, positive semidefinite matrix.
///
/// Validation rejects Hermiticity defects or trace errors above 1e-12 and
/// eigenvalues below -1e-10. Eigenvalues in [-1e-10, -1e-14) are clamped
/// and the trace renormalized; otherwise the matrix is stored bit-exactly.
class DensityMatrix {
 public:
  DensityMatrix() : mat_(Mat4::Identity() / 4.0) {}

  static DensityMatrix from_matrix(const Mat4& m) {
    if (!m.allFinite()) throw Error(ErrorCode::InvalidState, "non-finite entries");
    const double herm = hermiticity_defect(m);
    if (herm > kHermiticityTol)
      throw Error(ErrorCode::InvalidState, "not Hermitian (defect " + std::to_string(herm) + ")");
    const double tr = m.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
      throw Error(ErrorCode::InvalidState, "trace " + std::to_string(tr) + " differs from 1");
    const auto eig = eig_hermitian(m, 1.0);
    if (eig.values(0) < -kPsdTol)
      throw NotPositiveError("density matrix has eigenvalue " + std::to_string(eig.values(0)),
                             eig.values(0));
    DensityMatrix out;
    if (eig.values(0) < -1e-14) {
      Real4 d = eig.values.cwiseMax(0.0);
      d /= d.sum();
      out.mat_ = eig.vectors * d.cast<cplx>().asDiagonal() * eig.vectors.adjoint();
    } else {
      out.mat_ = m;
    }
    return out;
  }

  /// Divides by the trace before validating.
  static DensityMatrix normalized(const Mat4& m) {
    const Mat4 h = (m + m.adjoint()) / 2.0;
    return from_matrix(h / h.trace().real());
  }

  static DensityMatrix pure(const Vec4& psi) { return normalized(psi * psi.adjoint()); }

  static DensityMatrix maximally_mixed() { return DensityMatrix(); }

  const Mat4& mat() const noexcept { return mat_; }

  double min_eigenvalue() const { return eig_hermitian(mat_, 1.0).values(0); }

 private:
  Mat4 mat_;
};

namespace detail {

// tau_ij = <v_i | v~_j> for the subnormalized eigenvectors v_j = sqrt(g_j)|j>.
inline Mat4 tilde_overlap(const HermEig<4>& eig) {
  Mat4 v = eig.vectors;
  for (int j = 0; j < 4; ++j) v.col(j) *= std::sqrt(std::max(eig.values(j), 0.0));
  const Mat4 tau = v.adjoint() * spin_flip() * v.conjugate();
  return (tau + tau.transpose()) / 2.0;
}

}  // namespace detail

/// Descending lambda_i: the square roots of the eigenvalues of rho rho~.
///
/// Evaluated as the singular values of tau_ij = <v_i|v~_j>, which carry the
/// same spectrum without squaring small values.
inline Real4 concurrence_lambdas(const DensityMatrix& rho) {
  const auto eig = eig_hermitian(rho.mat());
  const Eigen::VectorXd sv = singular_values(detail::tilde_overlap(eig));
  return Real4(sv(0), sv(1), sv(2), sv(3));
}

/// C = lambda_0 - lambda_1 - lambda_2 - lambda_3. Negative inside the
/// separable set, zero on its boundary, positive for entangled states.
inline double concurrence_signed(const DensityMatrix& rho) {
  const Real4 l = concurrence_lambdas(rho);
  return l(0) - l(1) - l(2) - l(3);
}

namespace detail {

inline double entropy_term(double r) { return r > 0.0 ? r * std::log(r) : 0.0; }

}  // namespace detail

/// S(rho||sigma) = Tr rho ln rho - Tr rho ln sigma in nats.
///
/// Throws SupportViolation when rho has weight above 1e-10 on an eigenvector
/// of sigma whose eigenvalue is below 1e-12 (S is infinite there).
inline double relative_entropy(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const auto er = eig_hermitian(rho.mat());
  double neg_entropy = 0.0;
  for (int k = 0; k < 4; ++k) neg_entropy += detail::entropy_term(er.values(k));

  const auto es = eig_hermitian(sigma.mat());
  double cross = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double weight = es.vectors.col(i).dot(rho.mat() * es.vectors.col(i)).real();
    const double g = es.values(i);
    if (g < 1e-12) {
      if (weight > 1e-10)
        throw Error(ErrorCode::SupportViolation,
                    "rho has weight " + std::to_string(weight) + " outside the support of sigma");
      continue;
    }
    cross += weight * std::log(g);
  }
  return std::max(neg_entropy - cross, 0.0);
}

/// Minimum eigenvalue of the partial transpose; for two qubits a value
/// >= -1e-10 certifies separability.
inline double ppt_min_eigenvalue(const DensityMatrix& rho) {
  return eig_hermitian(partial_transpose_b(rho.mat())).values(0);
}

/// (1/2)||a - b||_1
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return 0.5 * trace_norm(Mat4(a.mat() - b.mat()));
}

inline double fidelity_pure(const DensityMatrix& rho, const Vec4& psi) {
  return psi.dot(rho.mat() * psi).real();
}

/// Ginibre ensemble G G^dagger / Tr(G G^dagger) with G of size 4 x rank.
inline DensityMatrix random_density(Rng& rng, int rank = 4) {
  if (rank < 1 || rank > 4) throw Error(ErrorCode::DimensionMismatch, "rank must be 1..4");
  std::normal_distribution<double> normal;
  Eigen::Matrix<cplx, 4, Eigen::Dynamic> g(4, rank);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = cplx(normal(rng), normal(rng));
  return DensityMatrix::normalized(g * g.adjoint());
}

/// Haar-random element of SU(2) from a uniformly random unit quaternion.
inline Mat2 random_su2(Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::Vector4d q;
  for (int k = 0; k < 4; ++k) q(k) = normal(rng);
  q.normalize();
  const cplx a(q(0), q(1)), b(q(2), q(3));
  Mat2 u;
  u << a, -std::conj(b), b, std::conj(a);
  return u;
}

/// det = 1 filter U diag(s, 1/s) V with U, V Haar in SU(2) and the
/// singular-value ratio s^2 uniform in [1, max_condition].
inline Mat2 random_filter(Rng& rng, double max_condition) {
  if (!(max_condition >= 1.0)) throw Error(ErrorCode::SingularFilter, "max_condition must be >= 1");
  const Mat2 u = random_su2(rng);
  const Mat2 v = random_su2(rng);
  std::uniform_real_distribution<double> uniform(1.0, max_condition);
  const double ratio = max_condition > 1.0 ? uniform(rng) : 1.0;
  const double s = std::sqrt(ratio);
  Mat2 d = Mat2::Zero();
  d(0, 0) = s;
  d(1, 1) = 1.0 / s;
  return u * d * v;
}

/// (F_A (x) F_B) rho (F_A (x) F_B)^dagger / N
inline DensityMatrix apply_filter(const DensityMatrix& rho, const Mat2& fa, const Mat2& fb) {
  const Mat4 f = kron(fa, fb);
  return DensityMatrix::normalized(f * rho.mat() * f.adjoint());
}

}  // namespace entangle
