#pragma once

// Wootters decomposition, local-filter normal form and the Gram matrices of
// the (generally non-orthogonal) Wootters basis.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "entangle/errors.hpp"
#include "entangle/linalg.hpp"
#include "entangle/state.hpp"

namespace entangle {

/// rho = sum_i lambda_i |phi_i><phi_i| with <phi_i|phi~_j> = delta_ij.
struct WoottersBasis {
  Mat4 phi;      // column i is |phi_i>
  Real4 lambda;  // descending

  /// M_ij = <phi_i|phi~_j>; the identity for a valid basis.
  Mat4 tilde_overlap() const { return phi.adjoint() * spin_flip() * phi.conjugate(); }

  Mat4 reconstruct() const { return phi * lambda.cast<cplx>().asDiagonal() * phi.adjoint(); }

  double concurrence() const { return lambda(0) - lambda(1) - lambda(2) - lambda(3); }
};

/// rho = (1/N)(F_A (x) F_B) rho_BD (F_A (x) F_B)^dagger with det F = 1 and
/// rho_BD = sum_i p_i |e_i><e_i| in the magic basis, p_0 maximal.
struct FilterNormalForm {
  Mat2 fa = Mat2::Identity();
  Mat2 fb = Mat2::Identity();
  Real4 p = Real4::Constant(0.25);
  double n = 1.0;
  int iterations = 0;
};

/// Q_ij = <phi_i|phi_j>, Pi_ij = <phi~_i|phi~_j>.
struct GramMatrices {
  Mat4 q;
  Mat4 pi;
};

/// Bell-diagonal state sum_i p_i |e_i><e_i|.
inline Mat4 bell_diagonal(const Real4& p) {
  const Mat4 e = magic_basis();
  return e * p.cast<cplx>().asDiagonal() * e.adjoint();
}

namespace detail {

// Overall sign so that the largest component (lowest index among ties) has
// Re + Im > 0. Reproduces the magic basis vectors exactly.
inline void fix_tilde_sign(Eigen::Ref<Vec4> v) {
  double best = -1.0;
  int idx = 0;
  for (int k = 0; k < 4; ++k) {
    const double m = std::abs(v(k));
    if (m > best * (1.0 + 1e-9)) {
      best = m;
      idx = k;
    }
  }
  if (v(idx).real() + v(idx).imag() < 0.0) v = -v;
}

inline bool lexicographic_less(const Vec4& a, const Vec4& b) {
  for (int k = 0; k < 4; ++k) {
    if (a(k).real() != b(k).real()) return a(k).real() < b(k).real();
    if (a(k).imag() != b(k).imag()) return a(k).imag() < b(k).imag();
  }
  return false;
}

// det = 1 by dividing by the principal square root of the determinant.
inline Mat2 unit_determinant(const Mat2& f) {
  const cplx det = f.determinant();
  if (std::abs(det) < 1e-14 * std::max(f.squaredNorm(), 1e-300))
    throw Error(ErrorCode::SingularFilter, "filter is singular");
  return f / std::sqrt(det);
}

// Splits K = A (x) B for a (numerically) rank-one Kronecker product.
inline std::pair<Mat2, Mat2> factor_kron(const Mat4& k) {
  int r0 = 0, c0 = 0;
  k.cwiseAbs().maxCoeff(&r0, &c0);
  const int i0 = r0 / 2, k0 = r0 % 2, j0 = c0 / 2, l0 = c0 % 2;
  Mat2 b;
  for (int kk = 0; kk < 2; ++kk)
    for (int ll = 0; ll < 2; ++ll) b(kk, ll) = k(2 * i0 + kk, 2 * j0 + ll);
  Mat2 a;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a(i, j) = k(2 * i + k0, 2 * j + l0) / b(k0, l0);
  return {a, b};
}

}  // namespace detail

/// Wootters decomposition of a full-rank state.
///
/// With v_j = sqrt(gamma_j)|j> and tau = Takagi-factorized as U D U^T, the
/// vectors w_i = sum_j U_ji v_j satisfy <w_i|w~_k> = d_i delta_ik, so
/// phi_i = w_i / sqrt(d_i) and lambda_i = d_i.
inline WoottersBasis wootters_decomposition(const DensityMatrix& rho) {
  const auto eig = eig_hermitian(rho.mat());
  if (eig.values(0) < 1e-10)
    throw Error(ErrorCode::RankDeficient, "Wootters decomposition needs a full-rank state");
  Mat4 v = eig.vectors;
  for (int j = 0; j < 4; ++j) v.col(j) *= std::sqrt(eig.values(j));
  const Mat4 tau = detail::tilde_overlap(eig);
  const auto tk = takagi(tau);

  WoottersBasis out;
  const Mat4 w = v * tk.unitary;
  for (int i = 0; i < 4; ++i) {
    out.lambda(i) = tk.singulars(i);
    out.phi.col(i) = w.col(i) / std::sqrt(tk.singulars(i));
    detail::fix_tilde_sign(out.phi.col(i));
  }

  // Within exactly degenerate blocks the basis is not unique; order it
  // lexicographically by components.
  const double scale = out.lambda(0);
  int start = 0;
  while (start < 4) {
    int end = start + 1;
    while (end < 4 && std::abs(out.lambda(start) - out.lambda(end)) <= 1e-12 * scale) ++end;
    if (end - start > 1) {
      std::array<Vec4, 4> cols;
      for (int k = start; k < end; ++k) cols[static_cast<std::size_t>(k)] = out.phi.col(k);
      std::stable_sort(cols.begin() + start, cols.begin() + end, detail::lexicographic_less);
      for (int k = start; k < end; ++k) out.phi.col(k) = cols[static_cast<std::size_t>(k)];
    }
    start = end;
  }

  const double defect = (out.tilde_overlap() - Mat4::Identity()).norm();
  if (defect > 1e-10)
    throw Error(ErrorCode::TildeOrthonormalityFailure,
                "tilde-orthonormality defect " + std::to_string(defect));
  return out;
}

inline GramMatrices gram_matrices(const WoottersBasis& basis) {
  Mat4 tilde;
  for (int i = 0; i < 4; ++i) tilde.col(i) = tilde_state(basis.phi.col(i));
  return {basis.phi.adjoint() * basis.phi, tilde.adjoint() * tilde};
}

/// (1/N)(F_A (x) F_B) rho_BD (F_A (x) F_B)^dagger with N the trace.
inline DensityMatrix state_from_normal_form(const Mat2& fa, const Mat2& fb, const Real4& p) {
  const Mat4 f = kron(fa, fb);
  return DensityMatrix::normalized(f * bell_diagonal(p) * f.adjoint());
}

/// Local-filter normal form of a full-rank state.
///
/// Alternately normalizes the two single-qubit reductions to I/2 (operator
/// Sinkhorn scaling), then diagonalizes the resulting state, which is real
/// symmetric in the magic basis. Every SO(4) rotation of the magic basis is
/// a local unitary, so the weights can be sorted freely (odd permutations
/// are combined with a sign flip).
inline FilterNormalForm filter_normal_form(const DensityMatrix& rho) {
  if (rho.min_eigenvalue() < 1e-10)
    throw Error(ErrorCode::RankDeficient, "filter normal form needs a full-rank state");

  constexpr int kMaxIterations = 10000;
  constexpr double kTol = 1e-10;
  const Mat2 half = Mat2::Identity() / 2.0;

  Mat4 cur = rho.mat();
  Mat2 xa = Mat2::Identity();
  Mat2 xb = Mat2::Identity();
  int it = 0;
  for (;; ++it) {
    const Mat2 ra = partial_trace_b(cur);
    const Mat2 rb = partial_trace_a(cur);
    const double dev = std::max((ra - half).norm(), (rb - half).norm());
    if (dev <= kTol) break;
    if (it >= kMaxIterations)
      throw Error(ErrorCode::ConvergenceFailure, "filter iteration did not converge");
    const Mat2 a = inv_sqrt_pd(ra);
    const Mat4 fa_step = kron(a, Mat2::Identity());
    cur = fa_step * cur * fa_step.adjoint();
    cur = ((cur + cur.adjoint()) / (2.0 * cur.trace().real())).eval();
    xa = a * xa;
    const Mat2 b = inv_sqrt_pd(partial_trace_a(cur));
    const Mat4 fb_step = kron(Mat2::Identity(), b);
    cur = fb_step * cur * fb_step.adjoint();
    cur = ((cur + cur.adjoint()) / (2.0 * cur.trace().real())).eval();
    xb = b * xb;
  }

  const Mat4 e = magic_basis();
  const Mat4 in_magic = e.adjoint() * cur * e;
  const Eigen::Matrix4d real_part = (in_magic.real() + in_magic.real().transpose()) / 2.0;
  const auto eig = eig_hermitian(real_part);

  // Descending weights; rotation kept in SO(4).
  Eigen::Matrix4d rot;
  Real4 p;
  for (int k = 0; k < 4; ++k) {
    rot.col(k) = eig.vectors.col(3 - k).real();
    p(k) = std::max(eig.values(3 - k), 0.0);
  }
  if (rot.determinant() < 0.0) rot.col(3) = -rot.col(3);
  p /= p.sum();

  const Mat4 local = e * rot.cast<cplx>() * e.adjoint();
  const auto [ua, ub] = detail::factor_kron(local);

  FilterNormalForm out;
  out.fa = detail::unit_determinant(xa.inverse() * ua);
  out.fb = detail::unit_determinant(xb.inverse() * ub);
  out.p = p;
  const Mat4 f = kron(out.fa, out.fb);
  out.n = (f * bell_diagonal(p) * f.adjoint()).trace().real();
  out.iterations = it;
  return out;
}

}  // namespace entangle
