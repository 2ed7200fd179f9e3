#pragma once

// Boundary states (signed concurrence zero), the operator Z, and the
// closed-form normal direction delta such that sigma is the closest
// separable state of every rho(x) = sigma + x delta with x >= 0.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "entangle/errors.hpp"
#include "entangle/linalg.hpp"
#include "entangle/normal_form.hpp"
#include "entangle/state.hpp"

namespace entangle {

/// W = diag{1, -1, -1, -1}
inline Real4 w_diagonal() { return Real4(1.0, -1.0, -1.0, -1.0); }

/// Matrix of logarithmic means of eigenvalue pairs. Entries with a zero
/// eigenvalue take their analytic limit: G_ii = gamma_i, and G_ij = 0 when
/// gamma_i or gamma_j vanishes.
inline Eigen::Matrix4d g_matrix(const Real4& gamma) {
  Eigen::Matrix4d g;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double a = gamma(i), b = gamma(j);
      if (i == j)
        g(i, j) = std::max(a, 0.0);
      else if (a <= 0.0 || b <= 0.0)
        g(i, j) = 0.0;
      else
        g(i, j) = log_mean(a, b);
    }
  }
  return g;
}

struct BoundaryState {
  DensityMatrix sigma;
  WoottersBasis basis;
  GramMatrices gram;
  Real4 gamma;     // eigenvalues of sigma, descending
  Mat4 eigvecs;    // column i pairs with gamma(i)
  Mat4 u;          // U sqrt(Q) Lambda sqrt(Q) U^dagger = Gamma
  Mat4 sqrt_q;
  Mat4 sqrt_pi;
  Eigen::Matrix4d g;
  Real4 w = w_diagonal();

  // Present when the state was built from filters and weights.
  std::optional<Mat2> fa;
  std::optional<Mat2> fb;
  std::optional<Real4> p;
};

struct NormalVector {
  Mat4 delta;          // computational basis, traceless Hermitian
  Mat4 delta_e;        // sigma eigenbasis
  Mat4 delta_l;        // Wootters representation
  double delta_c = 0;  // Tr(Delta^Lambda W)
  double delta_c_hadamard = 0;  // sum_ij |[U sqrt(Pi) W sqrt(Pi) U^dagger]_ij|^2 G_ij
};

struct RayPoint {
  double x = 0;
  DensityMatrix rho;
  double s_exact = 0;  // S(rho(x)||sigma), nats
  double c_signed = 0;
  double min_eig = 0;
};

/// Assembles a boundary state from a Wootters basis. When sigma is given it
/// is used as-is for the eigen representation; otherwise it is rebuilt
/// from the basis.
inline BoundaryState boundary_from_basis(const WoottersBasis& basis,
                                         const std::optional<DensityMatrix>& sigma = std::nullopt) {
  BoundaryState bs;
  bs.basis = basis;
  bs.sigma = sigma ? *sigma : DensityMatrix::normalized(basis.reconstruct());
  bs.gram = gram_matrices(basis);

  const auto eig = eig_hermitian(bs.sigma.mat());
  for (int i = 0; i < 4; ++i) {
    bs.gamma(i) = eig.values(3 - i);
    bs.eigvecs.col(i) = eig.vectors.col(3 - i);
  }
  bs.sqrt_q = sqrt_psd(bs.gram.q);
  bs.sqrt_pi = bs.sqrt_q.conjugate();
  // U = E^dagger Phi Q^{-1/2}: unitary, and consistent with the phases of
  // both the eigenvectors and the Wootters basis.
  bs.u = bs.eigvecs.adjoint() * basis.phi * inv_sqrt_pd(bs.gram.q);
  bs.g = g_matrix(bs.gamma);
  return bs;
}

/// sigma = (1/N)(F_A (x) F_B) sigma_BD (F_A (x) F_B)^dagger with
/// sigma_BD = (1/2)|e_0><e_0| + sum_i p_i |e_i><e_i|, and the Wootters basis
/// taken directly as phi_i = (F_A (x) F_B) e_i.
inline BoundaryState make_boundary_state(const Mat2& fa, const Mat2& fb, double p1, double p2,
                                         double p3) {
  const double sum = p1 + p2 + p3;
  for (double pi : {p1, p2, p3})
    if (!(pi > 0.0 && pi < 0.5))
      throw Error(ErrorCode::SimplexViolation, "weights must lie in (0, 1/2)");
  if (std::abs(sum - 0.5) > 1e-12)
    throw Error(ErrorCode::SimplexViolation, "p1 + p2 + p3 must equal 1/2");

  const Mat2 a = detail::unit_determinant(fa);
  const Mat2 b = detail::unit_determinant(fb);
  const Mat4 f = kron(a, b);
  const Real4 p(0.5, p1, p2, p3);

  WoottersBasis basis;
  basis.phi = f * magic_basis();
  double n = 0.0;
  for (int i = 0; i < 4; ++i) n += p(i) * basis.phi.col(i).squaredNorm();
  basis.lambda = p / n;

  BoundaryState bs = boundary_from_basis(basis);
  bs.fa = a;
  bs.fb = b;
  bs.p = p;
  return bs;
}

/// Full-rank regularization of a low-rank boundary state: zero weights are
/// replaced by epsilon and the others rescaled so p1 + p2 + p3 = 1/2.
inline BoundaryState boundary_state_limit(const Mat2& fa, const Mat2& fb, double p1, double p2,
                                          double p3, double epsilon) {
  std::array<double, 3> p{p1, p2, p3};
  for (double pi : p)
    if (!(pi >= 0.0 && pi <= 0.5))
      throw Error(ErrorCode::SimplexViolation, "weights must lie in [0, 1/2]");
  if (std::abs(p1 + p2 + p3 - 0.5) > 1e-12)
    throw Error(ErrorCode::SimplexViolation, "p1 + p2 + p3 must equal 1/2");
  if (!(epsilon > 0.0 && epsilon <= 1e-3))
    throw Error(ErrorCode::SimplexViolation, "epsilon must lie in (0, 1e-3]");
  int zeros = 0;
  double rest = 0.0;
  for (double pi : p) {
    if (pi == 0.0)
      ++zeros;
    else
      rest += pi;
  }
  if (zeros == 0) throw Error(ErrorCode::SimplexViolation, "limit needs at least one zero weight");
  if (zeros == 3) throw Error(ErrorCode::SimplexViolation, "all weights vanish");
  const double scale = (0.5 - zeros * epsilon) / rest;
  for (double& pi : p) pi = pi == 0.0 ? epsilon : pi * scale;
  return make_boundary_state(fa, fb, p[0], p[1], p[2]);
}

/// Boundary state from an externally supplied sigma via the Takagi route.
/// Throws BoundaryViolation when |C(sigma)| exceeds c_tol.
inline BoundaryState boundary_from_density(const DensityMatrix& sigma, double c_tol = 1e-6) {
  const WoottersBasis basis = wootters_decomposition(sigma);
  const double c = basis.concurrence();
  if (std::abs(c) > c_tol)
    throw Error(ErrorCode::BoundaryViolation,
                "signed concurrence " + std::to_string(c) + " is not zero");
  return boundary_from_basis(basis, sigma);
}

namespace detail {

// Z from a precomputed eigendecomposition of sigma (values ascending).
inline Mat4 z_from_eig(const Mat4& rho, const HermEig<4>& eig) {
  const Eigen::Matrix4d g = g_matrix(eig.values);
  const Mat4 re = eig.vectors.adjoint() * rho * eig.vectors;
  Mat4 ze;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ze(i, j) = re(i, j) / g(i, j) - (i == j ? 1.0 : 0.0);
  const Mat4 z = eig.vectors * ze * eig.vectors.adjoint();
  return (z + z.adjoint()) / 2.0;
}

}  // namespace detail

/// Z = int_0^inf (sigma+z)^{-1} rho (sigma+z)^{-1} dz - I, in closed form:
/// in sigma's eigenbasis Z_ij = R_ij / G_ij - delta_ij.
inline Mat4 z_operator(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const auto eig = eig_hermitian(sigma.mat());
  if (eig.values(0) < 1e-10)
    throw Error(ErrorCode::RankDeficientSigma, "Z needs a full-rank sigma");
  return detail::z_from_eig(rho.mat(), eig);
}

/// The nine extremal-condition residuals: |Tr (I (x) s_i) Z sigma| for
/// i = 1..3, |Tr (s_i (x) I) Z sigma| for i = 1..3, and
/// |<phi_i|Z|phi_i> + <phi_0|Z|phi_0>| for i = 1..3.
inline std::array<double, 9> extremal_residuals(const DensityMatrix& rho, const BoundaryState& bs) {
  const Mat4 z = z_operator(rho, bs.sigma);
  const Mat4 zs = z * bs.sigma.mat();
  std::array<double, 9> out{};
  for (int i = 1; i <= 3; ++i) {
    out[static_cast<std::size_t>(i - 1)] = std::abs((kron(pauli(0), pauli(i)) * zs).trace());
    out[static_cast<std::size_t>(i + 2)] = std::abs((kron(pauli(i), pauli(0)) * zs).trace());
  }
  const auto& phi = bs.basis.phi;
  const cplx z00 = phi.col(0).dot(z * phi.col(0));
  for (int i = 1; i <= 3; ++i)
    out[static_cast<std::size_t>(i + 5)] = std::abs(phi.col(i).dot(z * phi.col(i)) + z00);
  return out;
}

/// Delta^E = (U sqrt(Pi) W sqrt(Pi) U^dagger) o G and its Wootters-basis
/// counterpart Delta^Lambda = sqrt(Pi) U^dagger Delta^E U sqrt(Pi).
inline NormalVector normal_vector(const BoundaryState& bs) {
  NormalVector nv;
  const Mat4 m = bs.u * bs.sqrt_pi * bs.w.cast<cplx>().asDiagonal() * bs.sqrt_pi * bs.u.adjoint();
  nv.delta_e = m.cwiseProduct(bs.g.cast<cplx>());
  nv.delta_l = bs.sqrt_pi * bs.u.adjoint() * nv.delta_e * bs.u * bs.sqrt_pi;
  const Mat4 d = bs.eigvecs * nv.delta_e * bs.eigvecs.adjoint();
  nv.delta = (d + d.adjoint()) / 2.0;
  nv.delta_c = (nv.delta_l * bs.w.cast<cplx>().asDiagonal()).trace().real();
  nv.delta_c_hadamard = m.cwiseAbs2().cwiseProduct(bs.g).sum();
  return nv;
}

/// rho(x) = sigma + x delta. Throws NotPositiveError past x_max.
inline RayPoint entangled_ray(const BoundaryState& bs, const NormalVector& nv, double x) {
  const Mat4 m = bs.sigma.mat() + x * nv.delta;
  const double min_eig = eig_hermitian(m).values(0);
  if (min_eig < -kPsdTol)
    throw NotPositiveError("rho(x) is not positive at x = " + std::to_string(x), min_eig);
  RayPoint rp;
  rp.x = x;
  rp.rho = DensityMatrix::from_matrix(m);
  rp.min_eig = min_eig;
  rp.s_exact = rp.rho.mat() == bs.sigma.mat() ? 0.0 : relative_entropy(rp.rho, bs.sigma);
  rp.c_signed = concurrence_signed(rp.rho);
  return rp;
}

inline RayPoint entangled_ray(const BoundaryState& bs, double x) {
  return entangled_ray(bs, normal_vector(bs), x);
}

/// sup{x >= 0 : sigma + x delta >= 0}, from the spectrum of
/// sigma^{-1/2} delta sigma^{-1/2}, polished by Newton steps on the
/// smallest eigenvalue of sigma + x delta.
inline double x_max_psd(const BoundaryState& bs, const NormalVector& nv) {
  const Mat4 is = inv_sqrt_pd(bs.sigma.mat());
  const double nu_min = eig_hermitian(Mat4(is * nv.delta * is), 1e-10).values(0);
  if (!(nu_min < 0.0)) return std::numeric_limits<double>::infinity();
  double x = -1.0 / nu_min;
  for (int k = 0; k < 4; ++k) {
    const auto eig = eig_hermitian(Mat4(bs.sigma.mat() + x * nv.delta));
    const double slope = eig.vectors.col(0).dot(nv.delta * eig.vectors.col(0)).real();
    if (slope >= 0.0 || eig.values(0) == 0.0) break;
    const double next = x - eig.values(0) / slope;
    if (!(std::abs(next - x) < 1e-3 * x)) break;
    x = next;
  }
  return x;
}

inline double x_max_psd(const BoundaryState& bs) { return x_max_psd(bs, normal_vector(bs)); }

struct WRankReport {
  int rank = 0;
  double min_singular = 0;
  double max_singular = 0;
  double diagonal_coefficient_max = 0;  // must vanish
};

/// Rank of the 12x12 real linear system for the off-diagonal elements of
/// a Hermitian W: sum_lm <phi_l|O|phi~_m> W_ml lambda_l = 0 for
/// O in {I (x) s_i, s_i (x) I}, split into real and imaginary parts.
inline WRankReport w_uniqueness_rank(const BoundaryState& bs) {
  const auto& phi = bs.basis.phi;
  Mat4 tilde;
  for (int m = 0; m < 4; ++m) tilde.col(m) = tilde_state(phi.col(m));

  Eigen::Matrix<double, 12, 12> a = Eigen::Matrix<double, 12, 12>::Zero();
  WRankReport out;
  for (int op = 0; op < 6; ++op) {
    const int i = op % 3 + 1;
    const Mat4 o = op < 3 ? kron(pauli(0), pauli(i)) : kron(pauli(i), pauli(0));
    // c(l, m) = <phi_l|O|phi~_m> lambda_l multiplies W_ml.
    const Mat4 c = (phi.adjoint() * o * tilde).array().colwise() * bs.basis.lambda.cast<cplx>().array();
    for (int l = 0; l < 4; ++l)
      out.diagonal_coefficient_max = std::max(out.diagonal_coefficient_max, std::abs(c(l, l)));
    int col = 0;
    for (int j = 0; j < 4; ++j) {
      for (int k = j + 1; k < 4; ++k) {
        // W_jk = a + ib appears with c(k, j); W_kj = a - ib with c(j, k).
        const cplx coef_re = c(k, j) + c(j, k);
        const cplx coef_im = cplx(0.0, 1.0) * (c(k, j) - c(j, k));
        a(2 * op, col) = coef_re.real();
        a(2 * op + 1, col) = coef_re.imag();
        a(2 * op, col + 1) = coef_im.real();
        a(2 * op + 1, col + 1) = coef_im.imag();
        col += 2;
      }
    }
  }
  const Eigen::VectorXd sv = singular_values(a);
  out.max_singular = sv(0);
  out.min_singular = sv(sv.size() - 1);
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-10 * out.max_singular) ++out.rank;
  return out;
}

}  // namespace entangle
