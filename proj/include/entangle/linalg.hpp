#pragma once

// Dense complex linear algebra for the 2x2 / 4x4 matrices used throughout:
// Jacobi Hermitian eigensolver, Takagi factorization, principal matrix
// square root and logarithm, Kronecker products and the logarithmic mean.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "entangle/errors.hpp"

namespace entangle {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using Vec4 = Eigen::Vector4cd;
using CMat = Eigen::MatrixXcd;
using Real4 = Eigen::Vector4d;

template <int N>
using CMatN = Eigen::Matrix<cplx, N, N>;

/// [kron(a,b)]_{2i+k, 2j+l} = a_ij b_kl
inline Mat4 kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
  return out;
}

inline CMat kron(const CMat& a, const CMat& b) {
  if (a.rows() != 2 || a.cols() != 2 || b.rows() != 2 || b.cols() != 2)
    throw Error(ErrorCode::DimensionMismatch, "kron expects two 2x2 operands");
  return kron(Mat2(a), Mat2(b));
}

inline Vec4 kron(const Vec2& a, const Vec2& b) {
  return Vec4(a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1));
}

template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& h) {
  return (h - h.adjoint()).norm();
}

template <int N>
struct HermEig {
  Eigen::Matrix<double, N, 1> values;  // ascending
  CMatN<N> vectors;                    // column eigenvectors
};

namespace detail {

// Makes the largest-magnitude component of v real and positive. Ties go to
// the lowest index so the convention is reproducible.
template <typename Col>
void fix_phase(Col&& v) {
  double best = -1.0;
  Eigen::Index idx = 0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double m = std::abs(v(k));
    if (m > best * (1.0 + 1e-12)) {
      best = m;
      idx = k;
    }
  }
  if (best > 0.0) v *= std::conj(v(idx)) / best;
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Eigenvalues are
/// returned ascending; every eigenvector has its largest component real
/// and positive, so identical input gives identical output.
template <typename Derived>
auto eig_hermitian(const Eigen::MatrixBase<Derived>& h_in, double hermiticity_tol = 1e-12) {
  constexpr int N = Derived::RowsAtCompileTime;
  using Mat = CMatN<N>;
  const Mat h = h_in.template cast<cplx>();
  const Eigen::Index n = h.rows();
  if (h.cols() != n) throw Error(ErrorCode::DimensionMismatch, "eig_hermitian expects a square matrix");

  const double fro = h.norm();
  if (!std::isfinite(fro)) throw Error(ErrorCode::NotHermitian, "matrix has non-finite entries");
  if (hermiticity_defect(h) > hermiticity_tol * std::max(fro, 1e-300) && fro > 0.0)
    throw Error(ErrorCode::NotHermitian, "defect " + std::to_string(hermiticity_defect(h)));

  Mat a = (h + h.adjoint()) / 2.0;
  Mat v = Mat::Identity(n, n);

  const double threshold = 1e-14 * fro;
  constexpr int kMaxSweeps = 100;
  bool converged = fro == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q)
        if (p != q) off += std::norm(a(p, q));
    if (std::sqrt(off) <= threshold) {
      converged = true;
      break;
    }
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const cplx apq = a(p, q);
        const double b = std::abs(apq);
        if (b == 0.0) continue;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * b);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const cplx ph = std::conj(apq / b);
        // J = diag(1, ph) * [[c, s], [-s, c]] on the (p, q) plane.
        const cplx jpp = c, jpq = s, jqp = -s * ph, jqq = c * ph;
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * jpp + akq * jqp;
          a(k, q) = akp * jpq + akq * jqq;
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * jpp + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * jqq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(jpp) * apk + std::conj(jqp) * aqk;
          a(q, k) = std::conj(jpq) * apk + std::conj(jqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = 0; q < n; ++q)
        if (p != q) off += std::norm(a(p, q));
    if (std::sqrt(off) > threshold)
      throw Error(ErrorCode::ConvergenceFailure, "Jacobi did not converge in 100 sweeps");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x).real() < a(y, y).real(); });

  HermEig<N> out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src).real();
    out.vectors.col(k) = v.col(src);
    detail::fix_phase(out.vectors.col(k));
  }
  return out;
}

template <int N>
struct TakagiFactor {
  CMatN<N> unitary;                       // S = U D U^T
  Eigen::Matrix<double, N, 1> singulars;  // descending, non-negative
};

/// Takagi factorization S = U D U^T of a complex symmetric matrix.
///
/// Writing S = A + iB, the real symmetric matrix [[A, B], [B, -A]] has the
/// eigenpairs (+d_k, (x_k; y_k)) with u_k = x_k + i y_k satisfying
/// S u_k^* = d_k u_k. Degenerate singular values therefore need no special
/// treatment: any orthonormal basis of the +d eigenspace is a valid Takagi
/// basis. Zero singular values are completed by Gram-Schmidt.
template <typename Derived>
auto takagi(const Eigen::MatrixBase<Derived>& s_in) {
  constexpr int N = Derived::RowsAtCompileTime;
  constexpr int N2 = N == Eigen::Dynamic ? Eigen::Dynamic : 2 * N;
  const CMatN<N> s = s_in.template cast<cplx>();
  const Eigen::Index n = s.rows();
  if (s.cols() != n) throw Error(ErrorCode::DimensionMismatch, "takagi expects a square matrix");
  const double fro = s.norm();
  if ((s - s.transpose()).norm() > 1e-12 * fro)
    throw Error(ErrorCode::NotSymmetric, "takagi input is not complex symmetric");

  const CMatN<N> sym = (s + s.transpose()) / 2.0;
  Eigen::Matrix<double, N2, N2> embed(2 * n, 2 * n);
  embed.topLeftCorner(n, n) = sym.real();
  embed.topRightCorner(n, n) = sym.imag();
  embed.bottomLeftCorner(n, n) = sym.imag();
  embed.bottomRightCorner(n, n) = -sym.real();
  const auto eig = eig_hermitian(embed);

  TakagiFactor<N> out;
  out.unitary.resize(n, n);
  out.singulars.resize(n);
  const double zero_cut = 1e-13 * std::max(fro, 1e-300);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = 2 * n - 1 - k;
    out.singulars(k) = std::max(eig.values(src), 0.0);
    Eigen::Matrix<cplx, N, 1> u(n);
    for (Eigen::Index r = 0; r < n; ++r)
      u(r) = cplx(eig.vectors(r, src).real(), eig.vectors(r + n, src).real());
    // Modified Gram-Schmidt against the columns already accepted.
    for (Eigen::Index j = 0; j < k; ++j) u -= out.unitary.col(j) * out.unitary.col(j).dot(u);
    double norm = u.norm();
    if (norm < 0.5) {
      if (out.singulars(k) > zero_cut)
        throw Error(ErrorCode::DegenerateBlockFailure, "Takagi vector collapsed in a nonzero block");
      // Null space of S: any completion of the unitary is valid.
      for (Eigen::Index e = 0; e < n && norm < 0.5; ++e) {
        u.setZero();
        u(e) = 1.0;
        for (Eigen::Index j = 0; j < k; ++j) u -= out.unitary.col(j) * out.unitary.col(j).dot(u);
        norm = u.norm();
      }
    }
    out.unitary.col(k) = u / norm;
  }
  return out;
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Eigenvalues in [-1e-12, 0] are clamped to zero.
template <typename Derived>
auto sqrt_psd(const Eigen::MatrixBase<Derived>& h) {
  const auto eig = eig_hermitian(h);
  auto d = eig.values;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (d(k) < -1e-12) throw NotPositiveError("sqrt_psd of an indefinite matrix", d(k));
    d(k) = std::sqrt(std::max(d(k), 0.0));
  }
  using Mat = decltype(eig.vectors);
  Mat out = eig.vectors * d.template cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  return out;
}

/// Inverse principal square root of a Hermitian positive definite matrix.
template <typename Derived>
auto inv_sqrt_pd(const Eigen::MatrixBase<Derived>& h) {
  const auto eig = eig_hermitian(h);
  auto d = eig.values;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (d(k) <= 1e-14) throw NotPositiveError("inv_sqrt_pd of a singular matrix", d(k));
    d(k) = 1.0 / std::sqrt(d(k));
  }
  using Mat = decltype(eig.vectors);
  Mat out = eig.vectors * d.template cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  return out;
}

/// Principal logarithm of a Hermitian positive definite matrix.
template <typename Derived>
auto ln_pd(const Eigen::MatrixBase<Derived>& h) {
  const auto eig = eig_hermitian(h);
  auto d = eig.values;
  for (Eigen::Index k = 0; k < d.size(); ++k) {
    if (d(k) <= 1e-14) throw NotPositiveError("ln_pd needs a positive definite matrix", d(k));
    d(k) = std::log(d(k));
  }
  using Mat = decltype(eig.vectors);
  Mat out = eig.vectors * d.template cast<cplx>().asDiagonal() * eig.vectors.adjoint();
  return out;
}

/// Logarithmic mean (a - b) / (ln a - ln b), continuous at a = b.
inline double log_mean(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw Error(ErrorCode::NonPositiveInput, "log_mean needs two positive finite arguments");
  if (a == b) return a;
  const double mid = 0.5 * (a + b);
  const double u = (a - b) / (a + b);
  if (std::abs(a - b) <= 1e-9 * std::max(a, b)) {
    // u / atanh(u) = 1 - u^2/3 - 4u^4/45 - ...
    return mid * (1.0 - u * u / 3.0);
  }
  // ln a - ln b = 2 atanh(u); atanh is accurate for moderate u, the plain
  // difference of logs is accurate when the ratio is large.
  if (std::abs(u) < 0.5) return mid * u / std::atanh(u);
  return (a - b) / (std::log(a) - std::log(b));
}

/// Singular values, descending. Backed by Eigen's two-sided Jacobi SVD.
template <typename Derived>
Eigen::VectorXd singular_values(const Eigen::MatrixBase<Derived>& m) {
  Eigen::JacobiSVD<typename Derived::PlainObject> svd(m.derived());
  return svd.singularValues();
}

/// Sum of |eigenvalues| of a Hermitian matrix.
template <typename Derived>
double trace_norm(const Eigen::MatrixBase<Derived>& h) {
  return eig_hermitian(h, 1e-10).values.cwiseAbs().sum();
}

}  // namespace entangle
