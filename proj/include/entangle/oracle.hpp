#pragma once

// Numerical relative entropy of entanglement: conditional gradient over
// the convex hull of product pure states, with pairwise (away) steps over
// the stored ensemble and a Frank-Wolfe duality-gap certificate.
//
// Nothing here uses the closed-form normal vector; the only shared piece
// is the Hadamard-quotient evaluation of Z, which is the exact gradient of
// -Tr rho ln sigma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <ceres/ceres.h>

#include "entangle/boundary.hpp"
#include "entangle/errors.hpp"
#include "entangle/linalg.hpp"
#include "entangle/state.hpp"

namespace entangle {

struct ProductState {
  Vec2 a = Vec2(1, 0);
  Vec2 b = Vec2(1, 0);

  Vec4 ket() const { return kron(a, b); }
  Mat4 projector() const {
    const Vec4 k = ket();
    return k * k.adjoint();
  }
};

struct SeparableEnsemble {
  std::vector<double> weights;
  std::vector<ProductState> states;

  Mat4 mixture() const {
    Mat4 m = Mat4::Zero();
    for (std::size_t k = 0; k < states.size(); ++k) m += weights[k] * states[k].projector();
    return m;
  }
};

struct LinearOracleResult {
  ProductState state;
  double value = 0;  // <ab|h|ab>
};

struct OracleOptions {
  double gap_tol = 1e-6;
  long max_iter = 100000;
  std::uint64_t seed = 0;
  int restarts = 8;
  double regularization = 1e-6;  // eta for rank-deficient rho
};

struct OracleReport {
  double e_r = 0;  // nats
  DensityMatrix sigma_star;
  SeparableEnsemble ensemble;
  double duality_gap = 0;
  long iterations = 0;
  bool converged = false;       // false means the iteration limit was hit
  bool regularized = false;     // rho was replaced by (1-eta) rho + eta I/4
  double regularization_error = 0;
  std::vector<double> objective;  // -Tr rho ln sigma_k per iteration
};

namespace detail {

// Normalized eigenvector of the smaller eigenvalue of a 2x2 Hermitian matrix.
inline Vec2 min_eigvec2(const Mat2& h) {
  const double a = h(0, 0).real(), d = h(1, 1).real();
  const cplx c = h(0, 1);
  const double lam = 0.5 * (a + d) - std::hypot(0.5 * (a - d), std::abs(c));
  const Vec2 v1(c, lam - a);
  const Vec2 v2(lam - d, std::conj(c));
  const Vec2 v = v1.squaredNorm() >= v2.squaredNorm() ? v1 : v2;
  const double n = v.norm();
  if (n == 0.0) return Vec2(1, 0);
  return v / n;
}

inline Mat2 contract_b(const Mat4& h, const Vec2& b) {
  Mat2 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      cplx s = 0;
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) s += std::conj(b(k)) * h(2 * i + k, 2 * j + l) * b(l);
      m(i, j) = s;
    }
  return m;
}

inline Mat2 contract_a(const Mat4& h, const Vec2& a) {
  Mat2 m;
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      cplx s = 0;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) s += std::conj(a(i)) * h(2 * i + k, 2 * j + l) * a(j);
      m(k, l) = s;
    }
  return m;
}

inline double expectation(const Mat4& h, const Vec4& v) { return v.dot(h * v).real(); }

inline LinearOracleResult alternate_from(const Mat4& h, Vec2 b) {
  LinearOracleResult best;
  double prev = std::numeric_limits<double>::infinity();
  Vec2 a;
  for (int it = 0; it < 500; ++it) {
    a = min_eigvec2(contract_b(h, b));
    b = min_eigvec2(contract_a(h, a));
    const double val = expectation(h, kron(a, b));
    if (prev - val < 1e-12) {
      prev = std::min(prev, val);
      break;
    }
    prev = val;
  }
  best.state = ProductState{a, b};
  best.value = expectation(h, best.state.ket());
  return best;
}

inline Vec2 random_qubit(Rng& rng) {
  std::normal_distribution<double> normal;
  Vec2 v(cplx(normal(rng), normal(rng)), cplx(normal(rng), normal(rng)));
  return v.normalized();
}

}  // namespace detail

/// Approximate argmin of <ab|h|ab> over product states by alternating
/// 2x2 eigenproblems. Starts from the dominant Schmidt factor of the lowest
/// eigenvector of h, from each extra hint, and from `restarts` random
/// states drawn from rng.
inline LinearOracleResult product_linear_oracle(const Mat4& h, int restarts, Rng& rng,
                                                const std::vector<ProductState>& hints = {}) {
  const Mat4 hh = (h + h.adjoint()) / 2.0;
  const auto eig = eig_hermitian(hh, 1e-10);
  Mat2 psi;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k) psi(i, k) = eig.vectors(2 * i + k, 0);
  Eigen::JacobiSVD<Mat2> svd(psi, Eigen::ComputeFullU | Eigen::ComputeFullV);

  LinearOracleResult best = detail::alternate_from(hh, svd.matrixV().col(0).conjugate());
  auto consider = [&](const Vec2& b0) {
    const auto r = detail::alternate_from(hh, b0);
    if (r.value < best.value) best = r;
  };
  for (const auto& hint : hints) consider(hint.b);
  for (int r = 0; r < restarts; ++r) consider(detail::random_qubit(rng));
  return best;
}

inline LinearOracleResult product_linear_oracle(const Mat4& h, int restarts, std::uint64_t seed) {
  Rng rng(seed);
  return product_linear_oracle(h, restarts, rng);
}

namespace detail {

struct Evaluation {
  HermEig<4> eig;
  double objective = std::numeric_limits<double>::infinity();  // -Tr rho ln sigma
  bool supported = false;
};

inline Evaluation evaluate(const Mat4& rho, const Mat4& sigma) {
  Evaluation ev;
  ev.eig = eig_hermitian(sigma, 1e-8);
  double f = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double g = ev.eig.values(i);
    const double w = ev.eig.vectors.col(i).dot(rho * ev.eig.vectors.col(i)).real();
    if (g <= 1e-300) {
      if (w > 1e-300) return ev;
      continue;
    }
    f -= w * std::log(g);
  }
  ev.objective = f;
  ev.supported = true;
  return ev;
}

// Gradient of f(sigma) = -Tr rho ln sigma is -(Z + I).
inline Mat4 negative_gradient(const Mat4& rho, const Evaluation& ev) {
  return z_from_eig(rho, ev.eig) + Mat4::Identity();
}

// Root of the convex line derivative phi'(t) = -Tr(G(sigma + t d) d) on
// [0, t_max], by Illinois regula falsi with bisection safeguards.
inline double line_search(const Mat4& rho, const Mat4& sigma, const Mat4& d, double t_max) {
  auto slope = [&](double t) {
    const Evaluation ev = evaluate(rho, sigma + t * d);
    if (!ev.supported || ev.eig.values(0) <= 1e-300) return std::numeric_limits<double>::infinity();
    return -(negative_gradient(rho, ev) * d).trace().real();
  };
  const double s_hi = slope(t_max);
  if (s_hi <= 0.0) return t_max;
  double lo = 0.0, hi = t_max;
  double f_lo = slope(0.0), f_hi = s_hi;
  if (f_lo >= 0.0) return 0.0;
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * t_max; ++it) {
    double t;
    if (std::isfinite(f_hi) && it % 4 != 3) {
      t = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    } else {
      t = 0.5 * (lo + hi);
    }
    const double f = slope(t);
    if (f == 0.0) return t;
    if (f < 0.0) {
      lo = t;
      f_lo = f;
      if (side == -1 && std::isfinite(f_hi)) f_hi *= 0.5;
      side = -1;
    } else {
      hi = t;
      f_hi = f;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (lo + hi);
}

inline double neg_entropy(const Mat4& rho) {
  const auto eig = eig_hermitian(rho, 1e-8);
  double s = 0.0;
  for (int k = 0; k < 4; ++k) s += entropy_term(eig.values(k));
  return s;
}

}  // namespace detail

namespace detail {

// f(S) = -Tr rho ln S + ln Tr S over S = sum_k |a_k b_k><a_k b_k| with
// unnormalized a_k, b_k; 8 reals per atom. Equals -Tr rho ln sigma for the
// normalized mixture and is smooth in the atom parameters.
class EnsembleObjective final : public ceres::FirstOrderFunction {
 public:
  EnsembleObjective(const Mat4& rho, int atoms) : rho_(rho), atoms_(atoms) {}

  int NumParameters() const override { return 8 * atoms_; }

  bool Evaluate(const double* x, double* cost, double* gradient) const override {
    Mat4 s = Mat4::Zero();
    for (int k = 0; k < atoms_; ++k) {
      const Vec4 v = kron(unpack(x + 8 * k), unpack(x + 8 * k + 4));
      s += v * v.adjoint();
    }
    const double tr = s.trace().real();
    if (!(tr > 0.0) || !std::isfinite(tr)) return false;
    const Evaluation ev = evaluate(rho_, s);
    if (!ev.supported || ev.eig.values(0) <= 1e-14 * tr) return false;
    *cost = ev.objective + std::log(tr);
    if (gradient == nullptr) return true;
    const Mat4 m = Mat4::Identity() / tr - z_from_eig(rho_, ev.eig) - Mat4::Identity();
    for (int k = 0; k < atoms_; ++k) {
      const Vec2 a = unpack(x + 8 * k), b = unpack(x + 8 * k + 4);
      pack(2.0 * (contract_b(m, b) * a), gradient + 8 * k);
      pack(2.0 * (contract_a(m, a) * b), gradient + 8 * k + 4);
    }
    return true;
  }

  static Vec2 unpack(const double* p) { return Vec2(cplx(p[0], p[1]), cplx(p[2], p[3])); }
  static void pack(const Vec2& v, double* p) {
    p[0] = v(0).real();
    p[1] = v(0).imag();
    p[2] = v(1).real();
    p[3] = v(1).imag();
  }

 private:
  Mat4 rho_;
  int atoms_;
};

// Local descent on all atoms and weights at once (L-BFGS). Keeps the input
// ensemble unless the objective decreases.
inline long refine_ensemble(const Mat4& rho, SeparableEnsemble& ens, double& objective) {
  const int atoms = static_cast<int>(ens.states.size());
  std::vector<double> x(static_cast<std::size_t>(8 * atoms));
  for (int k = 0; k < atoms; ++k) {
    const double r = std::sqrt(std::sqrt(ens.weights[static_cast<std::size_t>(k)]));
    EnsembleObjective::pack(r * ens.states[static_cast<std::size_t>(k)].a, x.data() + 8 * k);
    EnsembleObjective::pack(r * ens.states[static_cast<std::size_t>(k)].b, x.data() + 8 * k + 4);
  }
  ceres::GradientProblem problem(new EnsembleObjective(rho, atoms));
  ceres::GradientProblemSolver::Options options;
  options.line_search_direction_type = ceres::LBFGS;
  options.max_num_iterations = 500;
  options.function_tolerance = 1e-16;
  options.gradient_tolerance = 1e-14;
  options.parameter_tolerance = 1e-16;
  options.logging_type = ceres::SILENT;
  ceres::GradientProblemSolver::Summary summary;
  ceres::Solve(options, problem, x.data(), &summary);
  if (!(summary.final_cost < objective)) return static_cast<long>(summary.iterations.size());

  SeparableEnsemble out;
  double total = 0.0;
  for (int k = 0; k < atoms; ++k) {
    const Vec2 a = EnsembleObjective::unpack(x.data() + 8 * k);
    const Vec2 b = EnsembleObjective::unpack(x.data() + 8 * k + 4);
    const double w = a.squaredNorm() * b.squaredNorm();
    if (!(w > 0.0)) continue;
    out.states.push_back(ProductState{a.normalized(), b.normalized()});
    out.weights.push_back(w);
    total += w;
  }
  for (double& w : out.weights) w /= total;
  const Evaluation ev = evaluate(rho, out.mixture());
  if (!ev.supported || !(ev.objective < objective)) return static_cast<long>(summary.iterations.size());
  ens = std::move(out);
  objective = ev.objective;
  return static_cast<long>(summary.iterations.size());
}

// Drops atoms whose weight is negligible relative to the largest one.
inline void prune(SeparableEnsemble& ens) {
  const double top = *std::max_element(ens.weights.begin(), ens.weights.end());
  SeparableEnsemble out;
  for (std::size_t k = 0; k < ens.states.size(); ++k) {
    if (ens.weights[k] <= 1e-14 * top) continue;
    out.states.push_back(ens.states[k]);
    out.weights.push_back(ens.weights[k]);
  }
  double total = 0.0;
  for (double w : out.weights) total += w;
  for (double& w : out.weights) w /= total;
  ens = std::move(out);
}

}  // namespace detail

/// E_R(rho) upper bound e_r = S(rho||sigma*) with sigma* separable, and a
/// duality gap bounding e_r - E_R from above.
///
/// Starts from I/4 as the uniform mixture of computational product states.
/// Each iteration calls the product linear oracle on the gradient, takes a
/// Frank-Wolfe or away step with an exact line search, then moves all
/// stored atoms and weights together by L-BFGS on their parameters. The
/// duality gap of the linear oracle is the stopping test. A rank-deficient
/// rho is replaced by (1 - eta) rho + eta I/4.
inline OracleReport closest_separable(const DensityMatrix& rho_in, const OracleOptions& opt = {}) {
  if (!(opt.gap_tol > 0.0)) throw Error(ErrorCode::InvalidState, "gap_tol must be positive");
  OracleReport rep;
  Mat4 rho = rho_in.mat();
  if (rho_in.min_eigenvalue() < 1e-10) {
    const double eta = opt.regularization;
    rho = (1.0 - eta) * rho + eta * Mat4::Identity() / 4.0;
    rep.regularized = true;
    rep.regularization_error = eta * std::log(4.0);
  }
  const DensityMatrix target = DensityMatrix::normalized(rho);
  rho = target.mat();
  Rng rng(opt.seed);

  SeparableEnsemble ens;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      ens.states.push_back(ProductState{Vec2::Unit(i), Vec2::Unit(j)});
      ens.weights.push_back(0.25);
    }
  Mat4 sigma = ens.mixture();
  detail::Evaluation ev = detail::evaluate(rho, sigma);

  double gap = std::numeric_limits<double>::infinity();
  long it = 0;
  for (; it < opt.max_iter; ++it) {
    if (!ev.supported) {
      // Support lost through roundoff: mix I/4 back in.
      for (double& w : ens.weights) w *= 0.5;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
          ens.states.push_back(ProductState{Vec2::Unit(i), Vec2::Unit(j)});
          ens.weights.push_back(0.125);
        }
      sigma = ens.mixture();
      ev = detail::evaluate(rho, sigma);
      if (!ev.supported) throw Error(ErrorCode::SupportCollapse, "sigma lost the support of rho");
    }
    rep.objective.push_back(ev.objective);
    const Mat4 grad = detail::negative_gradient(rho, ev);

    std::size_t best_atom = 0, worst_atom = 0;
    double best_g = -std::numeric_limits<double>::infinity();
    double worst_g = std::numeric_limits<double>::infinity();
    double mean_g = 0.0;
    for (std::size_t k = 0; k < ens.states.size(); ++k) {
      const double g = detail::expectation(grad, ens.states[k].ket());
      mean_g += ens.weights[k] * g;
      if (g > best_g) {
        best_g = g;
        best_atom = k;
      }
      if (g < worst_g) {
        worst_g = g;
        worst_atom = k;
      }
    }
    const LinearOracleResult lmo =
        product_linear_oracle(-grad, opt.restarts, rng, {ens.states[best_atom]});
    const double lmo_g = -lmo.value;

    gap = std::max(std::max(lmo_g, best_g) - mean_g, 0.0);
    if (gap <= opt.gap_tol) {
      rep.converged = true;
      break;
    }

    // Frank-Wolfe step toward the oracle atom, or away step from the worst
    // stored atom, whichever promises more descent.
    const double fw_gain = lmo_g - mean_g;
    const double away_gain = mean_g - worst_g;
    const double w_worst = ens.weights[worst_atom];
    if (fw_gain >= away_gain || w_worst >= 1.0) {
      const Mat4 d = lmo.state.projector() - sigma;
      const double t = detail::line_search(rho, sigma, d, 1.0);
      for (double& w : ens.weights) w *= 1.0 - t;
      ens.states.push_back(lmo.state);
      ens.weights.push_back(t);
    } else {
      const double t_max = w_worst / (1.0 - w_worst);
      const Mat4 d = sigma - ens.states[worst_atom].projector();
      const double t = detail::line_search(rho, sigma, d, t_max);
      for (double& w : ens.weights) w *= 1.0 + t;
      ens.weights[worst_atom] -= t;
      if (t >= t_max) ens.weights[worst_atom] = 0.0;
    }
    detail::prune(ens);
    sigma = ens.mixture();
    ev = detail::evaluate(rho, sigma);
    if (!ev.supported) continue;

    double f = ev.objective;
    detail::refine_ensemble(rho, ens, f);
    detail::prune(ens);
    sigma = ens.mixture();
    ev = detail::evaluate(rho, sigma);
  }

  rep.ensemble = ens;
  rep.sigma_star = DensityMatrix::normalized(ens.mixture());
  rep.duality_gap = gap;
  rep.iterations = it;
  rep.e_r = relative_entropy(target, rep.sigma_star);
  return rep;
}

struct ValidationRecord {
  double x = 0;
  double x_max = 0;
  double s_exact = 0;
  double e_r = 0;
  double duality_gap = 0;
  double trace_distance = 0;   // (1/2)||sigma* - sigma||_1
  double entropy_error = 0;    // |e_r - s_exact|
  double quadratic_term = 0;   // x^2 * Delta C
  long iterations = 0;
  bool converged = false;
  bool pass = false;
};

/// Runs the oracle on rho(x) = sigma + x delta and compares with sigma.
/// Passes when the trace distance is at most 1e-3 and |e_r - S| is at most
/// max(1e-4, 2 gap_tol).
inline ValidationRecord validate_formula(const BoundaryState& bs, double x, double gap_tol,
                                         std::uint64_t seed, long max_iter = 100000) {
  const NormalVector nv = normal_vector(bs);
  ValidationRecord rec;
  rec.x = x;
  rec.x_max = x_max_psd(bs, nv);
  if (!(x > 0.0 && x <= 0.9 * rec.x_max * (1.0 + 1e-12)))
    throw Error(ErrorCode::InvalidState, "x must lie in (0, 0.9 x_max]");
  const RayPoint rp = entangled_ray(bs, nv, x);
  OracleOptions opt;
  opt.gap_tol = gap_tol;
  opt.seed = seed;
  opt.max_iter = max_iter;
  const OracleReport rep = closest_separable(rp.rho, opt);
  rec.s_exact = rp.s_exact;
  rec.e_r = rep.e_r;
  rec.duality_gap = rep.duality_gap;
  rec.iterations = rep.iterations;
  rec.converged = rep.converged;
  rec.trace_distance = trace_distance(rep.sigma_star, bs.sigma);
  rec.entropy_error = std::abs(rep.e_r - rp.s_exact);
  rec.quadratic_term = x * x * nv.delta_c;
  rec.pass = rec.trace_distance <= 1e-3 && rec.entropy_error <= std::max(1e-4, 2.0 * gap_tol);
  return rec;
}

}  // namespace entangle
