#include <gtest/gtest.h>

#include <cmath>

#include "entangle/oracle.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace entangle;

namespace {

Mat4 random_hermitian(Rng& rng) {
  std::normal_distribution<double> n;
  Mat4 m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = cplx(n(rng), n(rng));
  return (m + m.adjoint()) / 2.0;
}

void expect_valid_ensemble(const SeparableEnsemble& ens) {
  double total = 0.0;
  for (std::size_t k = 0; k < ens.states.size(); ++k) {
    EXPECT_GE(ens.weights[k], 0.0);
    total += ens.weights[k];
    EXPECT_NEAR(ens.states[k].a.norm(), 1.0, 1e-12);
    EXPECT_NEAR(ens.states[k].b.norm(), 1.0, 1e-12);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  const Mat4 m = ens.mixture();
  EXPECT_NEAR(m.trace().real(), 1.0, 1e-12);
  EXPECT_GE(oracles::ppt_min(m), -1e-12);
  EXPECT_GE(oracles::eigenvalues(m)(0), -1e-12);
}

DensityMatrix bell_diagonal_state(double q0) {
  const double r = (1.0 - q0) / 3.0;
  return DensityMatrix::normalized(bell_diagonal(Real4(q0, r, r, r)));
}

}  // namespace

TEST(ProductLinearOracle, Identity) {
  const auto r = product_linear_oracle(Mat4::Identity(), 8, 0);
  EXPECT_NEAR(r.value, 1.0, 1e-14);
}

TEST(ProductLinearOracle, ComputationalDiagonal) {
  const auto r = product_linear_oracle(Real4(0, 1, 1, 1).cast<cplx>().asDiagonal(), 8, 0);
  EXPECT_NEAR(r.value, 0.0, 1e-14);
  EXPECT_NEAR(std::abs(r.state.ket()(0)), 1.0, 1e-7);
}

TEST(ProductLinearOracle, BellProjector) {
  const Vec4 p = phi_plus();
  const auto r = product_linear_oracle(-p * p.adjoint(), 8, 0);
  EXPECT_NEAR(r.value, -0.5, 1e-12);
}

// 1000 x 1000 Fibonacci-sphere product grid.
TEST(ProductLinearOracle, BelowQuasiRandomGrid) {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const Mat4 h = random_hermitian(rng);
    const auto r = product_linear_oracle(h, 8, 100 + t);
    EXPECT_LE(r.value, oracles::product_grid_min(h, 1000) + 1e-12);
    EXPECT_NEAR(r.value, detail::expectation(h, r.state.ket()), 1e-12);
  }
}

TEST(ClosestSeparable, SeparableInputHasZeroDistance) {
  Rng rng(3);
  int checked = 0;
  while (checked < 20) {
    const auto rho = random_density(rng);
    if (ppt_min_eigenvalue(rho) < 1e-3) continue;
    const auto rep = closest_separable(rho);
    EXPECT_LE(rep.e_r, 1e-6);
    EXPECT_TRUE(rep.converged);
    ++checked;
  }
}

TEST(ClosestSeparable, BellDiagonalClosedForm) {
  const auto rep = closest_separable(bell_diagonal_state(0.75));
  EXPECT_NEAR(rep.e_r, oracles::bell_diagonal_ree(0.75), 1e-6);
  EXPECT_NEAR(oracles::bell_diagonal_ree(0.75), 0.130812, 1e-6);
  const Mat4 expect = bell_diagonal(Real4(0.5, 1.0 / 6, 1.0 / 6, 1.0 / 6));
  EXPECT_LE(trace_distance(rep.sigma_star, DensityMatrix::normalized(expect)), 1e-3);
  EXPECT_TRUE(rep.converged);
  EXPECT_FALSE(rep.regularized);
}

TEST(ClosestSeparable, BellDiagonalFamily) {
  for (double q : {0.55, 0.6, 0.7, 0.8, 0.9, 0.95}) {
    const auto rep = closest_separable(bell_diagonal_state(q));
    EXPECT_NEAR(rep.e_r, oracles::bell_diagonal_ree(q), 2e-6) << q;
  }
}

TEST(ClosestSeparable, ReportInvariants) {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const auto rho = random_density(rng);
    const auto rep = closest_separable(rho);
    EXPECT_GE(rep.duality_gap, 0.0);
    EXPECT_LE(rep.duality_gap, 1e-6);
    EXPECT_NEAR(rep.e_r, relative_entropy(rho, rep.sigma_star), 1e-12);
    EXPECT_LE((rep.sigma_star.mat() - rep.ensemble.mixture()).norm(), 1e-12);
    expect_valid_ensemble(rep.ensemble);
    if (concurrence_signed(rho) <= 0.0) EXPECT_LE(rep.e_r, 1e-6);
  }
}

TEST(ClosestSeparable, ObjectiveNonIncreasing) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto rep = closest_separable(random_density(rng));
    ASSERT_FALSE(rep.objective.empty());
    for (std::size_t k = 1; k < rep.objective.size(); ++k)
      ASSERT_LE(rep.objective[k], rep.objective[k - 1] + 1e-13) << k;
  }
}

TEST(ClosestSeparable, SeedIntervalsOverlap) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto rho = random_density(rng);
    OracleOptions a, b;
    a.seed = 1;
    b.seed = 99;
    const auto ra = closest_separable(rho, a), rb = closest_separable(rho, b);
    EXPECT_LE(ra.e_r - ra.duality_gap, rb.e_r + 1e-12);
    EXPECT_LE(rb.e_r - rb.duality_gap, ra.e_r + 1e-12);
  }
}

TEST(ClosestSeparable, Deterministic) {
  Rng rng(7);
  const auto rho = random_density(rng);
  const auto a = closest_separable(rho), b = closest_separable(rho);
  EXPECT_EQ(a.e_r, b.e_r);
  EXPECT_EQ(a.sigma_star.mat(), b.sigma_star.mat());
}

TEST(ClosestSeparable, IterationLimitReturnsBestSoFar) {
  OracleOptions opt;
  opt.max_iter = 1;
  opt.gap_tol = 1e-14;
  const auto rep = closest_separable(bell_diagonal_state(0.9), opt);
  EXPECT_FALSE(rep.converged);
  EXPECT_LE(rep.iterations, 1);
  EXPECT_GT(rep.duality_gap, 0.0);
  EXPECT_GE(rep.e_r + 1e-12, oracles::bell_diagonal_ree(0.9));
}

TEST(ClosestSeparable, PureBellStateRegularized) {
  const auto rep = closest_separable(DensityMatrix::pure(phi_plus()));
  EXPECT_TRUE(rep.regularized);
  EXPECT_NEAR(rep.regularization_error, 1e-6 * std::log(4.0), 1e-18);
  EXPECT_NEAR(rep.e_r, std::log(2.0), 1e-3);
  // Every separable state with S = ln 2 is optimal here; both the classical
  // mixture and the isotropic state reach it.
  Mat4 classical = Mat4::Zero();
  classical(0, 0) = classical(3, 3) = 0.5;
  const auto pure = DensityMatrix::pure(phi_plus());
  EXPECT_NEAR(relative_entropy(pure, DensityMatrix::from_matrix(classical)), std::log(2.0), 1e-14);
  EXPECT_NEAR(relative_entropy(pure, rep.sigma_star), std::log(2.0), 1e-3);
}

TEST(ClosestSeparable, PureProductState) {
  const auto rep = closest_separable(DensityMatrix::pure(kron(Vec2(1, 0), Vec2(0, 1))));
  EXPECT_TRUE(rep.regularized);
  EXPECT_LE(rep.e_r, 1e-5);
}

TEST(ValidateFormula, BellDiagonalRay) {
  const auto bs = make_boundary_state(Mat2::Identity(), Mat2::Identity(), 0.2, 0.17, 0.13);
  const auto rec = validate_formula(bs, 0.5, 1e-6, 0);
  EXPECT_LE(rec.trace_distance, 1e-3);
  EXPECT_LE(rec.entropy_error, 1e-4);
  EXPECT_TRUE(rec.pass);
}

TEST(ValidateFormula, RandomBoundaryStates) {
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto bs = fixtures::random_boundary(rng);
    const auto rec = validate_formula(bs, 0.5 * x_max_psd(bs), 1e-6, t);
    EXPECT_TRUE(rec.pass) << rec.trace_distance << " " << rec.entropy_error;
    EXPECT_GE(rec.e_r + 1e-12, rec.s_exact - rec.duality_gap);
  }
}

TEST(ValidateFormula, SmallXQuadraticTerm) {
  const auto bs = make_boundary_state(Mat2::Identity(), Mat2::Identity(), 0.2, 0.17, 0.13);
  const auto rec = validate_formula(bs, 1e-3, 1e-6, 0);
  EXPECT_LE(std::abs(rec.e_r - rec.quadratic_term), 1e-6 + 1e-6);
}

TEST(ValidateFormula, SmallXMatchesHalfDeltaC) {
  Rng rng(9);
  for (int t = 0; t < 5; ++t) {
    const auto bs = fixtures::random_boundary(rng);
    const double x = 0.05 * x_max_psd(bs);
    const auto rec = validate_formula(bs, x, 1e-10, t);
    EXPECT_NEAR(rec.e_r / rec.quadratic_term, 0.5, 0.05);
    EXPECT_NEAR(rec.e_r, rec.s_exact, 1e-9);
  }
}

TEST(ValidateFormula, RejectsOutOfRangeX) {
  const auto bs = make_boundary_state(Mat2::Identity(), Mat2::Identity(), 0.2, 0.17, 0.13);
  EXPECT_THROW(validate_formula(bs, 0.0, 1e-6, 0), Error);
  EXPECT_THROW(validate_formula(bs, 0.95, 1e-6, 0), Error);
}
