#pragma once

#include <algorithm>
#include <random>

#include "entangle/boundary.hpp"

namespace fixtures {

// p uniform on {p_i > margin, p1 + p2 + p3 = 1/2}.
inline std::array<double, 3> random_simplex(entangle::Rng& rng, double margin = 1e-3) {
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (;;) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    if (a > margin && b - a > margin && 0.5 - b > margin) return {a, b - a, 0.5 - b};
  }
}

inline entangle::BoundaryState random_boundary(entangle::Rng& rng, double max_condition = 10.0) {
  const auto p = random_simplex(rng);
  const auto fa = entangle::random_filter(rng, max_condition);
  const auto fb = entangle::random_filter(rng, max_condition);
  return entangle::make_boundary_state(fa, fb, p[0], p[1], 0.5 - p[0] - p[1]);
}

inline entangle::Mat2 diag_filter(double t) {
  entangle::Mat2 f = entangle::Mat2::Zero();
  f(0, 0) = t;
  f(1, 1) = 1.0 / t;
  return f;
}

// R^Lambda = sqrt(Pi) U^dagger R^E U sqrt(Pi) with R^E in sigma's eigenbasis.
inline entangle::Mat4 wootters_representation(const entangle::BoundaryState& bs, const entangle::Mat4& rho) {
  const entangle::Mat4 re = bs.eigvecs.adjoint() * rho * bs.eigvecs;
  return bs.sqrt_pi * bs.u.adjoint() * re * bs.u * bs.sqrt_pi;
}

}  // namespace fixtures
