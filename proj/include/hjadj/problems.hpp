#pragma once
// Ready-made problem families used by the CLI, the tests and the acceptance
// runner.

#include <cmath>
#include <numbers>
#include <string>

#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/solver.hpp"

namespace hjadj::problems {

/// Triangle wave |x| on the torus [-1/2, 1/2): a periodic forcing whose kink
/// at 0 makes the stationary solution develop a viscous layer.
inline ScalarField triangle_forcing(const Grid &g, double amplitude = 1.0) {
  return ScalarField::from_function(g, [amplitude](const Vec2 &x) { return amplitude * std::abs(x[0]); });
}

inline Grid torus_1d(int n) { return grid_1d(n, 1.0, Topology::Periodic, -0.5); }

/// u + |Du|^2 - 1 = eps Lap u + |x| on the torus [-1/2, 1/2).
inline ProblemFamily torus_eikonal(const Grid &g) {
  const HamiltonianModel model = make_builtin("eikonal");
  const ScalarField f = triangle_forcing(g);
  return [model, g, f](double eps) { return make_problem(model, g, 1.0, eps, Vec2::Zero(), f); };
}

inline Grid symmetric_interval(int n) { return grid_1d(n, 2.0, Topology::DirichletBox, -1.0); }
inline Grid unit_interval(int n) { return grid_1d(n, 1.0, Topology::DirichletBox, 0.0); }

/// H(Du) = eps Lap u on a DirichletBox grid with u = 0 on the boundary.
inline ProblemFamily dirichlet(const HamiltonianModel &model, const Grid &g) {
  return [model, g](double eps) { return make_problem(model, g, 0.0, eps); };
}

/// Slope of the viscosity solution c (1 - |x|) of (|p|^2 - 1)^2 - 2 = 0.
inline double quartic_slope() { return std::sqrt(1.0 + std::numbers::sqrt2); }

/// V(x) = amplitude cos(2 pi x).
inline HamiltonianModel cosine_potential(double amplitude = 1.0) {
  BuiltinParams p;
  p.potential = {FourierMode{{1, 0}, amplitude}};
  return make_builtin("quadratic_potential", p);
}

/// H(p) = p - 1: the drift counterexample on (0, 1).
inline HamiltonianModel drift_model() {
  BuiltinParams p;
  p.drift = Vec2(1.0, 0.0);
  p.offset = -1.0;
  return make_builtin("linear_drift", p);
}

/// H = -1: eps Lap v + 1 = 0 on (0, 1).
inline HamiltonianModel laplace_model() {
  BuiltinParams p;
  p.value = -1.0;
  return make_builtin("constant", p);
}

} // namespace hjadj::problems
