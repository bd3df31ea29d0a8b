#pragma once
// Damped Newton solver for the unified regularized equation
//
//     lambda u + H(x, P + Du) = nu Lap u + f
//
// on periodic grids, or on DirichletBox grids with u = 0 on the boundary.
// Du inside H is the central gradient; the Jacobian carries the linearized
// advection D_pH . D(du) with the same stencil.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/linear_solve.hpp"

namespace hjadj {

struct RegularizedProblem {
  HamiltonianModel model;
  Grid grid;
  double lambda = 0.0;
  double nu = 1.0;
  Vec2 P = Vec2::Zero();
  ScalarField forcing;

  bool dirichlet() const { return grid.topology() == Topology::DirichletBox; }

  void validate() const {
    detail::require(nu > 0.0, "viscosity nu must be positive");
    detail::require(lambda >= 0.0, "lambda must be nonnegative");
    detail::require(lambda > 0.0 || dirichlet(),
                    "lambda = 0 requires a DirichletBox grid");
    detail::require(forcing.grid == grid, "forcing lives on a different grid");
    detail::require(static_cast<bool>(model.H), "model has no evaluator");
  }
};

inline RegularizedProblem make_problem(HamiltonianModel model, const Grid &grid, double lambda,
                                       double nu, Vec2 P = Vec2::Zero(),
                                       std::optional<ScalarField> forcing = std::nullopt) {
  RegularizedProblem p{std::move(model), grid, lambda, nu, P,
                       forcing ? std::move(*forcing) : ScalarField::zeros(grid)};
  p.validate();
  return p;
}

struct SolveResult {
  ScalarField u;
  double residual_sup = INFINITY;
  int newton_iters = 0;
  bool converged = false;
  std::vector<double> residual_history;
};

namespace detail {

inline Vec2 shifted_gradient(const RegularizedProblem &pb, const Eigen::VectorXd &u, int n) {
  Vec2 p = pb.P;
  for (int a = 0; a < pb.grid.dim(); ++a) p[a] += central_derivative(pb.grid, u, n, a);
  if (pb.grid.dim() == 1) p[1] = 0.0;
  return p;
}

inline Eigen::VectorXd residual_values(const RegularizedProblem &pb, const Eigen::VectorXd &u) {
  const Grid &g = pb.grid;
  Eigen::VectorXd r(g.size());
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) {
      r[n] = u[n];
      continue;
    }
    double lap = 0.0;
    for (int a = 0; a < g.dim(); ++a) lap += second_derivative(g, u, n, a);
    const Vec2 x = g.position(n);
    r[n] = pb.lambda * u[n] + pb.model.H(x, shifted_gradient(pb, u, n)) - pb.nu * lap -
           pb.forcing.values[n];
  }
  return r;
}

inline SparseMatrix jacobian(const RegularizedProblem &pb, const Eigen::VectorXd &u) {
  const Grid &g = pb.grid;
  Triplets t;
  t.reserve(static_cast<std::size_t>(g.size()) * (1 + 4 * g.dim()));
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) {
      t.emplace_back(n, n, 1.0);
      continue;
    }
    double diag = pb.lambda;
    const Vec2 b = pb.model.DpH(g.position(n), shifted_gradient(pb, u, n));
    for (int a = 0; a < g.dim(); ++a) {
      const double h = g.spacing(a);
      const double adv = b[a] / (2.0 * h);
      const double dif = pb.nu / (h * h);
      t.emplace_back(n, g.neighbor(n, a, +1), adv - dif);
      t.emplace_back(n, g.neighbor(n, a, -1), -adv - dif);
      diag += 2.0 * dif;
    }
    t.emplace_back(n, n, diag);
  }
  SparseMatrix J(g.size(), g.size());
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

} // namespace detail

/// Pointwise R(u) = lambda u + H(x, P + Du) - nu Lap u - f; R = u on
/// DirichletBox boundary nodes.
inline ScalarField residual(const RegularizedProblem &problem, const ScalarField &u) {
  detail::require(u.grid == problem.grid, "field lives on a different grid");
  return ScalarField(problem.grid, detail::residual_values(problem, u.values));
}

/// Smallest residual sup-norm that double precision can resolve for `u`:
/// round-off in u amplified by the discrete operator.
inline double roundoff_floor(const RegularizedProblem &problem, const ScalarField &u) {
  const Grid &g = problem.grid;
  double amp = problem.lambda;
  double drift = 0.0;
  const VectorField du = gradient(u);
  for (int n = 0; n < g.size(); ++n) {
    Vec2 p = du.at(n) + problem.P;
    if (g.dim() == 1) p[1] = 0.0;
    drift = std::max(drift, problem.model.DpH(g.position(n), p).norm());
  }
  for (int a = 0; a < g.dim(); ++a) {
    const double h = g.spacing(a);
    amp += 4.0 * problem.nu / (h * h) + drift / h;
  }
  const double eps = std::numeric_limits<double>::epsilon();
  return 16.0 * eps * (std::max(1.0, u.sup_norm()) * amp + problem.forcing.sup_norm());
}

/// max(tol, roundoff_floor): the tolerance a solve can actually reach.
inline double attainable_tolerance(const RegularizedProblem &problem, const ScalarField &u,
                                   double tol) {
  return std::max(tol, roundoff_floor(problem, u));
}

inline LinearMethod default_linear_method(const Grid &g) {
  return g.dim() == 1 ? LinearMethod::Direct : LinearMethod::Krylov;
}

/// Damped Newton with backtracking on ||R||_inf (factor 1/2, minimum step
/// 2^-20). Returns the best iterate with converged = false when `max_iters`
/// runs out. Iteration also stops once the residual sits at the round-off
/// floor and has not improved for three steps.
inline SolveResult solve(const RegularizedProblem &problem, const ScalarField &init, double tol,
                         int max_iters) {
  problem.validate();
  detail::require(init.grid == problem.grid, "initial guess lives on a different grid");
  detail::require(tol > 0.0, "tolerance must be positive");
  detail::require(max_iters >= 0, "max_iters must be nonnegative");

  const Grid &g = problem.grid;
  const LinearMethod method = default_linear_method(g);
  constexpr double kMinStep = 1.0 / (1 << 20);

  Eigen::VectorXd u = init.values;
  for (int n : g.boundary_nodes()) u[n] = 0.0;
  Eigen::VectorXd r = detail::residual_values(problem, u);
  double rn = r.cwiseAbs().maxCoeff();

  SolveResult out;
  out.residual_history.push_back(rn);
  Eigen::VectorXd best = u;
  double best_rn = rn;
  int stalled = 0;
  int it = 0;
  for (; it < max_iters && rn > tol; ++it) {
    const SparseMatrix J = detail::jacobian(problem, u);
    auto step = solve_linear(J, -r, method);
    if (!step) throw SingularLinearization("Newton linearization could not be solved");

    double alpha = 1.0;
    Eigen::VectorXd trial, rt;
    double rtn = INFINITY;
    while (true) {
      trial = u + alpha * *step;
      rt = detail::residual_values(problem, trial);
      rtn = rt.allFinite() ? rt.cwiseAbs().maxCoeff() : INFINITY;
      if (rtn < (1.0 - 1e-4 * alpha) * rn || alpha <= kMinStep) break;
      alpha *= 0.5;
    }
    if (!std::isfinite(rtn)) break;
    u = std::move(trial);
    r = std::move(rt);
    rn = rtn;
    out.residual_history.push_back(rn);
    if (rn < 0.5 * best_rn) stalled = 0;
    else ++stalled;
    if (rn < best_rn) {
      best_rn = rn;
      best = u;
    }
    if (stalled >= 3 && best_rn <= 10.0 * roundoff_floor(problem, ScalarField(g, best))) {
      ++it;
      break;
    }
  }
  out.u = ScalarField(g, best);
  out.residual_sup = best_rn;
  out.newton_iters = it;
  out.converged = best_rn <= tol;
  return out;
}

inline SolveResult solve(const RegularizedProblem &problem, double tol = 1e-10, int max_iters = 50) {
  return solve(problem, ScalarField::zeros(problem.grid), tol, max_iters);
}

/// A one-parameter family of problems, e.g. epsilon -> (lambda=1, nu=epsilon).
using ProblemFamily = std::function<RegularizedProblem(double)>;

/// Halving path start, start/2, ... ending exactly at target.
inline std::vector<double> continuation_path(double start, double target) {
  detail::require(target > 0.0 && start > 0.0, "continuation parameters must be positive");
  std::vector<double> path;
  for (double s = start; s > target * 1.5; s *= 0.5) path.push_back(s);
  path.push_back(target);
  return path;
}

/// Solves family(target) by warm-started continuation from family(start).
inline SolveResult solve_continued(const ProblemFamily &family, double target, double start,
                                   double tol = 1e-10, int max_iters = 50,
                                   std::optional<ScalarField> init = std::nullopt) {
  SolveResult last;
  bool first = true;
  for (double s : continuation_path(std::max(start, target), target)) {
    const RegularizedProblem pb = family(s);
    const ScalarField guess = first ? (init ? *init : ScalarField::zeros(pb.grid)) : last.u;
    last = solve(pb, guess, attainable_tolerance(pb, guess, tol), max_iters);
    first = false;
  }
  return last;
}

/// Exact nodal closed forms on the unit interval:
///   laplace_unit: (x - x^2) / (2 eps)           solves eps v'' + 1 = 0
///   drift:        x - expm1(x/eps)/expm1(1/eps)  solves v' = eps v'' + 1
inline ScalarField closed_form_reference(const std::string &name, double epsilon, const Grid &grid) {
  detail::require(epsilon > 0.0, "epsilon must be positive");
  detail::require(grid.dim() == 1 && !grid.periodic() && grid.origin(0) == 0.0 &&
                      grid.length(0) == 1.0,
                  "closed forms live on a 1D DirichletBox over (0,1)");
  if (name == "laplace_unit") {
    return ScalarField::from_function(
        grid, [epsilon](const Vec2 &x) { return (x[0] - x[0] * x[0]) / (2.0 * epsilon); });
  }
  if (name == "drift") {
    return ScalarField::from_function(grid, [epsilon](const Vec2 &x) {
      // expm1(x/e)/expm1(1/e) rewritten as e^{(x-1)/e} (1-e^{-x/e}) / (1-e^{-1/e})
      const double t = x[0];
      const double ratio =
          std::exp((t - 1.0) / epsilon) * (-std::expm1(-t / epsilon)) / (-std::expm1(-1.0 / epsilon));
      return t - ratio;
    });
  }
  throw InvalidArgument("unknown closed form: " + name);
}

struct AprioriBounds {
  double sup_u = 0.0;
  double sup_grad = 0.0;
};

inline AprioriBounds apriori_bounds_check(const SolveResult &result, const RegularizedProblem &problem) {
  detail::require(result.u.grid == problem.grid, "result and problem grids differ");
  return {result.u.sup_norm(), gradient(result.u).sup_norm()};
}

} // namespace hjadj
