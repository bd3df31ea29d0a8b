#pragma once
// Adjoint equations of the linearized regularized problems.
//
// Everything is built from one discrete forward transport operator
//
//     L v = b . D_up v - nu Lap v,     b = D_pH(x, P + Du),
//
// with drift-upwinded first differences (an M-matrix with zero row sums).
// The elliptic adjoint is L^T sigma = delta; the parabolic adjoint runs
// backward in time with implicit Euler on  w sigma_s = -L^T sigma.
// Nonnegativity and mass conservation follow from the matrix structure;
// nothing is clipped.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/linear_solve.hpp"

namespace hjadj {

/// b = scale * D_pH(x, P + Du) with the central gradient of u.
inline VectorField transport_drift(const ScalarField &u, const HamiltonianModel &model,
                                   Vec2 P = Vec2::Zero(), double scale = 1.0) {
  const VectorField du = gradient(u);
  VectorField b(u.grid);
  for (int n = 0; n < u.grid.size(); ++n) {
    Vec2 p = du.at(n) + P;
    if (u.grid.dim() == 1) p[1] = 0.0;
    b.set(n, scale * model.DpH(u.grid.position(n), p));
  }
  return b;
}

/// The forward transport operator restricted to the unknown nodes (all nodes
/// on periodic grids, interior nodes on DirichletBox grids).
struct TransportOperator {
  Grid grid;
  VectorField drift;
  double nu = 0.0;
  SparseMatrix L;
  std::vector<int> unknowns;      // matrix row/col -> node
  std::vector<int> slot;          // node -> matrix row/col, -1 for boundary

  Eigen::VectorXd restrict(const ScalarField &f) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(unknowns.size()));
    for (std::size_t k = 0; k < unknowns.size(); ++k) out[k] = f.values[unknowns[k]];
    return out;
  }
  ScalarField extend(const Eigen::VectorXd &x) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.size());
    for (std::size_t k = 0; k < unknowns.size(); ++k) v[unknowns[k]] = x[k];
    return ScalarField(grid, std::move(v));
  }
};

inline TransportOperator assemble_transport(const VectorField &drift, double nu) {
  detail::require(nu > 0.0, "viscosity nu must be positive");
  const Grid &g = drift.grid;
  TransportOperator op{g, drift, nu, {}, {}, std::vector<int>(g.size(), -1)};
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) continue;
    op.slot[n] = static_cast<int>(op.unknowns.size());
    op.unknowns.push_back(n);
  }
  Triplets t;
  t.reserve(op.unknowns.size() * (1 + 2 * g.dim()));
  for (std::size_t row = 0; row < op.unknowns.size(); ++row) {
    const int n = op.unknowns[row];
    double diag = 0.0;
    // Boundary columns drop out: v = 0 there.
    auto couple = [&](int node, double c) {
      if (op.slot[node] >= 0) t.emplace_back(static_cast<int>(row), op.slot[node], c);
    };
    for (int a = 0; a < g.dim(); ++a) {
      const double h = g.spacing(a);
      const double b = drift.components[a][n];
      const double dif = nu / (h * h);
      const double up = std::abs(b) / h;
      couple(g.neighbor(n, a, -1), -dif - (b > 0.0 ? up : 0.0));
      couple(g.neighbor(n, a, +1), -dif - (b > 0.0 ? 0.0 : up));
      diag += 2.0 * dif + up;
    }
    t.emplace_back(static_cast<int>(row), static_cast<int>(row), diag);
  }
  const auto m = static_cast<Eigen::Index>(op.unknowns.size());
  op.L.resize(m, m);
  op.L.setFromTriplets(t.begin(), t.end());
  return op;
}

inline TransportOperator assemble_transport(const ScalarField &u, const HamiltonianModel &model,
                                            double nu, Vec2 P = Vec2::Zero()) {
  return assemble_transport(transport_drift(u, model, P), nu);
}

// ---------------------------------------------------------------------------
// Elliptic adjoint and the dual forward problem (DirichletBox grids)
// ---------------------------------------------------------------------------

/// Solves L v = f with v = 0 on the boundary.
inline ScalarField solve_dual_forward(const TransportOperator &op, const ScalarField &f) {
  detail::require(!op.grid.periodic(), "dual forward problem needs a DirichletBox grid");
  detail::require(f.grid == op.grid, "forcing lives on a different grid");
  auto v = solve_direct(op.L, op.restrict(f));
  if (!v) throw SingularSystem("dual forward system is singular");
  return op.extend(*v);
}

inline ScalarField solve_dual_forward(const ScalarField &u, const HamiltonianModel &model, double nu,
                                      const ScalarField &f) {
  return solve_dual_forward(assemble_transport(u, model, nu), f);
}

/// Solves L^T sigma = delta_{x0} with sigma = 0 on the boundary.
inline ScalarField solve_elliptic_adjoint(const TransportOperator &op, int x0) {
  detail::require(!op.grid.periodic(), "elliptic adjoint needs a DirichletBox grid");
  const ScalarField delta = discrete_delta(op.grid, x0);
  const SparseMatrix Lt = op.L.transpose();
  auto sigma = solve_direct(Lt, op.restrict(delta));
  if (!sigma) throw SingularSystem("elliptic adjoint system is singular");
  return op.extend(*sigma);
}

inline ScalarField solve_elliptic_adjoint(const ScalarField &u, const HamiltonianModel &model,
                                          double nu, int x0) {
  return solve_elliptic_adjoint(assemble_transport(u, model, nu), x0);
}

/// nu * sum over boundary faces of dS * (one-sided normal derivative).
/// Only the diffusive part; linear in nu.
inline double boundary_flux(const ScalarField &sigma, double nu) {
  const Grid &g = sigma.grid;
  detail::require(!g.periodic(), "boundary flux needs a DirichletBox grid");
  double flux = 0.0;
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) continue;
    for (int a = 0; a < g.dim(); ++a) {
      const double h = g.spacing(a);
      const double dS = g.cell_volume() / h;
      for (int s : {-1, +1}) {
        const int b = g.neighbor(n, a, s);
        if (g.is_boundary(b)) flux += nu * dS * (sigma[b] - sigma[n]) / h;
      }
    }
  }
  return flux;
}

/// Total discrete boundary flux: the diffusive part plus the upwind advective
/// coupling of L into boundary nodes. For sigma solving L^T sigma = delta this
/// equals -1 up to round-off (discrete divergence theorem).
inline double boundary_flux(const ScalarField &sigma, const TransportOperator &op) {
  double advective = 0.0;
  const double w = op.grid.cell_volume();
  for (int n = 0; n < op.grid.size(); ++n) {
    if (op.grid.is_boundary(n)) continue;
    for (int a = 0; a < op.grid.dim(); ++a) {
      const double b = op.drift.components[a][n];
      const int up = op.grid.neighbor(n, a, b > 0.0 ? -1 : +1);
      if (op.grid.is_boundary(up)) advective -= w * sigma[n] * std::abs(b) / op.grid.spacing(a);
    }
  }
  return boundary_flux(sigma, op.nu) + advective;
}

/// |integrate(sigma f) - v(x0)| from the adjoint and dual forward solves.
inline double duality_gap(const TransportOperator &op, int x0, const ScalarField &f) {
  const ScalarField sigma = solve_elliptic_adjoint(op, x0);
  const ScalarField v = solve_dual_forward(op, f);
  Eigen::VectorXd prod = sigma.values.cwiseProduct(f.values);
  return std::abs(integrate(ScalarField(op.grid, std::move(prod))) - v[x0]);
}

inline double duality_gap(const ScalarField &u, const HamiltonianModel &model, double nu, int x0,
                          const ScalarField &f) {
  return duality_gap(assemble_transport(u, model, nu), x0, f);
}

// ---------------------------------------------------------------------------
// Parabolic ("fake time") adjoint on periodic grids
// ---------------------------------------------------------------------------

struct AdjointConfig {
  double T = 1.0;
  int x0 = 0;
  /// 0 selects max(64, ceil(8 T |b|_inf / h)).
  int time_steps = 0;
  /// Coefficient of sigma_t: 2 for the epsilon problem, 2 theta for the theta scheme.
  double theta_weight = 2.0;
  /// Keep every k-th slice; 0 keeps at most ~512 slices.
  int store_every = 0;
};

struct AdjointTrajectory {
  /// Times of the stored slices, descending from T to 0.
  std::vector<double> times;
  std::vector<ScalarField> sigma;
  /// (t, mass) at every time step, descending in t.
  std::vector<std::pair<double, double>> mass_history;
  double min_value = 0.0;
  int time_steps = 0;
};

inline int default_time_steps(double T, double drift_sup, double h) {
  return std::max(64, static_cast<int>(std::ceil(8.0 * T * drift_sup / h)));
}

inline constexpr double kMassDriftLimit = 1e-8;

/// Integrates w sigma_s = -L^T sigma from sigma(T) = delta_{x0} backward to
/// t = 0 (s = T - t). `observer`, if set, sees every step (t, sigma).
inline AdjointTrajectory solve_parabolic_adjoint(
    const TransportOperator &op, const AdjointConfig &cfg,
    const std::function<void(double, const Eigen::VectorXd &)> &observer = {}) {
  const Grid &g = op.grid;
  detail::require(g.periodic(), "parabolic adjoint runs on a periodic grid");
  detail::require(cfg.T > 0.0, "horizon T must be positive");
  detail::require(cfg.theta_weight > 0.0, "theta_weight must be positive");

  double hmin = g.spacing(0);
  if (g.dim() == 2) hmin = std::min(hmin, g.spacing(1));
  const int steps = cfg.time_steps > 0 ? cfg.time_steps
                                       : default_time_steps(cfg.T, op.drift.sup_norm(), hmin);
  const int stride = cfg.store_every > 0 ? cfg.store_every : std::max(1, (steps + 511) / 512);
  const double ds = cfg.T / steps;
  const double a = cfg.theta_weight / ds;

  SparseMatrix M = op.L.transpose();
  for (int k = 0; k < M.rows(); ++k) M.coeffRef(k, k) += a;
  M.makeCompressed();
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(M);
  if (lu.info() != Eigen::Success) throw StabilityFailure("implicit adjoint step is singular");

  const double w = g.cell_volume();
  Eigen::VectorXd sigma = discrete_delta(g, cfg.x0).values;

  AdjointTrajectory traj;
  traj.time_steps = steps;
  traj.min_value = sigma.minCoeff();
  auto record = [&](int k) {
    const double t = cfg.T - k * ds;
    const double mass = sigma.sum() * w;
    traj.mass_history.emplace_back(t, mass);
    if (std::abs(mass - 1.0) > kMassDriftLimit)
      throw MassDrift("adjoint mass drifted to " + std::to_string(mass));
    if (k % stride == 0 || k == steps) {
      traj.times.push_back(t);
      traj.sigma.emplace_back(g, sigma);
    }
    if (observer) observer(t, sigma);
  };
  record(0);
  for (int k = 1; k <= steps; ++k) {
    const Eigen::VectorXd rhs = a * sigma;
    sigma = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !sigma.allFinite())
      throw StabilityFailure("implicit adjoint step diverged");
    traj.min_value = std::min(traj.min_value, sigma.minCoeff());
    record(k);
  }
  return traj;
}

inline AdjointTrajectory solve_parabolic_adjoint(const ScalarField &u, const HamiltonianModel &model,
                                                 double nu, const AdjointConfig &cfg,
                                                 Vec2 P = Vec2::Zero(), double drift_scale = 1.0) {
  return solve_parabolic_adjoint(assemble_transport(transport_drift(u, model, P, drift_scale), nu), cfg);
}

} // namespace hjadj
