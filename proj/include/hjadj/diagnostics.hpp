#pragma once
// Adjoint-weighted integrals, sensitivities, supersolution and scaling
// checks, gradient-identity residuals, and log-log rate fits.

#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hjadj/adjoint.hpp"
#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/solver.hpp"

namespace hjadj {

// ---------------------------------------------------------------------------
// Rate fits
// ---------------------------------------------------------------------------

struct RateFit {
  std::vector<double> parameters;
  std::vector<double> errors;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares on (log param, log error).
inline RateFit fit_rate(const std::vector<double> &params, const std::vector<double> &errors) {
  detail::require(params.size() == errors.size(), "parameter and error lists differ in length");
  detail::require(params.size() >= 4, "a rate fit needs at least four points");
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::require(params[i] > 0.0 && std::isfinite(params[i]), "parameters must be positive");
    detail::require(errors[i] > 0.0 && std::isfinite(errors[i]), "errors must be positive");
    if (i > 0) detail::require(params[i] < params[i - 1], "parameters must strictly decrease");
  }
  const auto n = static_cast<double>(params.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    mx += std::log(params[i]);
    my += std::log(errors[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double dx = std::log(params[i]) - mx, dy = std::log(errors[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit{params, errors, sxy / sxx, 0.0, 1.0};
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) fit.r_squared = (sxy * sxy) / (sxx * syy);
  return fit;
}

inline void write_rate_fit(std::ostream &os, const RateFit &fit) {
  auto list = [&os](const std::vector<double> &v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
    os << ']';
  };
  os << std::setprecision(17);
  os << "{\n  \"slope\": " << fit.slope << ",\n  \"intercept\": " << fit.intercept
     << ",\n  \"r_squared\": " << fit.r_squared << ",\n  \"parameters\": ";
  list(fit.parameters);
  os << ",\n  \"errors\": ";
  list(fit.errors);
  os << "\n}\n";
}

struct SweepRow {
  double param = 0.0;
  double error = 0.0;
  double sup_u = 0.0;
  double sup_grad = 0.0;
  double hessian_integral = 0.0;
};

inline void write_sweep_csv(std::ostream &os, const std::vector<SweepRow> &rows) {
  os << "param,error,sup_u,sup_grad,hessian_integral\n" << std::setprecision(17);
  for (const auto &r : rows)
    os << r.param << ',' << r.error << ',' << r.sup_u << ',' << r.sup_grad << ','
       << r.hessian_integral << '\n';
}

// ---------------------------------------------------------------------------
// Weighted Hessian integrals
// ---------------------------------------------------------------------------

/// sum_nodes weight * nu |D^2 u|^2 sigma.
inline double weighted_hessian_integral_elliptic(const ScalarField &u, const ScalarField &sigma,
                                                 double nu) {
  detail::require(u.grid == sigma.grid, "u and sigma live on different grids");
  const ScalarField h2 = hessian_norm_sq(u);
  return nu * integrate(ScalarField(u.grid, h2.values.cwiseProduct(sigma.values)));
}

/// Trapezoid in time over the stored slices of int nu e^t |D^2 u|^2 sigma dx.
inline double weighted_hessian_integral_parabolic(const ScalarField &u,
                                                  const AdjointTrajectory &traj, double nu) {
  detail::require(traj.sigma.size() == traj.times.size() && traj.sigma.size() >= 2,
                  "trajectory needs at least two slices");
  std::vector<double> f;
  f.reserve(traj.times.size());
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    f.push_back(std::exp(traj.times[k]) * weighted_hessian_integral_elliptic(u, traj.sigma[k], nu));
  double total = 0.0;
  for (std::size_t k = 1; k < f.size(); ++k)
    total += 0.5 * (f[k] + f[k - 1]) * (traj.times[k - 1] - traj.times[k]);
  return total;
}

/// Same integral accumulated over every implicit step while the adjoint runs,
/// without storing the trajectory.
inline double weighted_hessian_integral_parabolic(const ScalarField &u,
                                                  const TransportOperator &op,
                                                  AdjointConfig cfg) {
  detail::require(u.grid == op.grid, "u and operator live on different grids");
  const Eigen::VectorXd h2 = op.nu * hessian_norm_sq(u).values * u.grid.cell_volume();
  double total = 0.0, prev_t = 0.0, prev_f = 0.0;
  bool first = true;
  cfg.store_every = std::numeric_limits<int>::max();
  solve_parabolic_adjoint(op, cfg, [&](double t, const Eigen::VectorXd &sigma) {
    const double f = std::exp(t) * h2.dot(sigma);
    if (!first) total += 0.5 * (f + prev_f) * (prev_t - t);
    first = false;
    prev_t = t;
    prev_f = f;
  });
  return total;
}

// ---------------------------------------------------------------------------
// Gradient identity
// ---------------------------------------------------------------------------

/// Pointwise  2 lambda w + D_pH.Dw + D_xH.Du - nu Lap w + nu |D^2u|^2 - Df.Du
/// with w = |Du|^2/2. It vanishes for exact solutions of
/// lambda u + H(x, P + Du) = nu Lap u + f. Evaluated where the stencil of w
/// stays off DirichletBox boundary nodes (their one-sided gradients are only
/// accurate enough for Du, not for Lap w); 0 elsewhere.
inline ScalarField gradient_identity_field(const ScalarField &u, const HamiltonianModel &model,
                                           double lambda, double nu, Vec2 P = Vec2::Zero(),
                                           const std::optional<ScalarField> &forcing = std::nullopt) {
  const Grid &g = u.grid;
  const VectorField du = gradient(u);
  Eigen::VectorXd w(g.size());
  for (int n = 0; n < g.size(); ++n) w[n] = 0.5 * du.at(n).squaredNorm();
  const ScalarField wf(g, w);
  const VectorField dw = gradient(wf);
  const ScalarField lap_w = laplacian(wf);
  const ScalarField h2 = hessian_norm_sq(u);
  std::optional<VectorField> df;
  if (forcing) {
    detail::require(forcing->grid == g, "forcing lives on a different grid");
    df = gradient(*forcing);
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  auto near_boundary = [&g](int n) {
    if (g.is_boundary(n)) return true;
    for (int a = 0; a < g.dim(); ++a)
      if (g.is_boundary(g.neighbor(n, a, -1)) || g.is_boundary(g.neighbor(n, a, +1))) return true;
    return false;
  };
  for (int n = 0; n < g.size(); ++n) {
    if (!g.periodic() && near_boundary(n)) continue;
    const Vec2 x = g.position(n);
    Vec2 p = du.at(n) + P;
    if (g.dim() == 1) p[1] = 0.0;
    double r = 2.0 * lambda * w[n] + model.DpH(x, p).dot(dw.at(n)) +
               model.DxH(x, p).dot(du.at(n)) - nu * lap_w[n] + nu * h2[n];
    if (df) r -= df->at(n).dot(du.at(n));
    out[n] = r;
  }
  return ScalarField(g, std::move(out));
}

inline double gradient_identity_residual(const ScalarField &u, const HamiltonianModel &model,
                                         double lambda, double nu, Vec2 P = Vec2::Zero(),
                                         const std::optional<ScalarField> &forcing = std::nullopt) {
  return gradient_identity_field(u, model, lambda, nu, P, forcing).sup_norm();
}

inline double gradient_identity_residual(const RegularizedProblem &pb, const ScalarField &u) {
  return gradient_identity_residual(u, pb.model, pb.lambda, pb.nu, pb.P, pb.forcing);
}

// ---------------------------------------------------------------------------
// Sensitivity
// ---------------------------------------------------------------------------

/// Maps (parameter, solution) to the quantity being differentiated.
using FieldTransform = std::function<ScalarField(double, const ScalarField &)>;

/// sup |q(eps + h) - q(eps - h)| / (2h), q = transform(eps, u^eps); both solves
/// are warm-started from `init` (or from a continued solve at eps).
inline double epsilon_sensitivity(const ProblemFamily &family, double epsilon, double h_eps,
                                  const FieldTransform &transform = {},
                                  std::optional<ScalarField> init = std::nullopt,
                                  double tol = 1e-10, int max_iters = 50) {
  detail::require(epsilon > 0.0 && h_eps > 0.0, "epsilon and h_eps must be positive");
  detail::require(h_eps <= epsilon / 10.0 * (1.0 + 1e-12), "h_eps must not exceed epsilon/10");
  if (!init) init = solve_continued(family, epsilon, 8.0 * epsilon, tol, max_iters).u;

  auto quantity = [&](double e) {
    const RegularizedProblem pb = family(e);
    const SolveResult r = solve(pb, *init, attainable_tolerance(pb, *init, tol), max_iters);
    if (!r.converged) throw Error("sensitivity solve did not converge");
    return transform ? transform(e, r.u) : r.u;
  };
  const ScalarField up = quantity(epsilon + h_eps);
  const ScalarField dn = quantity(epsilon - h_eps);
  return (up.values - dn.values).cwiseAbs().maxCoeff() / (2.0 * h_eps);
}

// ---------------------------------------------------------------------------
// Supersolution construction
// ---------------------------------------------------------------------------

struct SupersolutionParams {
  double alpha = 0.0;
  double beta = 1.0;
  double gamma = 1.0;
  double delta = 1.0;
  double k = 1.0;
  double M = 0.0;

  void validate() const {
    detail::require(alpha + beta > 0.0, "alpha + beta must be positive");
    detail::require(delta > 0.0, "delta must be positive");
    detail::require(std::abs((2.0 * alpha + beta) / (alpha + beta) - gamma) <= 1e-12,
                    "(2 alpha + beta)/(alpha + beta) must equal gamma");
    detail::require(std::abs(k - 1.0 / ((alpha + beta) * delta)) <= 1e-12 * std::abs(k),
                    "k must equal 1/((alpha + beta) delta)");
  }
};

/// Solves the two-parameter constraint with alpha + beta = 1 (gamma in [1, 2]).
inline SupersolutionParams make_supersolution_params(double gamma, double delta, double M = 0.0) {
  detail::require(gamma >= 1.0 && gamma <= 2.0, "alpha, beta >= 0 needs gamma in [1, 2]");
  SupersolutionParams p{gamma - 1.0, 2.0 - gamma, gamma, delta, 1.0 / delta, M};
  p.validate();
  return p;
}

/// z = alpha x.Du + beta u.
inline ScalarField supersolution_core(const ScalarField &u, double alpha, double beta) {
  const VectorField du = gradient(u);
  Eigen::VectorXd z(u.grid.size());
  for (int n = 0; n < u.grid.size(); ++n)
    z[n] = alpha * u.grid.position(n).dot(du.at(n)) + beta * u[n];
  return ScalarField(u.grid, std::move(z));
}

/// Smallest M >= 0 making y = k z + M nonnegative on the boundary.
inline double boundary_lift(const ScalarField &u, const SupersolutionParams &params) {
  const ScalarField z = supersolution_core(u, params.alpha, params.beta);
  double lift = 0.0;
  for (int n : u.grid.boundary_nodes()) lift = std::max(lift, -params.k * z[n]);
  return lift;
}

inline ScalarField supersolution_field(const ScalarField &u, const SupersolutionParams &params) {
  params.validate();
  ScalarField y = supersolution_core(u, params.alpha, params.beta);
  y.values = (params.k * y.values).array() + params.M;
  return y;
}

/// 10 h (1 + max |u''|) with h the coarsest spacing.
inline double supersolution_tolerance(const ScalarField &u) {
  double h = u.grid.spacing(0);
  if (u.grid.dim() == 2) h = std::max(h, u.grid.spacing(1));
  return 10.0 * h * (1.0 + std::sqrt(hessian_norm_sq(u).max()));
}

struct ExcessCheck {
  double min_excess = 0.0;
  bool passed = false;
};

/// min over interior nodes of DH(Du).Dy - nu Lap y - 1.
inline ExcessCheck supersolution_check(const ScalarField &u, const HamiltonianModel &model,
                                       const SupersolutionParams &params, double nu) {
  detail::require(!u.grid.periodic(), "supersolution check needs a DirichletBox grid");
  const ScalarField y = supersolution_field(u, params);
  const VectorField du = gradient(u);
  const VectorField dy = gradient(y);
  const ScalarField lap = laplacian(y);
  double lo = INFINITY;
  for (int n : u.grid.interior_nodes()) {
    const Vec2 x = u.grid.position(n);
    lo = std::min(lo, model.DpH(x, du.at(n)).dot(dy.at(n)) - nu * lap[n] - 1.0);
  }
  return {lo, lo >= -supersolution_tolerance(u)};
}

/// Solves the f = 1 dual problem and checks 0 <= v <= y at every node.
inline bool bounded_dual_check(const ScalarField &u, const HamiltonianModel &model, double nu,
                               const SupersolutionParams &params) {
  const ScalarField v = solve_dual_forward(u, model, nu, ScalarField::constant(u.grid, 1.0));
  const ScalarField y = supersolution_field(u, params);
  const double tol = supersolution_tolerance(u);
  for (int n = 0; n < u.grid.size(); ++n) {
    if (v[n] < -1e-12) return false;
    if (v[n] > y[n] + tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Scaling perturbation
// ---------------------------------------------------------------------------

struct ScalingParams {
  double theta = 0.0;
  double s = 0.0;
  double t = 0.0;
  double gamma = 1.0;
  double M = 0.0;

  void validate() const {
    detail::require(theta > 0.0, "theta must be positive");
    const double q = 1.0 + theta;
    detail::require(std::abs(t - (std::pow(q, gamma) - q)) <= 1e-12, "t = (1+theta)^gamma - (1+theta)");
    detail::require(std::abs(s - (2.0 * q - std::pow(q, gamma))) <= 1e-12,
                    "s = 2(1+theta) - (1+theta)^gamma");
    detail::require(std::abs(std::pow(s + t, gamma) - (s + 2.0 * t)) <= 1e-10,
                    "(s+t)^gamma must equal s + 2t");
  }
};

inline ScalingParams make_scaling_params(double theta, double gamma, double M) {
  const double q = 1.0 + theta;
  ScalingParams p{theta, 2.0 * q - std::pow(q, gamma), std::pow(q, gamma) - q, gamma, M};
  p.validate();
  return p;
}

/// z = s v + t (x.Dv + M); min over interior nodes of H(Dz) - nu Lap z.
inline ExcessCheck appendix_scaling_check(const ScalarField &v, const HamiltonianModel &model,
                                          double nu, double theta, double gamma, double M) {
  detail::require(!v.grid.periodic(), "scaling check needs a DirichletBox grid");
  detail::require(theta > 0.0 && theta <= 0.1, "theta must lie in (0, 0.1]");
  const ScalingParams sp = make_scaling_params(theta, gamma, M);
  ScalarField z = supersolution_core(v, sp.t, sp.s);
  z.values = z.values.array() + sp.t * sp.M;
  const VectorField dz = gradient(z);
  const ScalarField lap = laplacian(z);
  double lo = INFINITY;
  for (int n : v.grid.interior_nodes())
    lo = std::min(lo, model.H(v.grid.position(n), dz.at(n)) - nu * lap[n]);
  return {lo, lo > 0.0};
}

} // namespace hjadj
