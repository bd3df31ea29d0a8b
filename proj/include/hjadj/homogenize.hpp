#pragma once
// Effective Hamiltonians from the theta scheme
//     theta z + H(P + Dz, y) = theta^2 Lap z
// and from the regularized ergodic approximation
//     eps v + H(P + Dv, y) = delta Lap v,
// with -theta mean(z) and -eps mean(v) as estimates of Hbar(P).

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hjadj/diagnostics.hpp"
#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/solver.hpp"

namespace hjadj {

inline double oscillation(const ScalarField &z) { return z.max() - z.min(); }

inline double field_mean(const ScalarField &z) {
  double vol = 0.0;
  for (int n = 0; n < z.grid.size(); ++n) vol += z.grid.weight(n);
  return integrate(z) / vol;
}

inline ProblemFamily cell_family(const HamiltonianModel &model, Vec2 P, const Grid &grid) {
  detail::require(grid.periodic(), "cell problems live on a periodic grid");
  return [model, P, grid](double theta) {
    detail::require(theta > 0.0, "theta must be positive");
    return make_problem(model, grid, theta, theta * theta, P);
  };
}

/// Solves the theta scheme; without `init` it continues from theta = 0.2.
inline SolveResult solve_cell(const HamiltonianModel &model, Vec2 P, double theta, const Grid &grid,
                              std::optional<ScalarField> init = std::nullopt, double tol = 1e-10,
                              int max_iters = 50) {
  detail::require(theta > 0.0, "theta must be positive");
  const ProblemFamily family = cell_family(model, P, grid);
  if (init) {
    const RegularizedProblem pb = family(theta);
    return solve(pb, *init, attainable_tolerance(pb, *init, tol), max_iters);
  }
  return solve_continued(family, theta, std::max(theta, 0.2), tol, max_iters);
}

inline SolveResult ergodic_approx(const HamiltonianModel &model, Vec2 P, double eps, double delta,
                                  const Grid &grid, std::optional<ScalarField> init = std::nullopt,
                                  double tol = 1e-10, int max_iters = 50) {
  detail::require(grid.periodic(), "the ergodic problem lives on a periodic grid");
  detail::require(eps > 0.0 && delta > 0.0, "eps and delta must be positive");
  const RegularizedProblem pb = make_problem(model, grid, eps, delta, P);
  const ScalarField guess = init ? *init : ScalarField::zeros(grid);
  SolveResult r = solve(pb, guess, attainable_tolerance(pb, guess, tol), max_iters);
  if (!r.converged && !init) {
    const ProblemFamily family = [&](double d) { return make_problem(model, grid, eps, d, P); };
    r = solve_continued(family, delta, std::max(delta, 0.04), tol, max_iters);
  }
  return r;
}

struct EffectiveHamiltonianEstimate {
  Vec2 P = Vec2::Zero();
  double theta = 0.0;
  double estimate = 0.0;
  double oscillation = 0.0;
  SolveResult solve;
};

inline EffectiveHamiltonianEstimate estimate_hbar(const HamiltonianModel &model, Vec2 P, double theta,
                                                  const Grid &grid,
                                                  std::optional<ScalarField> init = std::nullopt) {
  const bool warm = init.has_value();
  SolveResult r = solve_cell(model, P, theta, grid, std::move(init));
  // A warm start can leave Newton's basin near the flat part of Hbar.
  if (!r.converged && warm) r = solve_cell(model, P, theta, grid);
  if (!r.converged) throw Error("cell problem did not converge at theta = " + std::to_string(theta));
  const double est = -theta * field_mean(r.u);
  const double osc = oscillation(r.u);
  return {P, theta, est, osc, std::move(r)};
}

/// Estimates at each theta, warm-starting every solve from the previous one.
inline std::vector<EffectiveHamiltonianEstimate>
theta_sweep(const HamiltonianModel &model, Vec2 P, const std::vector<double> &thetas, const Grid &grid) {
  std::vector<EffectiveHamiltonianEstimate> out;
  std::optional<ScalarField> warm;
  double prev = 0.0;
  for (double th : thetas) {
    if (warm) warm->values *= prev / th; // theta z is the quantity of order one
    out.push_back(estimate_hbar(model, P, th, grid, warm));
    warm = out.back().solve.u;
    prev = th;
  }
  return out;
}

struct HbarOracle {
  Vec2 P = Vec2::Zero();
  double value = 0.0;
  std::string method;
  double r_squared = 1.0;
};

struct OracleOptions {
  double theta0 = 0.05;
  int refinement = 4;
  double min_r_squared = 0.99;
};

inline Grid refine_grid(const Grid &g, int factor) {
  GridSpec spec;
  spec.dim = g.dim();
  spec.topology = g.topology();
  for (int a = 0; a < g.dim(); ++a) {
    spec.counts[a] = g.periodic() ? g.count(a) * factor : (g.count(a) - 1) * factor + 1;
    spec.lengths[a] = g.length(a);
    spec.origin[a] = g.origin(a);
  }
  return build_grid(spec);
}

/// Affine extrapolation -theta mean(z) = Hbar + a theta over theta0 / {1,2,4,8}
/// on a grid `refinement` times finer than `grid`. Throws OracleUnreliable when
/// the fit's r^2 is below the threshold; estimates that agree to round-off
/// are accepted as exact.
inline HbarOracle hbar_oracle(const HamiltonianModel &model, Vec2 P, const Grid &grid,
                              const OracleOptions &opt = {}) {
  const int dim = grid.dim();
  if (!check_coercivity(model, {1.0, 2.0, 4.0, 8.0, 16.0}, dim))
    throw InvalidArgument("hbar oracle needs a coercive Hamiltonian");
  detail::require(opt.theta0 > 0.0 && opt.refinement >= 1, "invalid oracle options");
  const Grid fine = refine_grid(grid, opt.refinement);
  const std::vector<double> thetas{opt.theta0, opt.theta0 / 2, opt.theta0 / 4, opt.theta0 / 8};
  const auto est = theta_sweep(model, P, thetas, fine);

  double mx = 0, my = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    mx += thetas[i];
    my += est[i].estimate;
  }
  mx /= thetas.size();
  my /= thetas.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double dx = thetas[i] - mx, dy = est[i].estimate - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const double slope = sxy / sxx;
  HbarOracle oracle{P, my - slope * mx, "", 1.0};
  const bool flat = std::sqrt(syy) <= 1e-12 * std::max(1.0, std::abs(my));
  if (!flat) oracle.r_squared = sxy * sxy / (sxx * syy);

  std::ostringstream m;
  m << std::setprecision(17) << "affine extrapolation of -theta*mean(z) in theta; theta = {";
  for (std::size_t i = 0; i < thetas.size(); ++i) m << (i ? ", " : "") << thetas[i];
  m << "}; nodes per axis = " << fine.count(0) << "; nu = theta^2; slope = " << (flat ? 0.0 : slope)
    << "; r^2 = " << oracle.r_squared << (flat ? " (estimates identical)" : "");
  oracle.method = m.str();
  if (flat) oracle.value = my;
  else if (oracle.r_squared < opt.min_r_squared)
    throw OracleUnreliable("hbar oracle fit rejected: " + oracle.method);
  return oracle;
}

/// Errors sup |theta z + hbar| along the theta list.
struct ThetaRate {
  RateFit fit;
  /// All errors at round-off: the scheme is exact and no slope is fitted.
  bool exact = false;
  std::vector<EffectiveHamiltonianEstimate> estimates;
};

inline ThetaRate rate_vs_theta(const HamiltonianModel &model, Vec2 P, const std::vector<double> &thetas,
                               const Grid &grid, double hbar) {
  ThetaRate out;
  out.estimates = theta_sweep(model, P, thetas, grid);
  std::vector<double> errors;
  for (const auto &e : out.estimates) {
    const Eigen::VectorXd tz = e.theta * e.solve.u.values;
    errors.push_back((tz.array() + hbar).abs().maxCoeff());
  }
  const double floor = 1e-12 * std::max(1.0, std::abs(hbar));
  out.exact = std::all_of(errors.begin(), errors.end(), [floor](double e) { return e <= floor; });
  if (out.exact) out.fit = RateFit{thetas, errors, 0.0, 0.0, 1.0};
  else out.fit = fit_rate(thetas, errors);
  return out;
}

inline ThetaRate rate_vs_theta(const HamiltonianModel &model, Vec2 P, const std::vector<double> &thetas,
                               const Grid &grid) {
  return rate_vs_theta(model, P, thetas, grid, hbar_oracle(model, P, grid).value);
}

inline void write_hbar_table(std::ostream &os, int dim,
                             const std::vector<EffectiveHamiltonianEstimate> &rows, double oracle) {
  os << (dim == 2 ? "P1,P2" : "P1") << ",theta,estimate,error_vs_oracle\n" << std::setprecision(17);
  for (const auto &r : rows) {
    os << r.P[0] << ',';
    if (dim == 2) os << r.P[1] << ',';
    os << r.theta << ',' << r.estimate << ',' << std::abs(r.estimate - oracle) << '\n';
  }
}

} // namespace hjadj
