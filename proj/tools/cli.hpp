#pragma once
// Experiment runner behind the `hjadj` executable.
//
//   hjadj solve   --problem dirichlet --model eikonal --eps 0.05
//   hjadj adjoint --problem stationary --model eikonal --forcing triangle --eps 0.05
//   hjadj sweep   --problem dirichlet --model eikonal --eps 0.2,0.1,0.05,0.025,0.0125
//   hjadj hbar    --model quadratic_potential --potential 1:1 --P 0,1,2
//   hjadj check   --model quartic1d --gamma 2 --delta 2
//
// Options may also come from an INI file (--config); sections are named after
// subcommands and flags on the command line win. Exit codes: 0 success,
// 1 invalid configuration, 2 solver non-convergence, 3 failed property check.

#include <atomic>
#include <cmath>
#include <iomanip>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hjadj/hjadj.hpp"

namespace hjadj::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNonConvergence = 2;
inline constexpr int kExitPropertyFailure = 3;

struct NonConvergence : Error {
  using Error::Error;
};

struct ModelOptions {
  std::string name = "eikonal";
  double level = 1.0;
  std::string potential;
  std::vector<double> drift{1.0};
  double offset = -1.0;
  double value = 0.0;
};

struct GridOptions {
  int dim = 1;
  int n = 0;
  double length = 0.0;
  double origin = NAN;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iters = 50;
};

struct Common {
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// ---------------------------------------------------------------------------
// Option plumbing
// ---------------------------------------------------------------------------

inline void add_model_options(CLI::App *app, ModelOptions &m) {
  app->add_option("--model", m.name, "quartic1d | eikonal | quadratic_potential | linear_drift | constant | none");
  app->add_option("--level", m.level, "eikonal level: H = |p|^2 - level");
  app->add_option("--potential", m.potential, "cosine modes k:a or k1/k2:a, comma separated");
  app->add_option("--drift", m.drift, "linear_drift vector b")->delimiter(',');
  app->add_option("--offset", m.offset, "linear_drift constant c");
  app->add_option("--value", m.value, "constant model value");
}

inline void add_grid_options(CLI::App *app, GridOptions &g) {
  app->add_option("--dim", g.dim, "1 or 2")->check(CLI::Range(1, 2));
  app->add_option("--n", g.n, "nodes per axis");
  app->add_option("--length", g.length, "domain length per axis");
  app->add_option("--origin", g.origin, "domain origin per axis");
}

inline void add_solver_options(CLI::App *app, SolverOptions &s) {
  app->add_option("--tol", s.tol, "Newton residual tolerance")->check(CLI::PositiveNumber);
  app->add_option("--max-iters", s.max_iters, "Newton iteration cap")->check(CLI::NonNegativeNumber);
}

inline std::vector<FourierMode> parse_potential(const std::string &text) {
  std::vector<FourierMode> modes;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InvalidArgument("potential mode needs k:amplitude, got " + item);
    FourierMode m;
    const std::string k = item.substr(0, colon);
    const auto slash = k.find('/');
    try {
      m.k[0] = std::stoi(k.substr(0, slash));
      if (slash != std::string::npos) m.k[1] = std::stoi(k.substr(slash + 1));
      m.amplitude = std::stod(item.substr(colon + 1));
    } catch (const std::logic_error &) {
      throw InvalidArgument("cannot parse potential mode " + item);
    }
    modes.push_back(m);
  }
  return modes;
}

inline HamiltonianModel build_model(const ModelOptions &m) {
  BuiltinParams p;
  p.level = m.level;
  p.potential = parse_potential(m.potential);
  if (m.drift.empty() || m.drift.size() > 2) throw InvalidArgument("drift needs one or two components");
  p.drift = Vec2(m.drift[0], m.drift.size() > 1 ? m.drift[1] : 0.0);
  p.offset = m.offset;
  p.value = m.value;
  return make_builtin(m.name, p);
}

enum class Kind { Stationary, Dirichlet, Cell, Ergodic };

inline Kind parse_kind(const std::string &s) {
  if (s == "stationary") return Kind::Stationary;
  if (s == "dirichlet") return Kind::Dirichlet;
  if (s == "cell") return Kind::Cell;
  if (s == "ergodic") return Kind::Ergodic;
  throw InvalidArgument("unknown problem kind: " + s);
}

/// Dirichlet problems default to (-1, 1), or (0, 1) when comparing with a
/// closed form; periodic problems default to the torus [-1/2, 1/2).
inline Grid build_cli_grid(const GridOptions &o, Kind kind, bool unit_interval = false) {
  const bool dirichlet = kind == Kind::Dirichlet;
  GridSpec s;
  s.dim = o.dim;
  s.topology = dirichlet ? Topology::DirichletBox : Topology::Periodic;
  const int n = o.n > 0 ? o.n : (o.dim == 2 ? 64 : (dirichlet ? 2001 : 1024));
  const double length = o.length > 0.0 ? o.length : (dirichlet && !unit_interval ? 2.0 : 1.0);
  const double origin = !std::isnan(o.origin) ? o.origin : (dirichlet ? (unit_interval ? 0.0 : -1.0) : -0.5);
  for (int a = 0; a < o.dim; ++a) {
    s.counts[a] = n;
    s.lengths[a] = length;
    s.origin[a] = origin;
  }
  return build_grid(s);
}

/// "triangle" (|x| summed over axes), a number (constant), or empty (zero).
inline ScalarField build_forcing(const std::string &spec, const Grid &g) {
  if (spec.empty()) return ScalarField::zeros(g);
  if (spec == "triangle") {
    return ScalarField::from_function(g, [&g](const Vec2 &x) {
      double f = 0.0;
      for (int a = 0; a < g.dim(); ++a) f += std::abs(x[a]);
      return f;
    });
  }
  try {
    return ScalarField::constant(g, std::stod(spec));
  } catch (const std::logic_error &) {
    throw InvalidArgument("forcing must be 'triangle' or a number, got " + spec);
  }
}

inline Vec2 to_vec(const std::vector<double> &v) {
  if (v.empty() || v.size() > 2) throw InvalidArgument("expected one or two components");
  return Vec2(v[0], v.size() > 1 ? v[1] : 0.0);
}

/// Family over the sweep parameter (eps, or theta for cell problems).
inline ProblemFamily build_family(Kind kind, const HamiltonianModel &model, const Grid &g, const ScalarField &f,
                                  Vec2 P, double delta_power) {
  switch (kind) {
  case Kind::Stationary:
    return [=](double e) { return make_problem(model, g, 1.0, e, P, f); };
  case Kind::Dirichlet:
    return [=](double e) { return make_problem(model, g, 0.0, e, P, f); };
  case Kind::Cell:
    return cell_family(model, P, g);
  case Kind::Ergodic:
    return [=](double e) { return make_problem(model, g, e, std::pow(e, delta_power), P, f); };
  }
  throw InvalidArgument("unknown problem kind");
}

inline std::filesystem::path output_dir(const Common &c) {
  std::string dir = c.out_dir;
  if (dir.empty()) {
    const char *env = std::getenv("HJADJ_OUT_DIR");
    dir = env && *env ? env : ".";
  }
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path &p, const std::string &content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  os << content;
}

inline SolveResult solve_or_throw(const ProblemFamily &family, double param, double start, const SolverOptions &s) {
  SolveResult r = solve_continued(family, param, std::max(start, param), s.tol, s.max_iters);
  if (!r.converged) {
    std::ostringstream m;
    m << "Newton did not converge at parameter " << param << " (residual " << r.residual_sup << ")";
    throw NonConvergence(m.str());
  }
  return r;
}

/// Runs jobs 0..n-1 on a bounded pool; results are collected by index so the
/// output does not depend on the pool size.
template <class Result>
std::vector<Result> run_jobs(int n, int workers, const std::function<Result(int)> &job) {
  std::vector<Result> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        results[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int size = std::max(1, std::min(workers, n));
  for (int k = 1; k < size; ++k) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SolveOptions {
  std::string problem = "dirichlet";
  ModelOptions model;
  GridOptions grid;
  SolverOptions solver;
  double eps = 0.1;
  double theta = 0.1;
  double delta = 0.0;
  std::vector<double> P{0.0};
  std::string forcing;
  std::string closed_form;
};

inline int cmd_solve(const SolveOptions &o, const Common &c, std::ostream &out) {
  const Kind kind = parse_kind(o.problem);
  const bool closed = !o.closed_form.empty();
  if (closed && kind != Kind::Dirichlet) throw InvalidArgument("closed forms are Dirichlet problems");
  const Grid g = build_cli_grid(o.grid, kind, closed);
  const HamiltonianModel model = build_model(o.model);
  const ScalarField f = build_forcing(o.forcing, g);
  const Vec2 P = to_vec(o.P);

  double param = kind == Kind::Cell ? o.theta : o.eps;
  ProblemFamily family = build_family(kind, model, g, f, P, 2.0);
  if (kind == Kind::Ergodic && o.delta > 0.0)
    family = [=](double e) { return make_problem(model, g, e, o.delta, P, f); };
  const SolveResult r = solve_or_throw(family, param, 0.4, o.solver);

  const auto dir = output_dir(c);
  std::ostringstream csv;
  write_csv(csv, r.u);
  write_file(dir / "u.csv", csv.str());

  const AprioriBounds b = apriori_bounds_check(r, family(param));
  out << "converged: yes\nnewton_iters: " << r.newton_iters << "\nresidual_sup: " << r.residual_sup
      << "\nsup_u: " << b.sup_u << "\nsup_grad: " << b.sup_grad << "\nmax_u: " << r.u.max() << '\n';
  if (kind == Kind::Cell) out << "hbar_estimate: " << -o.theta * field_mean(r.u) << '\n';
  if (kind == Kind::Ergodic) out << "hbar_estimate: " << -o.eps * field_mean(r.u) << '\n';
  if (closed) {
    const ScalarField ref = closed_form_reference(o.closed_form, o.eps, g);
    out << "max_abs_diff_vs_closed_form: " << (r.u.values - ref.values).cwiseAbs().maxCoeff() << '\n';
  }
  out << "field: " << (dir / "u.csv").string() << '\n';
  return kExitOk;
}

struct AdjointOptions {
  std::string problem = "stationary";
  ModelOptions model;
  GridOptions grid;
  SolverOptions solver;
  double eps = 0.05;
  double theta = 0.1;
  std::vector<double> P{0.0};
  std::string forcing;
  std::vector<double> x0{0.0};
  double T = 1.0;
  int steps = 0;
  int slices = 5;
};

inline int cmd_adjoint(const AdjointOptions &o, const Common &c, std::ostream &out) {
  const Kind kind = parse_kind(o.problem);
  if (kind == Kind::Ergodic) throw InvalidArgument("adjoint supports stationary, dirichlet and cell problems");
  const Grid g = build_cli_grid(o.grid, kind);
  const HamiltonianModel model = build_model(o.model);
  const ScalarField f = build_forcing(o.forcing, g);
  const Vec2 P = to_vec(o.P);
  const double param = kind == Kind::Cell ? o.theta : o.eps;
  const ProblemFamily family = build_family(kind, model, g, f, P, 2.0);
  const SolveResult r = solve_or_throw(family, param, 0.4, o.solver);
  const RegularizedProblem pb = family(param);
  const TransportOperator op = assemble_transport(transport_drift(r.u, model, P), pb.nu);
  const int x0 = nearest_node(g, to_vec(o.x0));
  const auto dir = output_dir(c);
  bool ok = true;
  auto line = [&](bool pass, const std::string &what) {
    out << (pass ? "PASS " : "FAIL ") << what << '\n';
    ok = ok && pass;
  };

  if (kind == Kind::Dirichlet) {
    const ScalarField sigma = solve_elliptic_adjoint(op, x0);
    std::ostringstream csv;
    write_csv(csv, sigma);
    write_file(dir / "sigma.csv", csv.str());
    const double flux = boundary_flux(sigma, op);
    std::ostringstream a, b;
    a << "min sigma = " << sigma.min() << " >= -1e-12";
    line(sigma.min() >= -1e-12, a.str());
    b << "boundary flux = " << flux << " (diffusive part " << boundary_flux(sigma, pb.nu) << "), expected -1";
    line(std::abs(flux + 1.0) <= 1e-6, b.str());
    out << "weighted_hessian_integral: " << weighted_hessian_integral_elliptic(r.u, sigma, pb.nu) << '\n';
  } else {
    AdjointConfig cfg;
    cfg.T = o.T;
    cfg.x0 = x0;
    cfg.time_steps = o.steps;
    cfg.theta_weight = kind == Kind::Cell ? 2.0 * o.theta : 2.0;
    const AdjointTrajectory tr = solve_parabolic_adjoint(op, cfg);
    std::ostringstream mass;
    mass << "t,mass\n" << std::setprecision(17);
    double drift = 0.0;
    for (const auto &[t, m] : tr.mass_history) {
      mass << t << ',' << m << '\n';
      drift = std::max(drift, std::abs(m - 1.0));
    }
    write_file(dir / "mass.csv", mass.str());
    const int count = std::max(2, o.slices);
    for (int k = 0; k < count; ++k) {
      const std::size_t idx = static_cast<std::size_t>(std::llround(double(k) * (tr.times.size() - 1) / (count - 1)));
      std::ostringstream csv;
      write_csv(csv, tr.sigma[idx]);
      std::ostringstream name;
      name << "sigma_" << k << ".csv";
      write_file(dir / name.str(), csv.str());
    }
    std::ostringstream a, b;
    a << "max |mass - 1| = " << drift << " <= 1e-10 over " << tr.time_steps << " steps";
    line(drift <= 1e-10, a.str());
    b << "min sigma = " << tr.min_value << " >= -1e-12";
    line(tr.min_value >= -1e-12, b.str());
    out << "weighted_hessian_integral: " << weighted_hessian_integral_parabolic(r.u, tr, pb.nu) << '\n';
  }
  return ok ? kExitOk : kExitPropertyFailure;
}

struct SweepOptions {
  std::string problem = "dirichlet";
  ModelOptions model;
  GridOptions grid;
  SolverOptions solver;
  std::vector<double> eps{0.2, 0.1, 0.05, 0.025, 0.0125};
  std::vector<double> P{0.0};
  std::string forcing;
  std::string reference = "auto";
  double hbar = NAN;
  double min_slope = 0.45;
  double max_slope = INFINITY;
  std::vector<double> x0{0.0};
};

inline int cmd_sweep(const SweepOptions &o, const Common &c, std::ostream &out) {
  const Kind kind = parse_kind(o.problem);
  if (kind == Kind::Ergodic) throw InvalidArgument("sweep supports stationary, dirichlet and cell problems");
  if (o.eps.size() < 4) throw InvalidArgument("a sweep needs at least four parameter values");
  for (std::size_t i = 0; i < o.eps.size(); ++i)
    if (!(o.eps[i] > 0.0) || (i > 0 && !(o.eps[i] < o.eps[i - 1])))
      throw InvalidArgument("sweep parameters must be positive and strictly decreasing");
  const Grid g = build_cli_grid(o.grid, kind);
  const HamiltonianModel model = build_model(o.model);
  const ScalarField f = build_forcing(o.forcing, g);
  const Vec2 P = to_vec(o.P);
  const ProblemFamily family = build_family(kind, model, g, f, P, 2.0);
  const int x0 = nearest_node(g, to_vec(o.x0));

  std::string reference = o.reference;
  if (reference == "auto") {
    if (kind == Kind::Cell) reference = "hbar";
    else if (kind == Kind::Dirichlet && model.name == "eikonal" && o.forcing.empty() && g.dim() == 1) reference = "distance";
    else reference = "fine";
  }
  std::function<double(const ScalarField &, double)> error_of;
  std::string ref_note;
  if (reference == "distance") {
    if (kind != Kind::Dirichlet || g.dim() != 1) throw InvalidArgument("distance reference needs a 1D Dirichlet problem");
    const double slope = std::sqrt(o.model.level);
    const double lo = g.origin(0), hi = g.origin(0) + g.length(0);
    const ScalarField ref = ScalarField::from_function(
        g, [=](const Vec2 &x) { return slope * std::min(x[0] - lo, hi - x[0]); });
    error_of = [ref](const ScalarField &u, double) { return (u.values - ref.values).cwiseAbs().maxCoeff(); };
    ref_note = "distance function";
  } else if (reference == "fine") {
    if (kind == Kind::Cell) throw InvalidArgument("cell sweeps compare against Hbar");
    const Grid fine = refine_grid(g, 4);
    const ScalarField ff = build_forcing(o.forcing, fine);
    const ProblemFamily ffam = build_family(kind, model, fine, ff, P, 2.0);
    const double eps_ref = o.eps.back() / 8.0;
    const SolveResult rr = solve_or_throw(ffam, eps_ref, 0.4, o.solver);
    Eigen::VectorXd coarse(g.size());
    for (int n = 0; n < g.size(); ++n) {
      const auto cd = g.coords(n);
      coarse[n] = rr.u[fine.index(4 * cd[0], g.dim() == 2 ? 4 * cd[1] : 0)];
    }
    const ScalarField ref(g, coarse);
    error_of = [ref](const ScalarField &u, double) { return (u.values - ref.values).cwiseAbs().maxCoeff(); };
    std::ostringstream m;
    m << "fine-grid solve at parameter " << eps_ref << " on " << fine.count(0) << " nodes per axis";
    ref_note = m.str();
  } else if (reference == "hbar") {
    if (kind != Kind::Cell) throw InvalidArgument("Hbar reference needs a cell problem");
    double hbar = o.hbar;
    if (std::isnan(hbar)) {
      const HbarOracle orc = hbar_oracle(model, P, g);
      hbar = orc.value;
      ref_note = orc.method;
    } else {
      ref_note = "user-supplied Hbar";
    }
    error_of = [hbar](const ScalarField &z, double th) { return (th * z.values.array() + hbar).abs().maxCoeff(); };
  } else {
    throw InvalidArgument("unknown reference: " + reference);
  }

  const auto rows = run_jobs<SweepRow>(static_cast<int>(o.eps.size()), c.jobs, [&](int i) {
    const double e = o.eps[i];
    const SolveResult r = solve_or_throw(family, e, 0.4, o.solver);
    const RegularizedProblem pb = family(e);
    const TransportOperator op = assemble_transport(transport_drift(r.u, model, P), pb.nu);
    double hess = 0.0;
    if (g.periodic()) {
      AdjointConfig cfg;
      cfg.x0 = x0;
      cfg.theta_weight = kind == Kind::Cell ? 2.0 * e : 2.0;
      hess = weighted_hessian_integral_parabolic(r.u, op, cfg);
    } else {
      hess = weighted_hessian_integral_elliptic(r.u, solve_elliptic_adjoint(op, x0), pb.nu);
    }
    const AprioriBounds b = apriori_bounds_check(r, pb);
    return SweepRow{e, error_of(r.u, e), b.sup_u, b.sup_grad, hess};
  });

  std::vector<double> errors;
  for (const auto &r : rows) errors.push_back(r.error);
  const RateFit fit = fit_rate(o.eps, errors);

  const auto dir = output_dir(c);
  std::ostringstream csv, json, svg;
  write_sweep_csv(csv, rows);
  write_rate_fit(json, fit);
  svg::emit_svg(svg, {svg::Series{"sup error", o.eps, errors}},
                svg::Labels{model.name + " " + o.problem + " sweep", kind == Kind::Cell ? "theta" : "eps", "sup error"},
                svg::Scales{true, true}, "sweep.csv");
  write_file(dir / "sweep.csv", csv.str());
  write_file(dir / "rate.json", json.str());
  write_file(dir / "sweep.svg", svg.str());

  out << "reference: " << ref_note << '\n';
  write_rate_fit(out, fit);
  out << std::setprecision(6);
  const bool ok = fit.slope >= o.min_slope && fit.slope <= o.max_slope;
  out << (ok ? "PASS" : "FAIL") << " slope " << fit.slope << " in [" << o.min_slope << ", " << o.max_slope << "]\n";
  return ok ? kExitOk : kExitPropertyFailure;
}

struct HbarOptions {
  ModelOptions model{"quadratic_potential", 1.0, "1:1", {1.0}, -1.0, 0.0};
  GridOptions grid;
  std::vector<double> P{0.0};
  std::vector<double> P2;
  std::vector<double> theta{0.2, 0.1, 0.05, 0.025, 0.0125};
  double hbar = NAN;
};

inline int cmd_hbar(const HbarOptions &o, const Common &c, std::ostream &out) {
  const Grid g = build_cli_grid(o.grid, Kind::Cell);
  const HamiltonianModel model = build_model(o.model);
  if (o.theta.empty()) throw InvalidArgument("theta list is empty");
  std::vector<Vec2> Ps;
  if (g.dim() == 2) {
    if (o.P2.empty()) throw InvalidArgument("2D hbar tables need --P2");
    for (double p2 : o.P2)
      for (double p1 : o.P) Ps.emplace_back(p1, p2);
  } else {
    for (double p1 : o.P) Ps.emplace_back(p1, 0.0);
  }

  struct Row {
    std::vector<EffectiveHamiltonianEstimate> est;
    double oracle = NAN;
    std::string note;
  };
  const auto rows = run_jobs<Row>(static_cast<int>(Ps.size()), c.jobs, [&](int i) {
    Row row;
    row.est = theta_sweep(model, Ps[i], o.theta, g);
    for (auto &e : row.est) e.solve.residual_history.clear();
    if (!std::isnan(o.hbar)) {
      row.oracle = o.hbar;
      row.note = "user-supplied";
    } else {
      try {
        const HbarOracle orc = hbar_oracle(model, Ps[i], g);
        row.oracle = orc.value;
        row.note = orc.method;
      } catch (const OracleUnreliable &e) {
        row.note = e.what();
      }
    }
    return row;
  });

  const auto dir = output_dir(c);
  std::ostringstream csv;
  bool ok = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::ostringstream part;
    write_hbar_table(part, g.dim(), rows[i].est, rows[i].oracle);
    std::string s = part.str();
    if (i > 0) s = s.substr(s.find('\n') + 1);
    csv << s;
    out << "P = (" << Ps[i][0];
    if (g.dim() == 2) out << ", " << Ps[i][1];
    out << "): estimate " << rows[i].est.back().estimate << " at theta " << o.theta.back() << "; oracle "
        << rows[i].oracle << " [" << rows[i].note << "]\n";
    if (std::isnan(rows[i].oracle)) ok = false;
  }
  write_file(dir / "hbar.csv", csv.str());

  if (g.dim() == 2) {
    std::ostringstream grid;
    grid << "P1,P2,estimate\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rows.size(); ++i)
      grid << Ps[i][0] << ',' << Ps[i][1] << ',' << rows[i].est.back().estimate << '\n';
    write_file(dir / "hbar_grid.csv", grid.str());
  } else {
    std::vector<svg::Series> series;
    for (std::size_t k = 0; k < o.theta.size(); ++k) {
      svg::Series s;
      std::ostringstream label;
      label << "theta = " << o.theta[k];
      s.label = label.str();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        s.x.push_back(Ps[i][0]);
        s.y.push_back(rows[i].est[k].estimate);
      }
      series.push_back(std::move(s));
    }
    std::ostringstream svgs;
    svg::emit_svg(svgs, series, svg::Labels{"effective Hamiltonian estimates", "P", "estimate"},
                  svg::Scales{false, false}, "hbar.csv");
    write_file(dir / "hbar.svg", svgs.str());
  }
  return ok ? kExitOk : kExitPropertyFailure;
}

struct CheckOptions {
  ModelOptions model{"quartic1d", 1.0, "", {1.0}, -1.0, 0.0};
  double gamma = 1.0;
  double delta = 1.0;
  double p_radius = 3.0;
  int samples = 601;
  std::vector<double> eps;
  int n = 1001;
  double theta = 0.05;
};

inline int cmd_check(const CheckOptions &o, const Common &c, std::ostream &out) {
  const HamiltonianModel model = build_model(o.model);
  bool ok = true;
  auto line = [&](bool pass, const std::string &what) {
    out << (pass ? "PASS " : "FAIL ") << what << '\n';
    ok = ok && pass;
  };
  std::mt19937_64 rng(c.seed);

  const H3Certificate cert = check_h3(model, o.gamma, o.delta, SampleBox{o.p_radius, o.samples});
  {
    std::ostringstream m;
    m << "H3 gamma " << o.gamma << " delta " << o.delta << " on |p| <= " << o.p_radius << ": margin min = "
      << cert.observed_min_margin << " at p = " << cert.argmin[0];
    line(cert.passed, m.str());
  }
  line(check_coercivity(model, {1.0, 2.0, 4.0, 8.0}), "coercivity on radii 1, 2, 4, 8");
  if (model.claims_convex_in_p && model.H(Vec2::Zero(), Vec2::Zero()) < 0.0) {
    const auto [gc, dc] = convexity_h3_values(model);
    out << "INFO convex model: H3 holds with gamma " << gc << ", delta " << dc << '\n';
  }
  if (!cert.passed) return kExitPropertyFailure;

  const std::vector<double> eps = o.eps.empty() ? std::vector<double>{0.1, 0.05} : o.eps;
  const Grid g = grid_1d(o.n, 2.0, Topology::DirichletBox, -1.0);
  const ProblemFamily family = problems::dirichlet(model, g);
  SolverOptions so;
  for (double e : eps) {
    const SolveResult r = solve_or_throw(family, e, 0.4, so);
    const TransportOperator op = assemble_transport(r.u, model, e);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, g.interior_nodes().size() - 1);
    double gap = 0.0;
    for (int k = 0; k < 5; ++k) {
      Eigen::VectorXd fv(g.size());
      for (int n = 0; n < g.size(); ++n) fv[n] = unif(rng);
      gap = std::max(gap, duality_gap(op, g.interior_nodes()[pick(rng)], ScalarField(g, fv)));
    }
    std::ostringstream d;
    d << "eps " << e << " duality gap " << gap << " <= 1e-8";
    line(gap <= 1e-8, d.str());

    if (o.gamma >= 1.0 && o.gamma <= 2.0) {
      SupersolutionParams p = make_supersolution_params(o.gamma, o.delta);
      p.M = boundary_lift(r.u, p);
      const ExcessCheck sc = supersolution_check(r.u, model, p, e);
      std::ostringstream s, b;
      s << "eps " << e << " supersolution min excess " << sc.min_excess << " (tolerance "
        << supersolution_tolerance(r.u) << ")";
      line(sc.passed, s.str());
      b << "eps " << e << " bounded dual 0 <= v <= y";
      line(bounded_dual_check(r.u, model, e, p), b.str());
    } else {
      out << "SKIP supersolution: alpha, beta >= 0 needs gamma in [1, 2]\n";
    }
    const double M = 2.0 * gradient(r.u).sup_norm();
    const ExcessCheck ac = appendix_scaling_check(r.u, model, e, o.theta, o.gamma, M);
    std::ostringstream a;
    a << "eps " << e << " scaling check theta " << o.theta << " min excess " << ac.min_excess;
    line(ac.passed, a.str());
  }
  return ok ? kExitOk : kExitPropertyFailure;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int run(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr) {
  CLI::App app{"Vanishing-viscosity Hamilton-Jacobi experiments"};
  app.set_config("--config", "", "INI file; sections are subcommand names");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out", common.out_dir, "output directory (default: $HJADJ_OUT_DIR or .)");
  app.add_option("--seed", common.seed, "seed for all sampled quantities");
  app.add_option("--jobs", common.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);

  SolveOptions so;
  auto *solve_cmd = app.add_subcommand("solve", "solve one regularized problem");
  solve_cmd->add_option("--problem", so.problem, "stationary | dirichlet | cell | ergodic");
  add_model_options(solve_cmd, so.model);
  add_grid_options(solve_cmd, so.grid);
  add_solver_options(solve_cmd, so.solver);
  solve_cmd->add_option("--eps", so.eps)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--theta", so.theta)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--delta", so.delta, "ergodic viscosity (default eps^2)");
  solve_cmd->add_option("--P", so.P)->delimiter(',');
  solve_cmd->add_option("--forcing", so.forcing, "'triangle' or a constant");
  solve_cmd->add_option("--closed-form", so.closed_form, "laplace_unit | drift");

  AdjointOptions ao;
  auto *adjoint_cmd = app.add_subcommand("adjoint", "solve the adjoint of a converged problem");
  adjoint_cmd->add_option("--problem", ao.problem);
  add_model_options(adjoint_cmd, ao.model);
  add_grid_options(adjoint_cmd, ao.grid);
  add_solver_options(adjoint_cmd, ao.solver);
  adjoint_cmd->add_option("--eps", ao.eps)->check(CLI::PositiveNumber);
  adjoint_cmd->add_option("--theta", ao.theta)->check(CLI::PositiveNumber);
  adjoint_cmd->add_option("--P", ao.P)->delimiter(',');
  adjoint_cmd->add_option("--forcing", ao.forcing);
  adjoint_cmd->add_option("--x0", ao.x0, "source point")->delimiter(',');
  adjoint_cmd->add_option("--T", ao.T)->check(CLI::PositiveNumber);
  adjoint_cmd->add_option("--steps", ao.steps);
  adjoint_cmd->add_option("--slices", ao.slices, "number of exported time slices");

  SweepOptions wo;
  auto *sweep_cmd = app.add_subcommand("sweep", "error sweep and rate fit");
  sweep_cmd->add_option("--problem", wo.problem);
  add_model_options(sweep_cmd, wo.model);
  add_grid_options(sweep_cmd, wo.grid);
  add_solver_options(sweep_cmd, wo.solver);
  sweep_cmd->add_option("--eps,--theta", wo.eps, "decreasing parameter list")->delimiter(',');
  sweep_cmd->add_option("--P", wo.P)->delimiter(',');
  sweep_cmd->add_option("--forcing", wo.forcing);
  sweep_cmd->add_option("--reference", wo.reference, "auto | distance | fine | hbar");
  sweep_cmd->add_option("--hbar", wo.hbar, "known Hbar for cell sweeps");
  sweep_cmd->add_option("--min-slope", wo.min_slope);
  sweep_cmd->add_option("--max-slope", wo.max_slope);
  sweep_cmd->add_option("--x0", wo.x0, "adjoint source for the weighted integral")->delimiter(',');

  HbarOptions ho;
  auto *hbar_cmd = app.add_subcommand("hbar", "effective Hamiltonian table");
  add_model_options(hbar_cmd, ho.model);
  add_grid_options(hbar_cmd, ho.grid);
  hbar_cmd->add_option("--P,--P1", ho.P)->delimiter(',');
  hbar_cmd->add_option("--P2", ho.P2)->delimiter(',');
  hbar_cmd->add_option("--theta", ho.theta)->delimiter(',');
  hbar_cmd->add_option("--hbar", ho.hbar, "known Hbar instead of the extrapolation oracle");

  CheckOptions co;
  auto *check_cmd = app.add_subcommand("check", "structural certificates and dual checks");
  add_model_options(check_cmd, co.model);
  check_cmd->add_option("--gamma", co.gamma)->check(CLI::PositiveNumber);
  check_cmd->add_option("--delta", co.delta)->check(CLI::PositiveNumber);
  check_cmd->add_option("--p-radius", co.p_radius)->check(CLI::PositiveNumber);
  check_cmd->add_option("--samples", co.samples);
  check_cmd->add_option("--eps", co.eps)->delimiter(',');
  check_cmd->add_option("--n", co.n);
  check_cmd->add_option("--theta", co.theta);

  app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(so, common, out);
    if (adjoint_cmd->parsed()) return cmd_adjoint(ao, common, out);
    if (sweep_cmd->parsed()) return cmd_sweep(wo, common, out);
    if (hbar_cmd->parsed()) return cmd_hbar(ho, common, out);
    if (check_cmd->parsed()) return cmd_check(co, common, out);
    out << "hjadj " << kVersion << '\n';
    return kExitOk;
  } catch (const NonConvergence &e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const InvalidArgument &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const OracleUnreliable &e) {
    err << "error: " << e.what() << '\n';
    return kExitPropertyFailure;
  } catch (const MassDrift &e) {
    err << "error: " << e.what() << '\n';
    return kExitPropertyFailure;
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::filesystem::filesystem_error &e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

} // namespace hjadj::cli
