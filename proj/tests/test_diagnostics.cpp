#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hjadj/diagnostics.hpp"
#include "hjadj/problems.hpp"

using namespace hjadj;

namespace {

constexpr double kPi = std::numbers::pi;

const std::vector<double> kEps{0.2, 0.1, 0.05, 0.025, 0.0125};

std::vector<double> planted(double C, double slope) {
  std::vector<double> e;
  for (double x : kEps) e.push_back(C * std::pow(x, slope));
  return e;
}

SolveResult dirichlet_solve(const std::string &model, int n, double eps) {
  return solve_continued(problems::dirichlet(make_builtin(model), problems::symmetric_interval(n)), eps, 0.4);
}

double ratio(const std::vector<double> &v) {
  return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
}

} // namespace

TEST(FitRate, RecoversPlantedSlopes) {
  for (double s : {0.5, 1.0, 0.37, 2.0}) {
    const RateFit f = fit_rate(kEps, planted(3.0, s));
    EXPECT_NEAR(f.slope, s, 1e-10);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  }
}

TEST(FitRate, RejectsBadInput) {
  EXPECT_THROW(fit_rate({0.2, 0.1, 0.05}, {1, 2, 3}), InvalidArgument);
  EXPECT_THROW(fit_rate(kEps, {1, 2, 0, 3, 4}), InvalidArgument);
  EXPECT_THROW(fit_rate(kEps, {1, 2, -1, 3, 4}), InvalidArgument);
  EXPECT_THROW(fit_rate({0.1, 0.2, 0.05, 0.025}, {1, 2, 3, 4}), InvalidArgument);
  EXPECT_THROW(fit_rate(kEps, {1, 2, 3}), InvalidArgument);
}

TEST(FitRate, StructuredText) {
  std::ostringstream os;
  write_rate_fit(os, fit_rate(kEps, planted(1.0, 0.5)));
  const std::string s = os.str();
  EXPECT_NE(s.find("\"slope\": 0.5"), std::string::npos);
  EXPECT_NE(s.find("\"r_squared\""), std::string::npos);
  EXPECT_NE(s.find("\"intercept\""), std::string::npos);
}

TEST(SweepCsv, Header) {
  std::ostringstream os;
  write_sweep_csv(os, {SweepRow{0.1, 0.01, 1.0, 1.0, 0.5}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "param,error,sup_u,sup_grad,hessian_integral");
}

TEST(WeightedHessian, ZeroForConstantAndLinear) {
  const Grid g = problems::symmetric_interval(101);
  const ScalarField sigma = discrete_delta(g, 40);
  EXPECT_EQ(weighted_hessian_integral_elliptic(ScalarField::constant(g, 2.0), sigma, 0.1), 0.0);
  const ScalarField lin = ScalarField::from_function(g, [](const Vec2 &x) { return 3 * x[0] - 1; });
  EXPECT_LE(weighted_hessian_integral_elliptic(lin, solve_elliptic_adjoint(lin, make_builtin("eikonal"), 0.1, 40), 0.1),
            1e-12);

  const Grid t = grid_2d(16, 1.0, Topology::Periodic);
  AdjointConfig cfg;
  cfg.x0 = 37;
  const ScalarField c = ScalarField::constant(t, 1.0);
  EXPECT_EQ(weighted_hessian_integral_parabolic(c, solve_parabolic_adjoint(c, make_builtin("eikonal"), 0.1, cfg), 0.1),
            0.0);
}

TEST(WeightedHessian, StreamingMatchesStoredTrajectory) {
  const Grid g = problems::torus_1d(128);
  const SolveResult r = solve_continued(problems::torus_eikonal(g), 0.05, 0.4);
  const TransportOperator op = assemble_transport(r.u, make_builtin("eikonal"), 0.05);
  AdjointConfig cfg;
  cfg.x0 = 64;
  cfg.store_every = 1;
  const double stored = weighted_hessian_integral_parabolic(r.u, solve_parabolic_adjoint(op, cfg), 0.05);
  const double streamed = weighted_hessian_integral_parabolic(r.u, op, cfg);
  EXPECT_NEAR(stored, streamed, 1e-12 * stored);
}

TEST(WeightedHessian, TorusEikonalBoundedAcrossEpsilon) {
  const Grid g = problems::torus_1d(1024);
  const auto family = problems::torus_eikonal(g);
  const HamiltonianModel m = make_builtin("eikonal");
  std::vector<double> vals;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    const SolveResult r = solve_continued(family, eps, 0.4);
    AdjointConfig cfg;
    cfg.x0 = nearest_node(g, Vec2::Zero());
    vals.push_back(weighted_hessian_integral_parabolic(r.u, assemble_transport(r.u, m, eps), cfg));
  }
  EXPECT_LE(ratio(vals), 5.0);
}

TEST(WeightedHessian, DirichletEikonalBoundedAcrossEpsilon) {
  std::vector<double> vals;
  for (double eps : {0.1, 0.05, 0.025, 0.0125}) {
    const SolveResult r = dirichlet_solve("eikonal", 2001, eps);
    const int x0 = nearest_node(r.u.grid, Vec2::Zero());
    vals.push_back(weighted_hessian_integral_elliptic(r.u, solve_elliptic_adjoint(r.u, make_builtin("eikonal"), eps, x0), eps));
  }
  EXPECT_LE(ratio(vals), 5.0);
}

TEST(WeightedHessian, SourcePointUniformityOnTorus) {
  const Grid g = problems::torus_1d(512);
  const SolveResult r = solve_continued(problems::torus_eikonal(g), 0.1, 0.4);
  const TransportOperator op = assemble_transport(r.u, make_builtin("eikonal"), 0.1);
  std::mt19937_64 rng(0);
  std::vector<double> vals;
  for (int trial = 0; trial < 10; ++trial) {
    AdjointConfig cfg;
    cfg.x0 = static_cast<int>(rng() % g.size());
    vals.push_back(weighted_hessian_integral_parabolic(r.u, op, cfg));
  }
  EXPECT_LE(ratio(vals), 5.0);
}

TEST(GradientIdentity, ConstantSolution) {
  const Grid g = problems::torus_1d(64);
  EXPECT_LE(gradient_identity_residual(ScalarField::constant(g, -0.2), make_builtin("quadratic_potential"), 1.0, 0.1),
            1e-12);
}

TEST(GradientIdentity, ManufacturedSolutionIsSecondOrder) {
  BuiltinParams p;
  p.potential = {FourierMode{{1, 0}, 0.5}};
  const HamiltonianModel m = make_builtin("quadratic_potential", p);
  const double lambda = 1.0, nu = 0.1;
  auto residual_on = [&](int n) {
    const Grid g = problems::torus_1d(n);
    const ScalarField u = ScalarField::from_function(g, [](const Vec2 &x) { return std::sin(2 * kPi * x[0]); });
    // f makes u an exact solution of lambda u + H(x, Du) = nu Lap u + f.
    const ScalarField f = ScalarField::from_function(g, [&](const Vec2 &x) {
      const double du = 2 * kPi * std::cos(2 * kPi * x[0]);
      const double lap = -4 * kPi * kPi * std::sin(2 * kPi * x[0]);
      return lambda * std::sin(2 * kPi * x[0]) + m.H(x, Vec2(du, 0)) - nu * lap;
    });
    return gradient_identity_residual(u, m, lambda, nu, Vec2::Zero(), f);
  };
  const double r1 = residual_on(64), r2 = residual_on(128), r3 = residual_on(256);
  EXPECT_NEAR(std::log2(r1 / r2), 2.0, 0.2);
  EXPECT_NEAR(std::log2(r2 / r3), 2.0, 0.2);
}

TEST(GradientIdentity, DecreasesUnderRefinementForEveryBuiltin) {
  const double eps = 0.025;
  const std::vector<std::pair<std::string, std::function<RegularizedProblem(int)>>> cases{
      {"eikonal", [&](int cells) { return problems::dirichlet(make_builtin("eikonal"), problems::symmetric_interval(cells + 1))(eps); }},
      {"quartic1d", [&](int cells) { return problems::dirichlet(make_builtin("quartic1d"), problems::symmetric_interval(cells + 1))(eps); }},
      {"linear_drift", [&](int cells) { return make_problem(problems::drift_model(), problems::unit_interval(cells + 1), 0.0, eps); }},
      {"quadratic_potential", [&](int cells) { return make_problem(problems::cosine_potential(), problems::torus_1d(cells), 1.0, eps); }},
  };
  for (const auto &[name, build] : cases) {
    std::vector<double> res;
    for (int cells : {400, 800}) {
      const ProblemFamily fam = [&](double e) {
        RegularizedProblem pb = build(cells);
        pb.nu = e;
        return pb;
      };
      const SolveResult r = solve_continued(fam, eps, name == "linear_drift" ? eps : 0.4);
      ASSERT_TRUE(r.converged) << name;
      res.push_back(gradient_identity_residual(fam(eps), r.u));
    }
    EXPECT_GE(res[0] / res[1], 2.0) << name;
  }
}

TEST(GradientIdentity, EikonalDirichletDropsByTwo) {
  const SolveResult a = dirichlet_solve("eikonal", 201, 0.1), b = dirichlet_solve("eikonal", 401, 0.1);
  const HamiltonianModel m = make_builtin("eikonal");
  EXPECT_GE(gradient_identity_residual(a.u, m, 0.0, 0.1) / gradient_identity_residual(b.u, m, 0.0, 0.1), 2.0);
}

TEST(Sensitivity, ConstantFamilyIsZero) {
  BuiltinParams p;
  p.potential = {FourierMode{{0, 0}, 0.4}};
  const HamiltonianModel m = make_builtin("quadratic_potential", p);
  const Grid g = problems::torus_1d(32);
  const ProblemFamily fam = [&](double e) { return make_problem(m, g, 1.0, e); };
  EXPECT_LE(epsilon_sensitivity(fam, 0.1, 0.005), 1e-8);
  EXPECT_THROW(epsilon_sensitivity(fam, 0.1, 0.02), InvalidArgument);
}

TEST(Sensitivity, TorusEikonalGrowthExponent) {
  const Grid g = problems::torus_1d(2048);
  const auto fam = problems::torus_eikonal(g);
  std::vector<double> eps{0.05, 0.025, 0.0125, 0.00625}, sens;
  for (double e : eps) sens.push_back(epsilon_sensitivity(fam, e, e / 20));
  const double slope = fit_rate(eps, sens).slope;
  EXPECT_GE(slope, -0.65);
  EXPECT_LE(slope, -0.3);
}

TEST(Supersolution, ParameterInvariants) {
  const SupersolutionParams q = make_supersolution_params(2.0, 2.0);
  EXPECT_EQ(q.alpha, 1.0);
  EXPECT_EQ(q.beta, 0.0);
  EXPECT_EQ(q.k, 0.5);
  const SupersolutionParams e = make_supersolution_params(1.0, 1.0);
  EXPECT_EQ(e.alpha, 0.0);
  EXPECT_EQ(e.k, 1.0);
  SupersolutionParams bad = q;
  bad.beta = 0.5;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  EXPECT_THROW(supersolution_field(ScalarField::zeros(problems::symmetric_interval(5)), bad), InvalidArgument);
  EXPECT_THROW(make_supersolution_params(3.0, 1.0), InvalidArgument);
}

TEST(Supersolution, QuarticAndEikonalPass) {
  struct Case {
    const char *name;
    double gamma, delta;
  };
  for (const Case c : {Case{"quartic1d", 2.0, 2.0}, Case{"eikonal", 1.0, 1.0}}) {
    const SolveResult r = dirichlet_solve(c.name, 2001, 0.05);
    SupersolutionParams p = make_supersolution_params(c.gamma, c.delta);
    p.M = boundary_lift(r.u, p);
    EXPECT_TRUE(supersolution_check(r.u, make_builtin(c.name), p, 0.05).passed) << c.name;
    EXPECT_TRUE(bounded_dual_check(r.u, make_builtin(c.name), 0.05, p)) << c.name;
  }
}

TEST(Supersolution, DriftClosedFormBoundedDual) {
  const Grid g = problems::unit_interval(1025);
  const RegularizedProblem pb = make_problem(problems::drift_model(), g, 0.0, 0.05);
  const SolveResult r = solve(pb, ScalarField::constant(g, 1.0), attainable_tolerance(pb, ScalarField::zeros(g), 1e-10), 50);
  ASSERT_TRUE(r.converged);
  const SupersolutionParams p = make_supersolution_params(1.0, 1.0, 2.0);
  EXPECT_TRUE(bounded_dual_check(r.u, problems::drift_model(), 0.05, p));
}

TEST(ScalingCheck, Parameters) {
  for (double gamma : {1.0, 1.5, 2.0}) {
    const ScalingParams sp = make_scaling_params(0.05, gamma, 1.0);
    EXPECT_NEAR(std::pow(sp.s + sp.t, gamma), sp.s + 2 * sp.t, 1e-12);
  }
  const ScalingParams one = make_scaling_params(0.05, 1.0, 0.0);
  EXPECT_NEAR(one.t, 0.0, 1e-15);
  EXPECT_NEAR(one.s, 1.05, 1e-15);
}

TEST(ScalingCheck, EikonalAndQuartic) {
  const SolveResult e = dirichlet_solve("eikonal", 2001, 0.05);
  EXPECT_TRUE(appendix_scaling_check(e.u, make_builtin("eikonal"), 0.05, 0.01, 1.0, 0.0).passed);
  const SolveResult q = dirichlet_solve("quartic1d", 2001, 0.05);
  const double M = 2.0 * gradient(q.u).sup_norm();
  EXPECT_TRUE(appendix_scaling_check(q.u, make_builtin("quartic1d"), 0.05, 0.05, 2.0, M).passed);
  const ExcessCheck zero = appendix_scaling_check(q.u, make_builtin("quartic1d"), 0.05, 0.05, 2.0, 0.0);
  EXPECT_TRUE(std::isfinite(zero.min_excess));
  EXPECT_THROW(appendix_scaling_check(q.u, make_builtin("quartic1d"), 0.05, 0.2, 2.0, M), InvalidArgument);
}
