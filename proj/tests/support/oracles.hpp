#pragma once
// Reference values computed independently of the library.

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/roots.hpp>

namespace oracles {

/// Exact solution of |u'|^2 - 1 = eps u'' on (-1, 1), u(+-1) = 0:
/// eps log cosh(1/eps) - eps log cosh(x/eps).
inline double viscous_eikonal(double x, double eps) {
  auto log_cosh = [](double y) {
    y = std::abs(y);
    return y + std::log1p(std::exp(-2.0 * y)) - std::numbers::ln2;
  };
  return eps * (log_cosh(1.0 / eps) - log_cosh(x / eps));
}

/// Effective Hamiltonian of H = p^2/2 + a cos(2 pi x) in one dimension:
/// a for |P| <= (4/pi) sqrt(a), otherwise the E > a solving
/// int_0^1 sqrt(2 (E - a cos 2 pi x)) dx = |P|.
inline double cosine_hbar(double P, double a = 1.0) {
  if (a <= 0.0) throw std::invalid_argument("amplitude must be positive");
  const double target = std::abs(P);
  if (target <= 4.0 / std::numbers::pi * std::sqrt(a)) return a;
  boost::math::quadrature::tanh_sinh<double> q;
  auto action = [&](double E) {
    return q.integrate([&](double x) { return std::sqrt(2.0 * (E - a * std::cos(2.0 * std::numbers::pi * x))); },
                       0.0, 1.0) - target;
  };
  double hi = a + 0.5 * target * target + 1.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  auto [lo_e, hi_e] = boost::math::tools::toms748_solve(action, a, hi, tol, iters);
  return 0.5 * (lo_e + hi_e);
}

} // namespace oracles
