#pragma once
// Hamiltonian models H(x, p) with analytic derivatives, the builtin zoo, and
// sampled certificates for coercivity and the homogeneity-type condition
// D_pH(p).p - gamma H(p) >= delta.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"

namespace hjadj {

struct HamiltonianModel {
  using Scalar = std::function<double(const Vec2 &x, const Vec2 &p)>;
  using Vector = std::function<Vec2(const Vec2 &x, const Vec2 &p)>;

  std::string name;
  Scalar H;
  Vector DpH;
  Vector DxH;
  bool x_dependent = false;
  bool claims_convex_in_p = false;
};

/// One cosine mode a * cos(2 pi (k0 x0 + k1 x1)) of a periodic potential.
struct FourierMode {
  std::array<int, 2> k{0, 0};
  double amplitude = 0.0;
};

struct BuiltinParams {
  /// eikonal: H = |p|^2 - level.
  double level = 1.0;
  /// quadratic_potential: H = |p|^2/2 + V(x), V a truncated cosine series.
  std::vector<FourierMode> potential;
  /// linear_drift: H = b.p + c.
  Vec2 drift{1.0, 0.0};
  double offset = -1.0;
  /// constant: H = value (no p dependence).
  double value = 0.0;
};

namespace detail {

inline double potential_value(const std::vector<FourierMode> &modes, const Vec2 &x) {
  double v = 0.0;
  for (const auto &m : modes)
    v += m.amplitude * std::cos(2.0 * std::numbers::pi * (m.k[0] * x[0] + m.k[1] * x[1]));
  return v;
}

inline Vec2 potential_gradient(const std::vector<FourierMode> &modes, const Vec2 &x) {
  Vec2 g = Vec2::Zero();
  for (const auto &m : modes) {
    const double arg = 2.0 * std::numbers::pi * (m.k[0] * x[0] + m.k[1] * x[1]);
    const double s = -m.amplitude * 2.0 * std::numbers::pi * std::sin(arg);
    g[0] += s * m.k[0];
    g[1] += s * m.k[1];
  }
  return g;
}

} // namespace detail

/// Builtins: quartic1d, eikonal, quadratic_potential, linear_drift, constant
/// (and `none`, an alias for constant 0).
inline HamiltonianModel make_builtin(const std::string &name, const BuiltinParams &params = {}) {
  HamiltonianModel m;
  m.name = name;
  const auto zero = [](const Vec2 &, const Vec2 &) -> Vec2 { return Vec2::Zero(); };

  if (name == "quartic1d") {
    // (|p|^2 - 1)^2 - 2: non-convex, coercive.
    m.H = [](const Vec2 &, const Vec2 &p) {
      const double r2 = p.squaredNorm() - 1.0;
      return r2 * r2 - 2.0;
    };
    m.DpH = [](const Vec2 &, const Vec2 &p) -> Vec2 {
      return 4.0 * (p.squaredNorm() - 1.0) * p;
    };
    m.DxH = zero;
  } else if (name == "eikonal") {
    const double level = params.level;
    m.H = [level](const Vec2 &, const Vec2 &p) { return p.squaredNorm() - level; };
    m.DpH = [](const Vec2 &, const Vec2 &p) -> Vec2 { return 2.0 * p; };
    m.DxH = zero;
    m.claims_convex_in_p = true;
  } else if (name == "quadratic_potential") {
    const auto modes = params.potential;
    m.H = [modes](const Vec2 &x, const Vec2 &p) {
      return 0.5 * p.squaredNorm() + detail::potential_value(modes, x);
    };
    m.DpH = [](const Vec2 &, const Vec2 &p) -> Vec2 { return p; };
    m.DxH = [modes](const Vec2 &x, const Vec2 &) {
      return detail::potential_gradient(modes, x);
    };
    for (const auto &mode : modes)
      if (mode.amplitude != 0.0 && (mode.k[0] != 0 || mode.k[1] != 0)) m.x_dependent = true;
    m.claims_convex_in_p = true;
  } else if (name == "linear_drift") {
    const Vec2 b = params.drift;
    const double c = params.offset;
    m.H = [b, c](const Vec2 &, const Vec2 &p) { return b.dot(p) + c; };
    m.DpH = [b](const Vec2 &, const Vec2 &) { return b; };
    m.DxH = zero;
    m.claims_convex_in_p = true;
  } else if (name == "constant" || name == "none") {
    const double c = name == "none" ? 0.0 : params.value;
    m.H = [c](const Vec2 &, const Vec2 &) { return c; };
    m.DpH = zero;
    m.DxH = zero;
    m.claims_convex_in_p = true;
  } else {
    throw InvalidArgument("unknown Hamiltonian model: " + name);
  }
  return m;
}

struct SampleBox {
  double p_radius = 3.0;
  /// Lattice points per axis; forced odd so p = 0 is sampled.
  int samples = 601;
};

struct H3Certificate {
  double gamma = 0.0;
  double delta = 0.0;
  SampleBox box;
  double observed_min_margin = 0.0;
  Vec2 argmin = Vec2::Zero();
  bool passed = false;
};

inline constexpr double kH3Tolerance = 1e-9;

/// Evaluates D_pH(p).p - gamma H(p) on a lattice over [-R, R]^dim.
inline H3Certificate check_h3(const HamiltonianModel &model, double gamma, double delta,
                              const SampleBox &box, int dim = 1) {
  detail::require(!model.x_dependent, "H3 is stated for x-independent Hamiltonians");
  detail::require(gamma > 0.0 && delta > 0.0, "gamma and delta must be positive");
  detail::require(box.p_radius > 0.0 && box.samples >= 3, "invalid sample box");
  detail::require(dim == 1 || dim == 2, "dimension must be 1 or 2");

  const int n = box.samples % 2 == 1 ? box.samples : box.samples + 1;
  const double step = 2.0 * box.p_radius / (n - 1);
  const Vec2 x0 = Vec2::Zero();

  H3Certificate cert{gamma, delta, SampleBox{box.p_radius, n}, INFINITY, Vec2::Zero(), false};
  const int ny = dim == 2 ? n : 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < n; ++i) {
      Vec2 p(-box.p_radius + i * step, dim == 2 ? -box.p_radius + j * step : 0.0);
      const double margin = model.DpH(x0, p).dot(p) - gamma * model.H(x0, p);
      if (margin < cert.observed_min_margin) {
        cert.observed_min_margin = margin;
        cert.argmin = p;
      }
    }
  }
  cert.passed = cert.observed_min_margin >= delta - kH3Tolerance;
  return cert;
}

/// True iff r -> min_{|p|=r} H(x,p)/r is strictly increasing over `radii`
/// and its last value reaches `threshold`. x ranges over a lattice of the unit
/// cell for x-dependent models.
inline bool check_coercivity(const HamiltonianModel &model, const std::vector<double> &radii,
                             int dim = 1, double threshold = 1.0) {
  detail::require(radii.size() >= 2, "need at least two radii");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    detail::require(radii[i] > 0.0, "radii must be positive");
    if (i > 0) detail::require(radii[i] > radii[i - 1], "radii must increase");
  }
  const int directions = dim == 1 ? 2 : 128;
  const int xs = model.x_dependent ? 16 : 1;

  std::vector<double> mins;
  for (double r : radii) {
    double lo = INFINITY;
    for (int xi = 0; xi < xs; ++xi) {
      for (int xj = 0; xj < (dim == 2 ? xs : 1); ++xj) {
        const Vec2 x(double(xi) / xs, double(xj) / xs);
        for (int d = 0; d < directions; ++d) {
          const double angle = 2.0 * std::numbers::pi * d / directions;
          const Vec2 p = dim == 1 ? Vec2(d == 0 ? r : -r, 0.0)
                                  : Vec2(r * std::cos(angle), r * std::sin(angle));
          lo = std::min(lo, model.H(x, p) / r);
        }
      }
    }
    mins.push_back(lo);
  }
  for (std::size_t i = 1; i < mins.size(); ++i)
    if (!(mins[i] > mins[i - 1])) return false;
  return mins.back() >= threshold;
}

/// Convex models with H(0) < 0 satisfy the H3 inequality with gamma = 1 and
/// delta = -H(0).
inline std::pair<double, double> convexity_h3_values(const HamiltonianModel &model) {
  detail::require(model.claims_convex_in_p, "model does not claim convexity in p");
  const double h0 = model.H(Vec2::Zero(), Vec2::Zero());
  detail::require(h0 < 0.0, "convexity certificate needs H(0) < 0");
  return {1.0, -h0};
}

} // namespace hjadj
