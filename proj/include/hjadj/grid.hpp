#pragma once
// Structured 1D/2D node-centred grids and the finite-difference operators
// every other module is assembled from.
//
// Node ordering is row-major with x fastest: index = i + nx * j.
// Periodic grids hold N nodes per axis at x = origin + i*L/N (node N is node 0).
// DirichletBox grids hold N nodes per axis at x = origin + i*L/(N-1); the
// outermost layer carries boundary values.

#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hjadj/errors.hpp"

namespace hjadj {

using Vec2 = Eigen::Vector2d;

enum class Topology { Periodic, DirichletBox };

struct GridSpec {
  int dim = 1;
  std::array<int, 2> counts{3, 1};
  std::array<double, 2> lengths{1.0, 1.0};
  std::array<double, 2> origin{0.0, 0.0};
  Topology topology = Topology::Periodic;
};

class Grid {
public:
  Grid() = default;

  int dim() const { return dim_; }
  Topology topology() const { return topology_; }
  bool periodic() const { return topology_ == Topology::Periodic; }
  int count(int axis) const { return counts_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double length(int axis) const { return lengths_[axis]; }
  double origin(int axis) const { return origin_[axis]; }
  int size() const { return counts_[0] * counts_[1]; }

  int index(int i, int j = 0) const { return i + counts_[0] * j; }
  std::array<int, 2> coords(int node) const {
    return {node % counts_[0], node / counts_[0]};
  }

  Vec2 position(int node) const {
    auto c = coords(node);
    Vec2 x = Vec2::Zero();
    for (int a = 0; a < dim_; ++a) x[a] = origin_[a] + c[a] * spacing_[a];
    return x;
  }

  /// Neighbour of `node` shifted by `offset` along `axis`; -1 when it falls
  /// outside a DirichletBox.
  int neighbor(int node, int axis, int offset) const {
    auto c = coords(node);
    int k = c[axis] + offset;
    const int n = counts_[axis];
    if (periodic()) {
      k = ((k % n) + n) % n;
    } else if (k < 0 || k >= n) {
      return -1;
    }
    c[axis] = k;
    return index(c[0], c[1]);
  }

  bool is_boundary(int node) const {
    if (periodic()) return false;
    auto c = coords(node);
    for (int a = 0; a < dim_; ++a)
      if (c[a] == 0 || c[a] == counts_[a] - 1) return true;
    return false;
  }

  /// Ordered (ascending) boundary node indices; empty for periodic grids.
  std::vector<int> boundary_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < size(); ++n)
      if (is_boundary(n)) out.push_back(n);
    return out;
  }

  std::vector<int> interior_nodes() const {
    std::vector<int> out;
    for (int n = 0; n < size(); ++n)
      if (!is_boundary(n)) out.push_back(n);
    return out;
  }

  /// Volume of an interior cell, h_x (* h_y).
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= spacing_[a];
    return v;
  }

  /// Quadrature weight of a node: the cell volume, halved per boundary axis on
  /// DirichletBox grids (trapezoidal rule).
  double weight(int node) const {
    double w = cell_volume();
    if (periodic()) return w;
    auto c = coords(node);
    for (int a = 0; a < dim_; ++a)
      if (c[a] == 0 || c[a] == counts_[a] - 1) w *= 0.5;
    return w;
  }

  bool operator==(const Grid &o) const {
    return dim_ == o.dim_ && counts_ == o.counts_ && lengths_ == o.lengths_ &&
           origin_ == o.origin_ && topology_ == o.topology_;
  }

  friend Grid build_grid(const GridSpec &spec);

private:
  int dim_ = 1;
  std::array<int, 2> counts_{1, 1};
  std::array<double, 2> lengths_{1.0, 1.0};
  std::array<double, 2> origin_{0.0, 0.0};
  std::array<double, 2> spacing_{1.0, 1.0};
  Topology topology_ = Topology::Periodic;
};

inline Grid build_grid(const GridSpec &spec) {
  detail::require(spec.dim == 1 || spec.dim == 2, "grid dimension must be 1 or 2");
  Grid g;
  g.dim_ = spec.dim;
  g.topology_ = spec.topology;
  for (int a = 0; a < spec.dim; ++a) {
    detail::require(spec.counts[a] >= 3, "grid needs at least 3 nodes per axis");
    detail::require(spec.lengths[a] > 0.0 && std::isfinite(spec.lengths[a]),
                    "grid lengths must be positive");
    g.counts_[a] = spec.counts[a];
    g.lengths_[a] = spec.lengths[a];
    g.origin_[a] = spec.origin[a];
    const int cells = g.periodic() ? spec.counts[a] : spec.counts[a] - 1;
    g.spacing_[a] = spec.lengths[a] / cells;
  }
  if (spec.dim == 1) {
    g.counts_[1] = 1;
    g.lengths_[1] = 1.0;
    g.origin_[1] = 0.0;
    g.spacing_[1] = 1.0;
  }
  return g;
}

/// Convenience: 1D grid on [origin, origin + length].
inline Grid grid_1d(int n, double length, Topology topo, double origin = 0.0) {
  GridSpec s;
  s.dim = 1;
  s.counts = {n, 1};
  s.lengths = {length, 1.0};
  s.origin = {origin, 0.0};
  s.topology = topo;
  return build_grid(s);
}

/// Convenience: 2D grid with n x n nodes on a square.
inline Grid grid_2d(int n, double length, Topology topo, double origin = 0.0) {
  GridSpec s;
  s.dim = 2;
  s.counts = {n, n};
  s.lengths = {length, length};
  s.origin = {origin, origin};
  s.topology = topo;
  return build_grid(s);
}

struct ScalarField {
  Grid grid;
  Eigen::VectorXd values;

  ScalarField() = default;
  ScalarField(Grid g, Eigen::VectorXd v) : grid(std::move(g)), values(std::move(v)) {
    detail::require(values.size() == grid.size(), "field size does not match grid");
    detail::require(values.allFinite(), "field contains non-finite values");
  }

  static ScalarField zeros(const Grid &g) {
    return ScalarField(g, Eigen::VectorXd::Zero(g.size()));
  }
  static ScalarField constant(const Grid &g, double c) {
    return ScalarField(g, Eigen::VectorXd::Constant(g.size(), c));
  }
  template <class Fn>
  static ScalarField from_function(const Grid &g, Fn &&fn) {
    Eigen::VectorXd v(g.size());
    for (int n = 0; n < g.size(); ++n) v[n] = fn(g.position(n));
    return ScalarField(g, std::move(v));
  }

  double operator[](int n) const { return values[n]; }
  int size() const { return static_cast<int>(values.size()); }
  double max() const { return values.maxCoeff(); }
  double min() const { return values.minCoeff(); }
  double sup_norm() const { return values.cwiseAbs().maxCoeff(); }
};

struct VectorField {
  Grid grid;
  std::array<Eigen::VectorXd, 2> components;

  VectorField() = default;
  explicit VectorField(const Grid &g) : grid(g) {
    for (auto &c : components) c = Eigen::VectorXd::Zero(g.size());
  }

  Vec2 at(int node) const { return {components[0][node], components[1][node]}; }
  void set(int node, const Vec2 &v) {
    for (int a = 0; a < grid.dim(); ++a) components[a][node] = v[a];
  }
  /// Largest Euclidean norm over nodes.
  double sup_norm() const {
    double m = 0.0;
    for (int n = 0; n < grid.size(); ++n) m = std::max(m, at(n).norm());
    return m;
  }
};

namespace detail {

// d/dx_axis at one node: central where both neighbours exist, otherwise the
// second-order one-sided stencil pointing inward.
inline double central_derivative(const Grid &g, const Eigen::VectorXd &f, int n, int axis) {
  const double h = g.spacing(axis);
  const int p = g.neighbor(n, axis, +1);
  const int m = g.neighbor(n, axis, -1);
  if (p >= 0 && m >= 0) return (f[p] - f[m]) / (2.0 * h);
  if (p >= 0) {
    const int pp = g.neighbor(n, axis, +2);
    return (-3.0 * f[n] + 4.0 * f[p] - f[pp]) / (2.0 * h);
  }
  const int mm = g.neighbor(n, axis, -2);
  return (3.0 * f[n] - 4.0 * f[m] + f[mm]) / (2.0 * h);
}

inline double second_derivative(const Grid &g, const Eigen::VectorXd &f, int n, int axis) {
  const double h = g.spacing(axis);
  return (f[g.neighbor(n, axis, +1)] - 2.0 * f[n] + f[g.neighbor(n, axis, -1)]) / (h * h);
}

inline double mixed_derivative(const Grid &g, const Eigen::VectorXd &f, int n) {
  const int pp = g.neighbor(g.neighbor(n, 0, +1), 1, +1);
  const int pm = g.neighbor(g.neighbor(n, 0, +1), 1, -1);
  const int mp = g.neighbor(g.neighbor(n, 0, -1), 1, +1);
  const int mm = g.neighbor(g.neighbor(n, 0, -1), 1, -1);
  return (f[pp] - f[pm] - f[mp] + f[mm]) / (4.0 * g.spacing(0) * g.spacing(1));
}

} // namespace detail

/// Second-order central gradient (one-sided second order at DirichletBox edges).
inline VectorField gradient(const ScalarField &f) {
  VectorField out(f.grid);
  for (int n = 0; n < f.grid.size(); ++n)
    for (int a = 0; a < f.grid.dim(); ++a)
      out.components[a][n] = detail::central_derivative(f.grid, f.values, n, a);
  return out;
}

struct UpwindByDrift {
  const VectorField &drift;
};

/// First-order upwinded gradient for the transport term b.Df: backward
/// differences where b_a > 0, forward otherwise.
inline VectorField gradient(const ScalarField &f, UpwindByDrift scheme) {
  const Grid &g = f.grid;
  detail::require(scheme.drift.grid == g, "drift lives on a different grid");
  VectorField out(g);
  for (int n = 0; n < g.size(); ++n) {
    for (int a = 0; a < g.dim(); ++a) {
      const double h = g.spacing(a);
      const int p = g.neighbor(n, a, +1);
      const int m = g.neighbor(n, a, -1);
      const bool backward = (scheme.drift.components[a][n] > 0.0 && m >= 0) || p < 0;
      out.components[a][n] = backward ? (f[n] - f[m]) / h : (f[p] - f[n]) / h;
    }
  }
  return out;
}

/// 3-point / 5-point Laplacian. Boundary nodes of DirichletBox grids get 0.
inline ScalarField laplacian(const ScalarField &f) {
  const Grid &g = f.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) continue;
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) s += detail::second_derivative(g, f.values, n, a);
    out[n] = s;
  }
  return ScalarField(g, std::move(out));
}

/// |D^2 f|^2 (Frobenius) from second central differences; 0 on DirichletBox
/// boundary nodes.
inline ScalarField hessian_norm_sq(const ScalarField &f) {
  const Grid &g = f.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) continue;
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const double d = detail::second_derivative(g, f.values, n, a);
      s += d * d;
    }
    if (g.dim() == 2) {
      const double m = detail::mixed_derivative(g, f.values, n);
      s += 2.0 * m * m;
    }
    out[n] = s;
  }
  return ScalarField(g, std::move(out));
}

/// Flux-difference divergence with arithmetic-mean face fluxes. On periodic
/// grids the fluxes telescope, so the integral vanishes to round-off.
inline ScalarField divergence_conservative(const VectorField &F) {
  const Grid &g = F.grid;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  for (int n = 0; n < g.size(); ++n) {
    if (g.is_boundary(n)) continue;
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const auto &c = F.components[a];
      const double right = 0.5 * (c[n] + c[g.neighbor(n, a, +1)]);
      const double left = 0.5 * (c[g.neighbor(n, a, -1)] + c[n]);
      s += (right - left) / g.spacing(a);
    }
    out[n] = s;
  }
  return ScalarField(g, std::move(out));
}

inline double integrate(const ScalarField &f) {
  double s = 0.0;
  for (int n = 0; n < f.grid.size(); ++n) s += f.values[n] * f.grid.weight(n);
  return s;
}

/// Single-node scaled indicator with unit integral.
inline ScalarField discrete_delta(const Grid &g, int node) {
  detail::require(node >= 0 && node < g.size(), "delta node out of range");
  detail::require(!g.is_boundary(node), "delta node must be interior on a DirichletBox grid");
  ScalarField d = ScalarField::zeros(g);
  d.values[node] = 1.0 / g.weight(node);
  return d;
}

/// Node closest to a physical point (first in row-major order on ties).
inline int nearest_node(const Grid &g, const Vec2 &x) {
  int best = 0;
  double dist = std::numeric_limits<double>::infinity();
  for (int n = 0; n < g.size(); ++n) {
    const double d = (g.position(n) - x).head(g.dim()).norm();
    if (d < dist) {
      dist = d;
      best = n;
    }
  }
  return best;
}

/// Node of the largest |value|, first in row-major order on ties.
inline int argmax_abs(const ScalarField &f) {
  int best = 0;
  for (int n = 1; n < f.size(); ++n)
    if (std::abs(f.values[n]) > std::abs(f.values[best])) best = n;
  return best;
}

/// CSV with header `x[,y],value`, row-major, 17 significant digits.
inline void write_csv(std::ostream &os, const ScalarField &f) {
  const Grid &g = f.grid;
  os << (g.dim() == 2 ? "x,y,value\n" : "x,value\n");
  os << std::setprecision(17);
  for (int n = 0; n < g.size(); ++n) {
    const Vec2 x = g.position(n);
    os << x[0] << ',';
    if (g.dim() == 2) os << x[1] << ',';
    os << f.values[n] << '\n';
  }
}

inline ScalarField read_csv(std::istream &is, const Grid &g) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument("empty field CSV");
  const std::string expected = g.dim() == 2 ? "x,y,value" : "x,value";
  if (line != expected) throw InvalidArgument("unexpected CSV header: " + line);
  Eigen::VectorXd v(g.size());
  int n = 0;
  while (std::getline(is, line) && !line.empty()) {
    if (n >= g.size()) throw InvalidArgument("CSV has more rows than grid nodes");
    const auto pos = line.rfind(',');
    v[n++] = std::stod(line.substr(pos + 1));
  }
  if (n != g.size()) throw InvalidArgument("CSV has fewer rows than grid nodes");
  return ScalarField(g, std::move(v));
}

} // namespace hjadj
