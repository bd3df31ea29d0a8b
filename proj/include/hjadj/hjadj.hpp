#pragma once
// Umbrella header for the library.

#include "hjadj/errors.hpp"
#include "hjadj/grid.hpp"
#include "hjadj/hamiltonian.hpp"
#include "hjadj/linear_solve.hpp"
#include "hjadj/solver.hpp"
#include "hjadj/adjoint.hpp"
#include "hjadj/diagnostics.hpp"
#include "hjadj/homogenize.hpp"
#include "hjadj/problems.hpp"
#include "hjadj/svg.hpp"

namespace hjadj {

inline constexpr const char *kVersion = "0.1.0";

} // namespace hjadj
