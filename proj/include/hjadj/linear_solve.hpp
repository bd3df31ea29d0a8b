#pragma once

#include <optional>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace hjadj {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

enum class LinearMethod { Direct, Krylov };

inline constexpr double kKrylovRelTol = 1e-10;

/// Direct sparse LU; nullopt when the factorization or solve fails.
inline std::optional<Eigen::VectorXd> solve_direct(const SparseMatrix &A, const Eigen::VectorXd &b) {
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) return std::nullopt;
  return x;
}

/// BiCGSTAB with an incomplete-LU preconditioner; falls back to the direct
/// solver if the iteration does not reach `rtol`.
inline std::optional<Eigen::VectorXd> solve_krylov(const SparseMatrix &A, const Eigen::VectorXd &b,
                                                   double rtol = kKrylovRelTol) {
  Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> it;
  it.preconditioner().setDroptol(1e-6);
  it.preconditioner().setFillfactor(10);
  it.setTolerance(rtol);
  it.setMaxIterations(2000);
  it.compute(A);
  if (it.info() == Eigen::Success) {
    Eigen::VectorXd x = it.solve(b);
    if (it.info() == Eigen::Success && x.allFinite()) return x;
  }
  return solve_direct(A, b);
}

inline std::optional<Eigen::VectorXd> solve_linear(const SparseMatrix &A, const Eigen::VectorXd &b,
                                                   LinearMethod method) {
  return method == LinearMethod::Direct ? solve_direct(A, b) : solve_krylov(A, b);
}

} // namespace hjadj
