#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "grushin/discretization.hpp"
#include "grushin/field.hpp"

namespace grushin {

/// out = M v for some symmetric matrix M.
using ApplyFn = std::function<void(std::span<const double> v, std::span<double> out)>;
using IterateObserver = std::function<void(int iteration, std::span<const double> x)>;

struct KrylovResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;  // ||M x - b||_2 / ||b||_2
  bool converged = false;
  bool negative_curvature = false;  // CG met p^T M p <= 0
};

/// Jacobi-preconditioned conjugate gradients. Stops early (without throwing)
/// on negative curvature so callers can use it as a convexity probe.
KrylovResult pcg(const ApplyFn& apply, std::span<const double> jacobi_diagonal, std::span<const double> b,
                 double tol, int max_iter, std::span<const double> x0 = {},
                 const IterateObserver& observer = {});

/// Preconditioned MINRES for symmetric indefinite systems; the preconditioner
/// diagonal must be positive.
KrylovResult minres(const ApplyFn& apply, std::span<const double> precond_diagonal,
                    std::span<const double> b, double tol, int max_iter);

struct LinearSolve {
  Field solution;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves A u = b to relative residual tol; throws ConvergenceError otherwise.
LinearSolve solve_spd(const OperatorMatrix& A, const Field& b, double tol, int max_iter,
                      const IterateObserver& observer = {});

/// Sparse LDL^T factorization of an operator matrix, for repeated solves
/// with the same A.
class OperatorFactorization {
 public:
  explicit OperatorFactorization(const OperatorMatrix& A);
  ~OperatorFactorization();
  OperatorFactorization(OperatorFactorization&&) noexcept;
  OperatorFactorization& operator=(OperatorFactorization&&) noexcept;

  std::size_t size() const { return n_; }
  Field solve(const Field& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t n_ = 0;
};

/// Torsion function: -Delta_gamma u1 = 1 with zero Dirichlet data.
Field solve_torsion(const Grid2D& grid, double gamma, double tol);
Field solve_torsion(const OperatorMatrix& A, double tol);

}  // namespace grushin
