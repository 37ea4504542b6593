#include "grushin/linear_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "grushin/errors.hpp"

namespace grushin {

namespace {

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

}  // namespace

KrylovResult pcg(const ApplyFn& apply, std::span<const double> jacobi_diagonal, std::span<const double> b,
                 double tol, int max_iter, std::span<const double> x0, const IterateObserver& observer) {
  const std::size_t n = b.size();
  if (jacobi_diagonal.size() != n) throw InvalidParameter("preconditioner dimension mismatch");
  if (!(tol > 0.0)) throw InvalidParameter("tolerance must be positive");

  KrylovResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) {
    if (x0.size() != n) throw InvalidParameter("initial guess dimension mismatch");
    std::copy(x0.begin(), x0.end(), res.x.begin());
  }
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    res.converged = true;
    return res;
  }

  std::vector<double> r(n), z(n), p(n), q(n);
  apply(res.x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  double rnorm = norm2(r);
  res.relative_residual = rnorm / bnorm;
  if (observer) observer(0, res.x);
  if (res.relative_residual <= tol) {
    res.converged = true;
    return res;
  }

  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / jacobi_diagonal[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) {
      res.negative_curvature = true;
      res.iterations = it - 1;
      return res;
    }
    const double alpha = rz / pq;
    axpy(alpha, p, res.x);
    axpy(-alpha, q, r);
    rnorm = norm2(r);
    res.iterations = it;
    res.relative_residual = rnorm / bnorm;
    if (observer) observer(it, res.x);
    if (res.relative_residual <= tol) {
      res.converged = true;
      return res;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / jacobi_diagonal[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

KrylovResult minres(const ApplyFn& apply, std::span<const double> precond_diagonal,
                    std::span<const double> b, double tol, int max_iter) {
  const std::size_t n = b.size();
  if (precond_diagonal.size() != n) throw InvalidParameter("preconditioner dimension mismatch");
  KrylovResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }

  auto precond = [&](std::span<const double> v, std::span<double> out) {
    for (std::size_t i = 0; i < n; ++i) out[i] = v[i] / precond_diagonal[i];
  };

  std::vector<double> r1(b.begin(), b.end()), r2 = r1, y(n), v(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
  precond(r1, y);
  const double beta1 = std::sqrt(dot(r1, y));
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  std::vector<double> ax(n);

  auto true_residual = [&]() {
    apply(res.x, ax);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (b[i] - ax[i]) * (b[i] - ax[i]);
    return std::sqrt(s) / bnorm;
  };

  for (int it = 1; it <= max_iter; ++it) {
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    apply(v, y);
    if (it >= 2) axpy(-beta / oldb, r1, y);
    const double alfa = dot(v, y);
    axpy(-alfa / beta, r2, y);
    r1 = r2;
    r2 = y;
    precond(r2, y);
    oldb = beta;
    beta = std::sqrt(std::max(dot(r2, y), 0.0));
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gam = std::hypot(gbar, beta);
    gam = std::max(gam, std::numeric_limits<double>::epsilon());
    cs = gbar / gam;
    sn = beta / gam;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    w1 = w2;
    w2 = w;
    for (std::size_t i = 0; i < n; ++i) w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gam;
    axpy(phi, w, res.x);
    res.iterations = it;

    // phibar tracks the preconditioned residual norm; confirm with the true one.
    if (phibar / beta1 <= tol || beta == 0.0 || it == max_iter || it % 50 == 0) {
      res.relative_residual = true_residual();
      if (res.relative_residual <= tol) {
        res.converged = true;
        return res;
      }
      if (beta == 0.0) return res;
    }
  }
  return res;
}

LinearSolve solve_spd(const OperatorMatrix& A, const Field& b, double tol, int max_iter,
                      const IterateObserver& observer) {
  if (b.size() != A.size()) throw InvalidParameter("right-hand side does not match operator");
  ApplyFn apply = [&A](std::span<const double> v, std::span<double> out) { A.apply(v, out); };
  KrylovResult kr = pcg(apply, A.diagonal(), b.span(), tol, max_iter, {}, observer);
  if (!kr.converged) {
    throw ConvergenceError("conjugate gradients stopped at relative residual " +
                               std::to_string(kr.relative_residual) + " after " +
                               std::to_string(kr.iterations) + " iterations",
                           kr.relative_residual, kr.iterations);
  }
  return LinearSolve{Field(std::move(kr.x)), kr.iterations, kr.relative_residual};
}

struct OperatorFactorization::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

OperatorFactorization::OperatorFactorization(const OperatorMatrix& A) : impl_(std::make_unique<Impl>()), n_(A.size()) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(A.vals().size());
  for (std::size_t r = 0; r < n_; ++r) {
    for (std::size_t k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      triplets.emplace_back(static_cast<int>(r), static_cast<int>(A.cols()[k]), A.vals()[k]);
    }
  }
  Eigen::SparseMatrix<double> M(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  M.setFromTriplets(triplets.begin(), triplets.end());
  impl_->ldlt.compute(M);
  if (impl_->ldlt.info() != Eigen::Success) throw ConvergenceError("operator factorization failed", 0.0, 0);
}

OperatorFactorization::~OperatorFactorization() = default;
OperatorFactorization::OperatorFactorization(OperatorFactorization&&) noexcept = default;
OperatorFactorization& OperatorFactorization::operator=(OperatorFactorization&&) noexcept = default;

Field OperatorFactorization::solve(const Field& b) const {
  if (b.size() != n_) throw InvalidParameter("right-hand side does not match factorization");
  if (!all_finite(b.span())) throw InvalidParameter("right-hand side is not finite");
  Eigen::Map<const Eigen::VectorXd> rhs(b.values().data(), static_cast<Eigen::Index>(n_));
  Eigen::VectorXd x = impl_->ldlt.solve(rhs);
  return Field(std::vector<double>(x.data(), x.data() + x.size()));
}

Field solve_torsion(const OperatorMatrix& A, double tol) {
  const Field ones(A.size(), 1.0);
  return solve_spd(A, ones, tol, 20 * static_cast<int>(A.size())).solution;
}

Field solve_torsion(const Grid2D& grid, double gamma, double tol) {
  return solve_torsion(assemble_operator(grid, gamma), tol);
}

}  // namespace grushin
