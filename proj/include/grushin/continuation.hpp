#pragma once

// Branch of minimal solutions u_lambda of the translated problem and a
// bisection bracket for the extremal value of lambda.

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "grushin/core.hpp"
#include "grushin/discretization.hpp"
#include "grushin/singular.hpp"
#include "grushin/variational.hpp"

namespace grushin {

/// Everything that does not depend on lambda.
struct BranchProblem {
  std::shared_ptr<const OperatorMatrix> op;
  std::shared_ptr<const ShiftedNonlinearity> nl;
  double p = 2.0;
  GrushinParams params{1.0};
  Field torsion;

  /// Solves for u0 (ladder from the lower barrier) and wraps it.
  static BranchProblem build(const Grid2D& grid, double gamma, double delta, double p,
                             const SingularConfig& singular = {});

  EnergyFunctional at(double lambda) const;
  const Grid2D& grid() const { return op->grid(); }
};

struct ContinuationOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double initial_margin = 1.0;
  int max_margin_doublings = 40;
  double sup_cap = 1e4;  // failure once an iterate exceeds this
  double lambda_start = 0.1;
  double lambda_growth = 1.5;
  double lambda_max = 1e3;
  double relative_tol = 0.0;  // bisection also stops when hi - lo <= relative_tol * lo
  int max_bisections = 60;
  int jobs = 1;  // cold-start sweeps only

  void validate() const;
};

struct BranchPoint {
  double lambda = 0.0;
  Field solution;
  double energy_rel = 0.0;
  double residual = 0.0;  // unconstrained sup-norm residual
  int iterations = 0;     // minimization iterations over all margin levels
  bool converged = false;
  double sup_norm = 0.0;
  std::string failure;  // empty when converged
};

struct LambdaBracket {
  double lo = 0.0;  // largest converged lambda (0 when none)
  double hi = std::numeric_limits<double>::infinity();  // smallest failed lambda
  bool open = true;
  int bisections = 0;
  Field lo_solution;
  std::string note;

  double width() const { return hi - lo; }
};

struct Branch {
  std::vector<BranchPoint> points;
  LambdaBracket lambda_star_bracket;  // from the sweep alone: open unless a point failed
};

/// Minimizes over [0, start + margin], doubling the margin while the upper
/// bound is active. Failures are recorded in the point, not thrown.
BranchPoint solve_branch_point(const BranchProblem& problem, double lambda, const Field& start,
                               const ContinuationOptions& options = {});

Branch sweep(const BranchProblem& problem, const std::vector<double>& lambdas, bool warm_start,
             const ContinuationOptions& options = {});
Branch sweep(const Grid2D& grid, double gamma, double delta, double p, const std::vector<double>& lambdas,
             bool warm_start);

/// Geometric search for a failing lambda, then bisection. An open bracket is
/// returned (never a fabricated value) when nothing fails up to lambda_max.
LambdaBracket estimate_lambda_star(const BranchProblem& problem, double tol_lambda,
                                   const ContinuationOptions& options = {});
LambdaBracket estimate_lambda_star(const Grid2D& grid, double gamma, double delta, double p, double tol_lambda);

struct NonexistenceReport {
  double lambda = 0.0;
  int attempts = 0;
  int failures = 0;
  std::vector<double> final_sup_norms;

  bool all_failed() const { return attempts > 0 && failures == attempts; }
};

/// Runs the branch-point solver from `attempts` random nonnegative fields.
NonexistenceReport nonexistence_probe(const BranchProblem& problem, double lambda, int attempts, std::uint64_t seed,
                                      const ContinuationOptions& options = {});

/// Every adjacent converged pair lambda < mu has u_mu >= u_lambda - tol and
/// max(u_mu - u_lambda) > 0. Writes the first offending pair into detail.
bool branch_is_monotone(const Branch& branch, double tol, std::string* detail = nullptr);

/// CSV `lambda,converged,energy_rel,residual,iterations,sup_norm` with the
/// bracket as a trailing comment row.
void write_branch_csv(const std::string& path, const Branch& branch, const LambdaBracket* bracket = nullptr);

}  // namespace grushin
