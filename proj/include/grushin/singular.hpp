#pragma once

// Purely singular problem  -Delta_gamma u0 = u0^{-delta}, u0 = 0 on the boundary,
// solved as the limit of the truncated problems
//   -Delta_gamma u = -Phi_k'(u),   Phi_k'(s) = max{-s^{-delta}, -k} (s > 0), -k (s <= 0)
// along a geometric ladder k -> infinity.

#include <string>
#include <vector>

#include "grushin/discretization.hpp"
#include "grushin/field.hpp"

namespace grushin {

double phi_k_prime(double delta, double k, double s);

/// Primitive of phi_k_prime, normalised so that Phi_k(s) = -k s for s <= k^{-1/delta}.
double phi_k(double delta, double k, double s);

/// Second derivative where it exists (zero on the truncated branch).
double phi_k_second(double delta, double k, double s);

struct Barriers {
  Field lower;  // ||u1||_inf^{-delta/(1+delta)} u1
  Field upper;  // ((1+delta) u1)^{1/(1+delta)}
};

/// Throws InvalidParameter when u1 has a nonpositive node.
Barriers barriers(const Grid2D& grid, double gamma, double delta, const Field& u1);

/// Smallest truncation level for which the lower barrier is a subsolution.
double minimal_truncation_level(const Field& u1, double delta);

struct RegularizedOptions {
  double tol = 1e-10;        // on ||A u + Phi_k'(u)||_inf
  int max_newton = 100;
  int max_picard = 200;
  double cg_tol_floor = 1e-13;
};

struct RegularizedSolve {
  Field u;
  int newton_iterations = 0;
  int picard_iterations = 0;
  int linear_iterations = 0;
  double residual = 0.0;
  bool within_barriers = true;  // u in [lower - tol, upper + tol]
};

/// Solves the truncated problem at level k. `init` is projected onto the
/// barrier box first. Throws ConvergenceError on stagnation.
RegularizedSolve solve_regularized(const OperatorMatrix& A, double delta, double k, const Field& init,
                                   const Barriers& box, const RegularizedOptions& options = {});

/// Convenience overload assembling the operator, torsion and barriers itself.
RegularizedSolve solve_regularized(const Grid2D& grid, double gamma, double delta, double k,
                                   const Field& init, double tol);

/// Strong-form residual A u + Phi_k'(u).
Field regularized_residual(const OperatorMatrix& A, double delta, double k, const Field& u);

struct SingularConfig {
  double delta = 1.0;
  double k_start = 0.0;  // raised to the subsolution threshold if smaller
  double k_growth = 4.0;
  double inner_tol = 1e-10;
  double outer_tol = 1e-8;
  int max_levels = 60;
  int grace_levels = 6;
  double torsion_tol = 1e-13;

  /// Throws InvalidParameter naming the offending field.
  void validate() const;
};

enum class LadderStart { Lower, Upper };

struct LadderLevel {
  double k = 0.0;
  double sup_increment = 0.0;  // ||u_k - u_previous||_inf (previous = start field at level 0)
  int inner_iterations = 0;
  double residual = 0.0;
};

struct SingularSolution {
  Field u0;
  Field u1;
  Barriers box;
  std::vector<LadderLevel> trace;
  std::vector<Field> ladder;  // filled when keep_ladder is requested
};

SingularSolution solve_purely_singular(const OperatorMatrix& A, const SingularConfig& config,
                                       LadderStart start = LadderStart::Lower, bool keep_ladder = false);

SingularSolution solve_purely_singular(const Grid2D& grid, double gamma, const SingularConfig& config,
                                       LadderStart start = LadderStart::Lower, bool keep_ladder = false);

struct BarrierReport {
  bool ok = true;
  double max_lower_violation = 0.0;  // max(lower - tol - u0, 0)
  double max_upper_violation = 0.0;  // max(u0 - upper - tol, 0)
  std::vector<std::size_t> violating_nodes;

  double max_violation() const { return std::max(max_lower_violation, max_upper_violation); }
};

BarrierReport check_barriers(const Field& u0, const Field& lower, const Field& upper, double tol);

/// CSV `k,sup_increment,inner_iterations,residual`.
void write_ladder_csv(const std::string& path, const std::vector<LadderLevel>& trace);

/// True when the increments are non-increasing from some index at or before
/// the midpoint of the trace on.
bool increments_eventually_decreasing(const std::vector<LadderLevel>& trace);

}  // namespace grushin
