#pragma once

// Energy of the translated problem
//   -Delta_gamma u + g(z, u) = lambda (u + u0)^p,   g(z, s) = u0^{-delta} - (s + u0)^{-delta},
// and its minimization over order intervals {lower <= u <= upper}.

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grushin/core.hpp"
#include "grushin/discretization.hpp"
#include "grushin/errors.hpp"
#include "grushin/field.hpp"

namespace grushin {

class ShiftedNonlinearity {
 public:
  /// Throws InvalidParameter unless delta > 0 and u0 > 0 at every node.
  ShiftedNonlinearity(Field u0, double delta);

  const Field& u0() const { return u0_; }
  double delta() const { return delta_; }
  std::size_t size() const { return u0_.size(); }

  /// -infinity when s + u0 <= 0.
  double g(std::size_t node, double s) const;
  /// +infinity when s + u0 <= 0.
  double G(std::size_t node, double s) const;
  /// d g / d s = delta (s + u0)^{-delta-1}.
  double g_prime(std::size_t node, double s) const;
  /// G(node, s + h) - G(node, s), accurate when h is small relative to s + u0.
  double G_difference(std::size_t node, double s, double h) const;

 private:
  Field u0_;
  double delta_;
};

inline double g_eval(const ShiftedNonlinearity& nl, std::size_t node, double s) { return nl.g(node, s); }
inline double G_eval(const ShiftedNonlinearity& nl, std::size_t node, double s) { return nl.G(node, s); }

struct EnergyFunctional {
  std::shared_ptr<const OperatorMatrix> op;
  std::shared_ptr<const ShiftedNonlinearity> nl;
  double lambda = 1.0;
  double p = 2.0;
  GrushinParams params{1.0};

  void validate() const;
  const Grid2D& grid() const { return op->grid(); }
  std::size_t size() const { return op->size(); }
  EnergyFunctional with_lambda(double new_lambda) const;
};

/// Value of the functional; +infinity when some node falls on the G = +inf branch.
double energy(const EnergyFunctional& F, const Field& u);

/// energy(u) - energy(0): removes the additive constant -lambda/(p+1) * int u0^{p+1}.
double energy_relative(const EnergyFunctional& F, const Field& u);

/// energy(u + step) - energy(u) evaluated term by term so that it stays
/// accurate when the step is small.
double energy_difference(const EnergyFunctional& F, const Field& u, const Field& step);

/// Strong-form residual A u + g(u) - lambda |u + u0|^{p-1}(u + u0); the gradient
/// of `energy` equals cell_volume times this field.
Field pde_residual(const EnergyFunctional& F, const Field& u);

/// Diagonal of the Hessian of the nonlinear terms (per unit cell volume).
Field nonlinear_hessian_diagonal(const EnergyFunctional& F, const Field& u);

struct IntervalConstraint {
  std::optional<Field> lower;
  std::optional<Field> upper;

  void validate(std::size_t n) const;
  bool feasible(const Field& u, double slack = 0.0) const;
  void project(Field& u) const;
};

/// Projection of `negative_gradient` onto the tangent cone of the box at u:
/// components pushing through an active bound are dropped.
Field project_onto_tangent_cone(const Field& negative_gradient, const Field& u, const IntervalConstraint& K);

/// Sup norm of the tangent-cone projection of -residual; zero exactly at discrete
/// KKT points. Throws InvalidParameter for infeasible u.
double projected_residual(const EnergyFunctional& F, const Field& u, const IntervalConstraint& K);

enum class DescentMetric {
  ProjectedNewton,  // two-metric projection: Newton-scaled on the free set
  ScaledGradient,   // Jacobi-scaled projected gradient
};

struct MinimizeOptions {
  double tol = 1e-8;
  int max_iter = 200;
  DescentMetric metric = DescentMetric::ProjectedNewton;
  double armijo = 1e-4;
  double shrink = 0.5;
  double min_step = 1e-14;
  /// Abort when the iterate's sup norm exceeds this (divergence probe).
  double sup_cap = std::numeric_limits<double>::infinity();
};

struct MinimizeTraceRow {
  int iter = 0;
  double energy = 0.0;  // relative to energy(0)
  double projected_residual = 0.0;
  double step_size = 0.0;
};

struct MinimizeResult {
  Field u;
  std::vector<MinimizeTraceRow> trace;
  bool converged = false;
  int linear_iterations = 0;
  std::string stop_reason;
};

class MinimizationError : public ConvergenceError {
 public:
  MinimizationError(const std::string& what, MinimizeResult result)
      : ConvergenceError(what, result.trace.empty() ? 0.0 : result.trace.back().projected_residual,
                         static_cast<int>(result.trace.size())),
        result_(std::move(result)) {}

  const MinimizeResult& result() const { return result_; }

 private:
  MinimizeResult result_;
};

/// Minimizes the energy over K starting from init (projected onto K). The
/// energy trace is non-increasing. Throws MinimizationError when the
/// tolerance is not met.
MinimizeResult minimize_interval(const EnergyFunctional& F, const IntervalConstraint& K, const Field& init,
                                 const MinimizeOptions& options = {});

/// CSV `iter,energy,projected_residual,step_size`.
void write_minimization_csv(const std::string& path, const std::vector<MinimizeTraceRow>& trace);

}  // namespace grushin
