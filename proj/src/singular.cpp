#include "grushin/singular.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "grushin/csv.hpp"
#include "grushin/errors.hpp"
#include "grushin/linear_solver.hpp"

namespace grushin {

double phi_k_prime(double delta, double k, double s) {
  if (s <= 0.0) return -k;
  return std::max(-std::pow(s, -delta), -k);
}

double phi_k(double delta, double k, double s) {
  const double sk = std::pow(k, -1.0 / delta);
  if (s <= sk) return -k * s;
  const double tail = (delta == 1.0) ? std::log(s / sk)
                                     : (std::pow(s, 1.0 - delta) - std::pow(sk, 1.0 - delta)) / (1.0 - delta);
  return -k * sk - tail;
}

double phi_k_second(double delta, double k, double s) {
  if (s <= 0.0) return 0.0;
  const double sk = std::pow(k, -1.0 / delta);
  if (s <= sk) return 0.0;
  return delta * std::pow(s, -delta - 1.0);
}

double minimal_truncation_level(const Field& u1, double delta) {
  return std::pow(sup_norm(u1.span()), -delta / (1.0 + delta));
}

Barriers barriers(const Grid2D& grid, double /*gamma*/, double delta, const Field& u1) {
  if (u1.size() != grid.size()) throw InvalidParameter("torsion field does not match grid");
  if (!(delta > 0.0)) throw InvalidParameter("delta must be positive");
  for (std::size_t i = 0; i < u1.size(); ++i) {
    if (!(u1[i] > 0.0)) throw InvalidParameter("torsion function has a nonpositive node " + std::to_string(i));
  }
  const double scale = minimal_truncation_level(u1, delta);
  Barriers b{Field(u1.size()), Field(u1.size())};
  for (std::size_t i = 0; i < u1.size(); ++i) {
    b.lower[i] = scale * u1[i];
    b.upper[i] = std::pow((1.0 + delta) * u1[i], 1.0 / (1.0 + delta));
  }
  return b;
}

Field regularized_residual(const OperatorMatrix& A, double delta, double k, const Field& u) {
  Field r = apply_operator(A, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += phi_k_prime(delta, k, u[i]);
  return r;
}

namespace {

double regularized_energy(const OperatorMatrix& A, double delta, double k, const Field& u, std::vector<double>& work) {
  A.apply(u.span(), work);
  double e = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) e += 0.5 * u[i] * work[i] + phi_k(delta, k, u[i]);
  return e;
}

bool in_box(const Field& u, const Barriers& box, double tol) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < box.lower[i] - tol || u[i] > box.upper[i] + tol) return false;
  }
  return true;
}

}  // namespace

RegularizedSolve solve_regularized(const OperatorMatrix& A, double delta, double k, const Field& init,
                                   const Barriers& box, const RegularizedOptions& options) {
  if (!(delta > 0.0) || !(k > 0.0)) throw InvalidParameter("delta and k must be positive");
  const std::size_t n = A.size();
  if (init.size() != n) throw InvalidParameter("initial field does not match operator");

  RegularizedSolve out;
  out.u = init;
  clamp_into(out.u, &box.lower, &box.upper);

  std::vector<double> work(n), jdiag(n);
  Field r = regularized_residual(A, delta, k, out.u);
  double rnorm = sup_norm(r.span());
  double energy = regularized_energy(A, delta, k, out.u, work);

  ApplyFn jacobian = [&](std::span<const double> v, std::span<double> o) {
    A.apply(v, o);
    for (std::size_t i = 0; i < n; ++i) o[i] += (jdiag[i] - A.diagonal()[i]) * v[i];
  };

  bool stalled = false;
  while (rnorm > options.tol && out.newton_iterations < options.max_newton) {
    for (std::size_t i = 0; i < n; ++i) jdiag[i] = A.diagonal()[i] + phi_k_second(delta, k, out.u[i]);
    Field minus_r = -1.0 * r;
    const double eta = std::clamp(1e-3 * rnorm, options.cg_tol_floor, 1e-4);
    KrylovResult kr = pcg(jacobian, jdiag, minus_r.span(), eta, 20 * static_cast<int>(n));
    out.linear_iterations += kr.iterations;
    ++out.newton_iterations;

    // Armijo on the convex energy, with a residual-decrease fallback once the
    // energy differences are below roundoff.
    const double slope = dot(r.span(), kr.x);
    double alpha = 1.0;
    bool accepted = false;
    Field trial(n);
    Field trial_r;
    while (alpha > 1e-12) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = out.u[i] + alpha * kr.x[i];
      const double e_trial = regularized_energy(A, delta, k, trial, work);
      trial_r = regularized_residual(A, delta, k, trial);
      const double rn_trial = sup_norm(trial_r.span());
      if (e_trial <= energy + 1e-4 * alpha * slope || rn_trial <= (1.0 - 1e-4 * alpha) * rnorm) {
        out.u = trial;
        r = std::move(trial_r);
        rnorm = rn_trial;
        energy = e_trial;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
  }

  if (rnorm > options.tol && stalled) {
    // Picard fallback: A u_new = -Phi_k'(u_old).
    while (rnorm > options.tol && out.picard_iterations < options.max_picard) {
      Field rhs(n);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = -phi_k_prime(delta, k, out.u[i]);
      KrylovResult kr = pcg([&A](std::span<const double> v, std::span<double> o) { A.apply(v, o); },
                            A.diagonal(), rhs.span(), options.cg_tol_floor, 20 * static_cast<int>(n), out.u.span());
      out.linear_iterations += kr.iterations;
      ++out.picard_iterations;
      out.u = Field(std::move(kr.x));
      r = regularized_residual(A, delta, k, out.u);
      rnorm = sup_norm(r.span());
    }
  }

  out.residual = rnorm;
  if (rnorm > options.tol) {
    throw ConvergenceError("truncated problem at k = " + std::to_string(k) + " stagnated with residual " +
                               std::to_string(rnorm),
                           rnorm, out.newton_iterations + out.picard_iterations);
  }
  out.within_barriers = in_box(out.u, box, options.tol);
  return out;
}

RegularizedSolve solve_regularized(const Grid2D& grid, double gamma, double delta, double k, const Field& init,
                                   double tol) {
  const OperatorMatrix A = assemble_operator(grid, gamma);
  const Field u1 = solve_torsion(A, 1e-13);
  RegularizedOptions options;
  options.tol = tol;
  return solve_regularized(A, delta, k, init, barriers(grid, gamma, delta, u1), options);
}

void SingularConfig::validate() const {
  if (!(delta > 0.0)) throw InvalidParameter("delta must be > 0");
  if (!(k_growth > 1.0)) throw InvalidParameter("k_growth must be > 1");
  if (!(inner_tol > 0.0)) throw InvalidParameter("inner_tol must be > 0");
  if (!(outer_tol > 0.0)) throw InvalidParameter("outer_tol must be > 0");
  if (k_start < 0.0) throw InvalidParameter("k_start must be >= 0");
  if (max_levels < 2) throw InvalidParameter("max_levels must be >= 2");
}

SingularSolution solve_purely_singular(const OperatorMatrix& A, const SingularConfig& config, LadderStart start,
                                       bool keep_ladder) {
  config.validate();
  SingularSolution sol;
  sol.u1 = solve_torsion(A, config.torsion_tol);
  sol.box = barriers(A.grid(), A.gamma(), config.delta, sol.u1);

  RegularizedOptions options;
  options.tol = config.inner_tol;

  double k = std::max(config.k_start, minimal_truncation_level(sol.u1, config.delta));
  Field previous = (start == LadderStart::Lower) ? sol.box.lower : sol.box.upper;
  int rising = 0;
  for (int level = 0; level < config.max_levels; ++level, k *= config.k_growth) {
    RegularizedSolve rs = solve_regularized(A, config.delta, k, previous, sol.box, options);
    LadderLevel row;
    row.k = k;
    row.sup_increment = sup_diff(rs.u.span(), previous.span());
    row.inner_iterations = rs.newton_iterations + rs.picard_iterations;
    row.residual = rs.residual;
    sol.trace.push_back(row);
    if (keep_ladder) sol.ladder.push_back(rs.u);
    previous = std::move(rs.u);

    if (level > 0 && row.sup_increment <= config.outer_tol) {
      sol.u0 = std::move(previous);
      return sol;
    }
    if (level >= 2) {
      const double prev_inc = sol.trace[sol.trace.size() - 2].sup_increment;
      rising = (row.sup_increment > prev_inc) ? rising + 1 : 0;
      if (level >= config.grace_levels && rising >= 3) {
        throw ConvergenceError("truncation ladder increments keep growing after the grace period",
                               row.sup_increment, level + 1);
      }
    }
  }
  throw ConvergenceError("truncation ladder did not reach outer_tol within max_levels",
                         sol.trace.back().sup_increment, config.max_levels);
}

SingularSolution solve_purely_singular(const Grid2D& grid, double gamma, const SingularConfig& config,
                                       LadderStart start, bool keep_ladder) {
  return solve_purely_singular(assemble_operator(grid, gamma), config, start, keep_ladder);
}

BarrierReport check_barriers(const Field& u0, const Field& lower, const Field& upper, double tol) {
  if (u0.size() != lower.size() || u0.size() != upper.size()) throw InvalidParameter("field size mismatch");
  BarrierReport rep;
  for (std::size_t i = 0; i < u0.size(); ++i) {
    const double lo = lower[i] - tol - u0[i];
    const double hi = u0[i] - upper[i] - tol;
    if (lo > 0.0 || hi > 0.0) rep.violating_nodes.push_back(i);
    rep.max_lower_violation = std::max(rep.max_lower_violation, lo);
    rep.max_upper_violation = std::max(rep.max_upper_violation, hi);
  }
  rep.ok = rep.violating_nodes.empty();
  return rep;
}

void write_ladder_csv(const std::string& path, const std::vector<LadderLevel>& trace) {
  CsvWriter csv(path, {"k", "sup_increment", "inner_iterations", "residual"});
  for (const auto& row : trace) {
    csv.cell(row.k).cell(row.sup_increment).cell(row.inner_iterations).cell(row.residual);
    csv.end_row();
  }
}

bool increments_eventually_decreasing(const std::vector<LadderLevel>& trace) {
  if (trace.size() < 3) return true;
  // Skip level 0, whose increment is measured against the starting barrier.
  const std::size_t first = 1;
  const std::size_t last = trace.size() - 1;
  const std::size_t latest_start = first + (last - first) / 2;
  for (std::size_t s = first; s <= latest_start; ++s) {
    bool ok = true;
    for (std::size_t i = s + 1; i <= last; ++i) {
      if (trace[i].sup_increment > trace[i - 1].sup_increment) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

}  // namespace grushin
