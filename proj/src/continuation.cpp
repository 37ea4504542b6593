#include "grushin/continuation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "grushin/csv.hpp"
#include "grushin/errors.hpp"
#include "grushin/linear_solver.hpp"

namespace grushin {

BranchProblem BranchProblem::build(const Grid2D& grid, double gamma, double delta, double p,
                                   const SingularConfig& singular) {
  SingularConfig cfg = singular;
  cfg.delta = delta;
  auto op = std::make_shared<const OperatorMatrix>(grid, gamma);
  SingularSolution sol = solve_purely_singular(*op, cfg);
  BranchProblem bp;
  bp.op = op;
  bp.nl = std::make_shared<const ShiftedNonlinearity>(std::move(sol.u0), delta);
  bp.p = p;
  bp.params = GrushinParams(gamma);
  bp.torsion = std::move(sol.u1);
  return bp;
}

EnergyFunctional BranchProblem::at(double lambda) const {
  EnergyFunctional F{op, nl, lambda, p, params};
  F.validate();
  return F;
}

void ContinuationOptions::validate() const {
  if (!(tol > 0.0)) throw InvalidParameter("tol must be > 0");
  if (max_iter < 1) throw InvalidParameter("max_iter must be >= 1");
  if (!(initial_margin > 0.0)) throw InvalidParameter("initial_margin must be > 0");
  if (!(sup_cap > 0.0)) throw InvalidParameter("sup_cap must be > 0");
  if (!(lambda_start > 0.0)) throw InvalidParameter("lambda_start must be > 0");
  if (!(lambda_growth > 1.0)) throw InvalidParameter("lambda_growth must be > 1");
  if (!(lambda_max > 0.0)) throw InvalidParameter("lambda_max must be > 0");
  if (relative_tol < 0.0) throw InvalidParameter("relative_tol must be >= 0");
  if (jobs < 1) throw InvalidParameter("jobs must be >= 1");
}

BranchPoint solve_branch_point(const BranchProblem& problem, double lambda, const Field& start,
                               const ContinuationOptions& options) {
  options.validate();
  const EnergyFunctional F = problem.at(lambda);
  const std::size_t n = F.size();
  if (start.size() != n) throw InvalidParameter("start field does not match problem");

  BranchPoint pt;
  pt.lambda = lambda;
  MinimizeOptions mo;
  mo.tol = options.tol;
  mo.max_iter = options.max_iter;
  mo.sup_cap = options.sup_cap;

  Field base = start;
  for (auto& v : base) v = std::max(v, 0.0);
  double margin = std::max(options.initial_margin, sup_norm(base.span()));
  Field u = base;
  for (int level = 0; level <= options.max_margin_doublings; ++level) {
    IntervalConstraint K;
    K.lower = Field(n, 0.0);
    Field upper = base;
    for (auto& v : upper) v += margin;
    K.upper = upper;
    try {
      MinimizeResult res = minimize_interval(F, K, u, mo);
      pt.iterations += static_cast<int>(res.trace.size()) - 1;
      u = std::move(res.u);
    } catch (const MinimizationError& e) {
      pt.iterations += static_cast<int>(e.result().trace.size()) - 1;
      pt.solution = e.result().u;
      pt.sup_norm = sup_norm(pt.solution.span());
      pt.failure = pt.sup_norm > options.sup_cap ? "diverged" : "stagnated:" + e.result().stop_reason;
      pt.residual = sup_norm(pde_residual(F, pt.solution).span());
      pt.energy_rel = energy_relative(F, pt.solution);
      return pt;
    }
    bool upper_active = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] >= upper[i]) {
        upper_active = true;
        break;
      }
    }
    if (!upper_active) {
      pt.converged = true;
      break;
    }
    if (sup_norm(u.span()) > options.sup_cap) break;
    margin *= 2.0;
  }

  pt.solution = std::move(u);
  pt.sup_norm = sup_norm(pt.solution.span());
  pt.residual = sup_norm(pde_residual(F, pt.solution).span());
  pt.energy_rel = energy_relative(F, pt.solution);
  if (!pt.converged) pt.failure = pt.sup_norm > options.sup_cap ? "diverged" : "margin_exhausted";
  return pt;
}

namespace {

LambdaBracket bracket_from_points(const std::vector<BranchPoint>& points) {
  LambdaBracket b;
  for (const auto& pt : points) {
    if (!pt.converged) b.hi = std::min(b.hi, pt.lambda);
  }
  for (const auto& pt : points) {
    if (pt.converged && pt.lambda < b.hi && pt.lambda >= b.lo) {
      b.lo = pt.lambda;
      b.lo_solution = pt.solution;
    }
  }
  b.open = !std::isfinite(b.hi);
  return b;
}

}  // namespace

Branch sweep(const BranchProblem& problem, const std::vector<double>& lambdas, bool warm_start,
             const ContinuationOptions& options) {
  options.validate();
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) throw InvalidParameter("lambdas must be positive");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw InvalidParameter("lambdas must be strictly increasing");
  }
  Branch br;
  const Field zero = problem.grid().zeros();
  if (warm_start) {
    Field start = zero;
    for (double lambda : lambdas) {
      BranchPoint pt = solve_branch_point(problem, lambda, start, options);
      if (pt.converged) start = pt.solution;
      br.points.push_back(std::move(pt));
    }
  } else {
    br.points.resize(lambdas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next++; i < lambdas.size(); i = next++) {
        br.points[i] = solve_branch_point(problem, lambdas[i], zero, options);
      }
    };
    const int threads = std::min<int>(options.jobs, static_cast<int>(lambdas.size()));
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
  }
  br.lambda_star_bracket = bracket_from_points(br.points);
  return br;
}

Branch sweep(const Grid2D& grid, double gamma, double delta, double p, const std::vector<double>& lambdas,
             bool warm_start) {
  return sweep(BranchProblem::build(grid, gamma, delta, p), lambdas, warm_start);
}

LambdaBracket estimate_lambda_star(const BranchProblem& problem, double tol_lambda,
                                   const ContinuationOptions& options) {
  options.validate();
  if (!(tol_lambda > 0.0)) throw InvalidParameter("tol_lambda must be > 0");
  LambdaBracket b;
  const Field zero = problem.grid().zeros();

  if (options.lambda_start > options.lambda_max) {
    b.note = "lambda_start exceeds lambda_max; nothing was attempted";
    return b;
  }
  double lambda = options.lambda_start;
  BranchPoint pt = solve_branch_point(problem, lambda, zero, options);
  if (!pt.converged) {
    // Step down until something converges.
    for (int i = 0; i < 30 && !pt.converged; ++i) {
      b.hi = lambda;
      lambda *= 0.5;
      pt = solve_branch_point(problem, lambda, zero, options);
    }
    if (!pt.converged) {
      b.note = "no converged lambda found below lambda_start";
      return b;
    }
    b.lo = lambda;
    b.lo_solution = pt.solution;
  } else {
    b.lo = lambda;
    b.lo_solution = pt.solution;
    while (true) {
      const double next = std::min(lambda * options.lambda_growth, options.lambda_max);
      if (next <= lambda) {
        b.note = "no failure up to lambda_max";
        return b;
      }
      lambda = next;
      pt = solve_branch_point(problem, lambda, b.lo_solution, options);
      if (!pt.converged) {
        b.hi = lambda;
        break;
      }
      b.lo = lambda;
      b.lo_solution = pt.solution;
    }
  }

  b.open = false;
  while (b.hi - b.lo > tol_lambda && !(options.relative_tol > 0.0 && b.hi - b.lo <= options.relative_tol * b.lo) &&
         b.bisections < options.max_bisections) {
    const double mid = 0.5 * (b.lo + b.hi);
    pt = solve_branch_point(problem, mid, b.lo_solution, options);
    ++b.bisections;
    if (pt.converged) {
      b.lo = mid;
      b.lo_solution = pt.solution;
    } else {
      b.hi = mid;
    }
  }
  return b;
}

LambdaBracket estimate_lambda_star(const Grid2D& grid, double gamma, double delta, double p, double tol_lambda) {
  return estimate_lambda_star(BranchProblem::build(grid, gamma, delta, p), tol_lambda);
}

NonexistenceReport nonexistence_probe(const BranchProblem& problem, double lambda, int attempts, std::uint64_t seed,
                                      const ContinuationOptions& options) {
  if (attempts < 1) throw InvalidParameter("attempts must be >= 1");
  NonexistenceReport rep;
  rep.lambda = lambda;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = std::max(1.0, sup_norm(problem.nl->u0().span()));
  const std::size_t n = problem.grid().size();
  for (int a = 0; a < attempts; ++a) {
    const double amplitude = scale * std::ldexp(1.0, a - 2);
    Field init(n);
    for (auto& v : init) v = amplitude * unit(rng);
    BranchPoint pt = solve_branch_point(problem, lambda, init, options);
    ++rep.attempts;
    if (!pt.converged) ++rep.failures;
    rep.final_sup_norms.push_back(pt.sup_norm);
  }
  return rep;
}

bool branch_is_monotone(const Branch& branch, double tol, std::string* detail) {
  const BranchPoint* prev = nullptr;
  for (const auto& pt : branch.points) {
    if (!pt.converged) continue;
    if (prev) {
      double min_gap = std::numeric_limits<double>::infinity();
      double max_gap = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pt.solution.size(); ++i) {
        const double d = pt.solution[i] - prev->solution[i];
        min_gap = std::min(min_gap, d);
        max_gap = std::max(max_gap, d);
      }
      if (min_gap < -tol || !(max_gap > 0.0)) {
        if (detail) {
          *detail = "lambda " + format_double(prev->lambda) + " -> " + format_double(pt.lambda) +
                    ": min difference " + format_double(min_gap) + ", max difference " + format_double(max_gap);
        }
        return false;
      }
    }
    prev = &pt;
  }
  return true;
}

void write_branch_csv(const std::string& path, const Branch& branch, const LambdaBracket* bracket) {
  CsvWriter csv(path, {"lambda", "converged", "energy_rel", "residual", "iterations", "sup_norm"});
  for (const auto& pt : branch.points) {
    csv.cell(pt.lambda).cell(pt.converged).cell(pt.energy_rel).cell(pt.residual).cell(pt.iterations).cell(pt.sup_norm);
    csv.end_row();
  }
  const LambdaBracket& b = bracket ? *bracket : branch.lambda_star_bracket;
  if (b.open) {
    csv.comment("lambda_star_bracket=open lo=" + format_double(b.lo));
  } else {
    csv.comment("lambda_star_bracket lo=" + format_double(b.lo) + " hi=" + format_double(b.hi));
  }
}

}  // namespace grushin
