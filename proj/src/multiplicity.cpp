#include "grushin/multiplicity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grushin/csv.hpp"
#include "grushin/errors.hpp"
#include "grushin/linear_solver.hpp"

namespace grushin {

namespace {

double lq_sum(const Field& u, double q) {
  double s = 0.0;
  for (double v : u) s += std::pow(std::fabs(v), q);
  return s;
}

double a_dot(const OperatorMatrix& A, const Field& a, const Field& b) {
  return dot(a.span(), apply_operator(A, b).span());
}

}  // namespace

double rayleigh_quotient(const OperatorMatrix& A, const Field& u, double q) {
  if (!(q > 0.0)) throw InvalidParameter("exponent must be positive");
  const double vol = A.grid().cell_volume();
  const double N = vol * lq_sum(u, q);
  if (!(N > 0.0)) throw InvalidParameter("quotient of the zero field");
  return vol * a_dot(A, u, u) / std::pow(N, 2.0 / q);
}

Field sample_bubble(const Grid2D& grid, const GrushinParams& params, const BubbleSpec& spec) {
  validate_bubble(params, spec);
  return grid.sample([&](double x, double y) { return bubble_eval(params, spec, plane_point(x, y)); });
}

SobolevEstimate sobolev_estimate(const Grid2D& grid, double gamma, const GrushinParams& params,
                                 const SobolevOptions& options) {
  if (!(options.tol > 0.0) || options.max_iter < 1) throw InvalidParameter("bad Sobolev options");
  const double q = options.exponent ? *options.exponent : critical_exponent(params);
  if (!(q > 2.0)) throw InvalidParameter("exponent must exceed 2");
  const OperatorMatrix A(grid, gamma);
  const OperatorFactorization Ainv(A);
  const double vol = grid.cell_volume();

  Field u;
  if (options.seed) {
    u = *options.seed;
    if (u.size() != grid.size()) throw InvalidParameter("seed does not match grid");
  } else {
    const double xc = 0.5 * (grid.x_min() + grid.x_max()), yc = 0.5 * (grid.y_min() + grid.y_max());
    const double a = 0.5 * (grid.x_max() - grid.x_min()), b = 0.5 * (grid.y_max() - grid.y_min());
    const double eps = 0.25 * std::min(a, std::pow(b, 1.0 / (1.0 + gamma)));
    u = grid.sample([&](double x, double y) {
      const double d = gauge_plane(gamma, (x - xc) / eps, (y - yc) / std::pow(eps, 1.0 + gamma));
      const double sx = (x - xc) / a, sy = (y - yc) / b;
      return model_profile(params, d) * (1.0 - sx * sx) * (1.0 - sy * sy);
    });
  }
  for (auto& v : u) v = std::fabs(v);

  auto normalise = [&](Field& f) {
    const double s = std::pow(vol * lq_sum(f, q), -1.0 / q);
    for (auto& v : f) v *= s;
  };
  normalise(u);

  SobolevEstimate est;
  double R = rayleigh_quotient(A, u, q);
  est.history.push_back(R);
  double tau = 1.0;
  for (int it = 1; it <= options.max_iter; ++it) {
    // With N = 1, the A-gradient direction is R z - u where A z = |u|^{q-2} u.
    Field f(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) f[i] = std::pow(std::fabs(u[i]), q - 1.0);
    const Field z = Ainv.solve(f);
    Field d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = R * z[i] - u[i];

    tau = std::min(1.0, 2.0 * tau);
    bool accepted = false;
    Field v(u.size());
    double Rv = R;
    while (tau > 1e-10) {
      for (std::size_t i = 0; i < u.size(); ++i) v[i] = std::max(u[i] + tau * d[i], 0.0);
      if (lq_sum(v, q) > 0.0) {
        Rv = rayleigh_quotient(A, v, q);
        if (Rv < R) {
          accepted = true;
          break;
        }
      }
      tau *= 0.5;
    }
    est.iterations = it;
    if (!accepted) {
      est.quotient = R;
      est.minimizer = u;
      return est;
    }
    normalise(v);
    const double drop = (R - Rv) / Rv;
    u = std::move(v);
    R = Rv;
    est.history.push_back(R);
    if (drop <= options.tol) {
      est.quotient = R;
      est.minimizer = u;
      return est;
    }
  }
  throw ConvergenceError("Sobolev quotient did not stagnate within max_iter", R, options.max_iter);
}

double sobolev_constant(const Grid2D& grid, double gamma, const GrushinParams& params, double tol) {
  SobolevOptions options;
  options.tol = tol;
  return sobolev_estimate(grid, gamma, params, options).quotient;
}

double pass_threshold(double S, double lambda, const GrushinParams& params) {
  if (!(S > 0.0)) throw InvalidParameter("S must be positive");
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  const double Q = params.Q();
  if (!(Q > 2.0)) throw InvalidParameter("threshold needs Q > 2");
  return std::pow(S, 0.5 * Q) / (Q * std::pow(lambda, 0.5 * (Q - 2.0)));
}

namespace {

double tangent_cone_residual(const Field& r, const Field& v, const Field& floor) {
  double m = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    double g = -r[i];
    if (v[i] <= floor[i] && g < 0.0) g = 0.0;
    m = std::max(m, std::fabs(g));
  }
  return m;
}

// Equal spacing in an energy-weighted A-norm arc length, endpoints kept:
// segments above the floor energy get weight up to 1, the rest a small base
// weight, so nodes gather where the path crosses the barrier.
void reparametrize(const OperatorMatrix& A, std::vector<Field>& path, const std::vector<double>& energies,
                   double floor) {
  const std::size_t n = path.size();
  double top = floor;
  for (double e : energies) top = std::max(top, e);
  const double span = top - floor;
  auto weight = [&](std::size_t k) {
    constexpr double base = 0.02;
    return span > 0.0 ? base + std::max(energies[k] - floor, 0.0) / span : 1.0;
  };
  std::vector<double> s(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    const Field diff = path[k] - path[k - 1];
    const double len = std::sqrt(std::max(a_dot(A, diff, diff), 0.0));
    s[k] = s[k - 1] + 0.5 * (weight(k - 1) + weight(k)) * len;
  }
  if (!(s.back() > 0.0)) return;
  std::vector<Field> out(n);
  out.front() = path.front();
  out.back() = path.back();
  std::size_t seg = 1;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double target = s.back() * static_cast<double>(j) / static_cast<double>(n - 1);
    while (seg < n - 1 && s[seg] < target) ++seg;
    const double len = s[seg] - s[seg - 1];
    const double w = len > 0.0 ? std::clamp((target - s[seg - 1]) / len, 0.0, 1.0) : 0.0;
    out[j] = Field(path[seg].size());
    for (std::size_t i = 0; i < out[j].size(); ++i) out[j][i] = (1.0 - w) * path[seg - 1][i] + w * path[seg][i];
  }
  path = std::move(out);
}

}  // namespace

MountainPassResult mountain_pass(const EnergyFunctional& F, const Field& u_first, const Field& direction, int n_nodes,
                                 const MountainPassOptions& options) {
  F.validate();
  const OperatorMatrix& A = *F.op;
  const std::size_t N = F.size();
  if (u_first.size() != N || direction.size() != N) throw InvalidParameter("field sizes do not match");
  if (n_nodes < 3) throw InvalidParameter("n_nodes must be >= 3");
  if (options.reparam_every < 1 || options.max_sweeps < 1) throw InvalidParameter("bad mountain-pass options");
  if (!(sup_norm(direction.span()) > 0.0)) throw InvalidParameter("direction must be nonzero");
  const double vol = F.grid().cell_volume();
  const double sigma = 1e-4;
  const OperatorFactorization Ainv(A);

  MountainPassResult res;
  res.first_energy = energy_relative(F, u_first);

  // t0 by doubling until the far endpoint drops below the first energy. The
  // search starts small so that the energy barrier is not stepped over.
  double t = 1e-2 * std::max(sup_norm(u_first.span()), 1e-3) / sup_norm(direction.span());
  Field end;
  for (int i = 0;; ++i) {
    end = u_first + t * direction;
    for (std::size_t j = 0; j < N; ++j) end[j] = std::max(end[j], u_first[j]);
    if (energy_difference(F, u_first, end - u_first) < 0.0) break;
    if (i >= 200) throw ConvergenceError("no endpoint below the first energy along the direction", t, i);
    t *= 2.0;
  }
  res.t0 = t;

  std::vector<Field> path(static_cast<std::size_t>(n_nodes));
  for (int k = 0; k < n_nodes; ++k) {
    const double s = static_cast<double>(k) / (n_nodes - 1);
    path[k] = Field(N);
    for (std::size_t j = 0; j < N; ++j) path[k][j] = (1.0 - s) * u_first[j] + s * end[j];
  }
  path.back() = end;

  std::vector<double> energies(path.size()), taus(path.size(), 1.0);
  for (std::size_t k = 0; k < path.size(); ++k) energies[k] = energy_relative(F, path[k]);
  auto interior_max = [&]() {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); ++k) m = std::max(m, energies[k]);
    return m;
  };

  double block_max = interior_max();
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    res.path_max_before.push_back(interior_max());
    // Jacobi sweep: tangents come from the path at the start of the sweep.
    const std::vector<Field> frozen = path;
    std::vector<double> seg(path.size(), 0.0);
    for (std::size_t k = 1; k < path.size(); ++k) {
      const Field diff = frozen[k] - frozen[k - 1];
      seg[k] = std::sqrt(std::max(a_dot(A, diff, diff), 0.0));
    }
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      Field& v = path[k];
      // Nodes already below the first energy are left alone; descending them
      // only runs down the unbounded side of the pass.
      if (energies[k] <= res.first_energy) {
        if (options.record_trace) {
          res.trace.push_back({sweep, static_cast<int>(k), energies[k],
                               tangent_cone_residual(pde_residual(F, v), v, u_first)});
        }
        continue;
      }
      const Field r = pde_residual(F, v);
      const Field qv = Ainv.solve(r);
      const Field tan = frozen[k + 1] - frozen[k - 1];
      const double tt = a_dot(A, tan, tan);
      const double qt = tt > 0.0 ? a_dot(A, qv, tan) / tt : 0.0;
      Field d(N);
      for (std::size_t i = 0; i < N; ++i) d[i] = -(qv[i] - qt * tan[i]);

      // Trust region: a node moves at most half the shorter neighbouring
      // segment between two reparametrizations.
      const double dnorm = std::sqrt(std::max(a_dot(A, d, d), 0.0));
      const double cap = 0.5 * std::min(seg[k], seg[k + 1]) / options.reparam_every;
      double tau = std::min(1.0, 2.0 * taus[k]);
      if (dnorm > 0.0 && tau * dnorm > cap) tau = cap / dnorm;
      Field trial(N), step(N);
      bool moved = false;
      while (tau > 1e-10) {
        double pred = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
          trial[i] = std::max(v[i] + tau * d[i], u_first[i]);
          step[i] = trial[i] - v[i];
          pred += r[i] * step[i];
        }
        if (pred < 0.0) {
          const double dE = energy_difference(F, v, step);
          if (std::isfinite(dE) && dE <= sigma * vol * pred) {
            v = trial;
            energies[k] += dE;
            moved = true;
            break;
          }
        }
        tau *= 0.5;
      }
      taus[k] = moved ? tau : 1e-10;
      if (options.record_trace) {
        const Field rr = pde_residual(F, v);
        res.trace.push_back({sweep, static_cast<int>(k), energies[k], tangent_cone_residual(rr, v, u_first)});
      }
    }
    if (options.record_trace) {
      res.trace.push_back({sweep, 0, energies.front(), tangent_cone_residual(pde_residual(F, path.front()), path.front(), u_first)});
      res.trace.push_back({sweep, n_nodes - 1, energies.back(),
                           tangent_cone_residual(pde_residual(F, path.back()), path.back(), u_first)});
    }
    res.path_max.push_back(interior_max());
    res.sweeps = sweep;

    if (sweep % options.reparam_every == 0) {
      // Compare block-end maxima; reparametrization itself moves the maximum.
      const double m = interior_max();
      const bool stalled = sweep > options.reparam_every &&
                           std::fabs(block_max - m) <= options.stagnation * std::max(1.0, std::fabs(m));
      block_max = m;
      if (stalled) break;
      reparametrize(A, path, energies, res.first_energy);
      for (std::size_t k = 1; k + 1 < path.size(); ++k) energies[k] = energy_relative(F, path[k]);
      std::fill(taus.begin(), taus.end(), 1.0);
    }
  }

  std::size_t m = 0;
  for (std::size_t k = 1; k < path.size(); ++k) {
    if (energies[k] > energies[m]) m = k;
  }
  res.max_node = static_cast<int>(m);
  res.path = path;
  if (m == 0 || m + 1 == path.size()) {
    res.u_second = path[m];
    res.level = energies[m];
    res.report = "path collapsed: maximum at an endpoint";
    return res;
  }

  // Climbing image: ascend along the tangent, descend across it. Steps are
  // halved until the A^{-1}-norm of the residual does not grow.
  Field v = path[m];
  const Field tan = path[m + 1] - path[m - 1];
  const double tt = a_dot(A, tan, tan);
  if (tt > 0.0) {
    Field r = pde_residual(F, v);
    Field qv = Ainv.solve(r);
    double merit = dot(r.span(), qv.span());
    double step = options.climb_step;
    for (int it = 0; it < options.climb_iters && step > 1e-6; ++it) {
      if (sup_norm(r.span()) <= options.climb_switch) break;
      const double qt = a_dot(A, qv, tan) / tt;
      Field trial(N);
      for (std::size_t i = 0; i < N; ++i) {
        trial[i] = std::max(v[i] - step * (qv[i] - 2.0 * qt * tan[i]), u_first[i]);
      }
      Field tr = pde_residual(F, trial);
      if (!all_finite(tr.span())) {
        step *= 0.5;
        continue;
      }
      Field tq = Ainv.solve(tr);
      const double tm = dot(tr.span(), tq.span());
      if (tm <= merit) {
        v = std::move(trial);
        r = std::move(tr);
        qv = std::move(tq);
        merit = tm;
        step = std::min(options.climb_step, 2.0 * step);
      } else {
        step *= 0.5;
      }
    }
  }

  // Newton polish with MINRES on the indefinite Jacobian.
  Field r = pde_residual(F, v);
  double rn = std::sqrt(dot(r.span(), r.span()));
  bool newton_ok = sup_norm(r.span()) <= options.tol;
  for (int it = 0; it < options.newton_max && !newton_ok; ++it) {
    const Field c = nonlinear_hessian_diagonal(F, v);
    std::vector<double> pdiag(N);
    for (std::size_t i = 0; i < N; ++i) pdiag[i] = A.diagonal()[i] + std::fabs(c[i]);
    ApplyFn J = [&](std::span<const double> x, std::span<double> o) {
      A.apply(x, o);
      for (std::size_t i = 0; i < N; ++i) o[i] += c[i] * x[i];
    };
    const Field minus_r = -1.0 * r;
    KrylovResult kr = minres(J, pdiag, minus_r.span(), 1e-10, 20 * static_cast<int>(N));
    double alpha = 1.0;
    bool accepted = false;
    while (alpha > 1e-8) {
      Field trial = v;
      axpy(alpha, kr.x, trial.span());
      const Field tr = pde_residual(F, trial);
      const double tn = std::sqrt(dot(tr.span(), tr.span()));
      if (std::isfinite(tn) && tn <= (1.0 - 1e-4 * alpha) * rn) {
        v = std::move(trial);
        r = tr;
        rn = tn;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    newton_ok = sup_norm(r.span()) <= options.tol;
  }

  res.u_second = v;
  res.level = energy_relative(F, v);
  res.residual = sup_norm(r.span());
  res.distance = sup_diff(v.span(), u_first.span());
  res.min_excess = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i) res.min_excess = std::min(res.min_excess, v[i] - u_first[i]);
  res.ordered = res.min_excess >= -1e-10;
  res.level_at_first = std::fabs(res.level - res.first_energy) <= 1e-9 * std::max(1.0, std::fabs(res.first_energy));
  const bool certified = res.residual <= 10.0 * options.tol;
  res.found = certified && res.distance > options.min_distance;
  if (res.found) {
    res.report = "second solution found";
  } else if (!certified) {
    res.report = "polish did not certify the residual";
  } else {
    res.report = "critical point coincides with u_first";
  }
  if (res.level_at_first) res.report += "; level equals the first energy (degenerate or slow convergence)";
  return res;
}

void write_path_csv(const std::string& path, const std::vector<PathTraceRow>& trace) {
  CsvWriter csv(path, {"sweep", "node", "energy", "residual"});
  for (const auto& row : trace) {
    csv.cell(row.sweep).cell(row.node).cell(row.energy).cell(row.residual);
    csv.end_row();
  }
}

}  // namespace grushin
