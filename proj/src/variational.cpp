#include "grushin/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "grushin/csv.hpp"
#include "grushin/linear_solver.hpp"

namespace grushin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// |a|^{p-1} a
double signed_power(double a, double p) { return std::copysign(std::pow(std::fabs(a), p), a); }

// (|a + h|^{q} - |a|^{q}) / q, accurate for small h when a > 0.
double power_difference(double a, double h, double q) {
  const double b = a + h;
  if (a > 0.0 && b > 0.0) return std::pow(a, q) * std::expm1(q * std::log1p(h / a)) / q;
  return (std::pow(std::fabs(b), q) - std::pow(std::fabs(a), q)) / q;
}

}  // namespace

ShiftedNonlinearity::ShiftedNonlinearity(Field u0, double delta) : u0_(std::move(u0)), delta_(delta) {
  if (!(delta_ > 0.0)) throw InvalidParameter("delta must be positive");
  for (std::size_t i = 0; i < u0_.size(); ++i) {
    if (!(u0_[i] > 0.0)) throw InvalidParameter("singular solution must be positive at node " + std::to_string(i));
  }
}

double ShiftedNonlinearity::g(std::size_t node, double s) const {
  const double a = s + u0_[node];
  if (!(a > 0.0)) return -kInf;
  return std::pow(u0_[node], -delta_) - std::pow(a, -delta_);
}

double ShiftedNonlinearity::g_prime(std::size_t node, double s) const {
  const double a = s + u0_[node];
  if (!(a > 0.0)) return kInf;
  return delta_ * std::pow(a, -delta_ - 1.0);
}

double ShiftedNonlinearity::G(std::size_t node, double s) const {
  const double u0 = u0_[node];
  const double t = s / u0;
  if (!(t > -1.0)) return kInf;
  const double scale = std::pow(u0, 1.0 - delta_);
  if (std::fabs(t) < 0.05) {
    // sum_{k>=2} (-1)^k delta (delta+1) ... (delta+k-2) / k! t^k
    double c = 0.5 * delta_;
    double tk = t * t;
    double sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      const double term = c * tk;
      sum += term;
      if (std::fabs(term) <= 1e-18 * std::fabs(sum)) break;
      c *= -(delta_ + k - 1.0) / (k + 1.0);
      tk *= t;
    }
    return scale * sum;
  }
  const double integral =
      (delta_ == 1.0) ? std::log1p(t) : std::expm1((1.0 - delta_) * std::log1p(t)) / (1.0 - delta_);
  return scale * (t - integral);
}

double ShiftedNonlinearity::G_difference(std::size_t node, double s, double h) const {
  const double u0 = u0_[node];
  const double a = s + u0;
  const double b = a + h;
  if (!(a > 0.0) || !(b > 0.0)) return G(node, s + h) - G(node, s);
  // int_s^{s+h} (tau + u0)^{-delta} d tau
  const double r = std::log1p(h / a);
  const double integral =
      (delta_ == 1.0) ? r : std::pow(a, 1.0 - delta_) * std::expm1((1.0 - delta_) * r) / (1.0 - delta_);
  return std::pow(u0, -delta_) * h - integral;
}

void EnergyFunctional::validate() const {
  if (!op || !nl) throw InvalidParameter("energy functional needs an operator and a nonlinearity");
  if (op->size() != nl->size()) throw InvalidParameter("operator and singular solution sizes differ");
  if (!(p >= 1.0)) throw InvalidParameter("p must be >= 1");
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
}

EnergyFunctional EnergyFunctional::with_lambda(double new_lambda) const {
  EnergyFunctional F = *this;
  F.lambda = new_lambda;
  return F;
}

double energy(const EnergyFunctional& F, const Field& u) {
  if (u.size() != F.size()) throw InvalidParameter("field does not match functional");
  const Field Au = apply_operator(*F.op, u);
  const Field& u0 = F.nl->u0();
  double quad = 0.0, conv = 0.0, power = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double Gi = F.nl->G(i, u[i]);
    if (Gi == kInf) return kInf;
    quad += u[i] * Au[i];
    conv += Gi;
    power += std::pow(std::fabs(u[i] + u0[i]), F.p + 1.0);
  }
  return F.grid().cell_volume() * (0.5 * quad + conv - F.lambda / (F.p + 1.0) * power);
}

double energy_relative(const EnergyFunctional& F, const Field& u) {
  const Field zero(u.size(), 0.0);
  return energy_difference(F, zero, u);
}

double energy_difference(const EnergyFunctional& F, const Field& u, const Field& step) {
  if (u.size() != F.size() || step.size() != F.size()) throw InvalidParameter("field does not match functional");
  const Field Au = apply_operator(*F.op, u);
  const Field As = apply_operator(*F.op, step);
  const Field& u0 = F.nl->u0();
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double dG = F.nl->G_difference(i, u[i], step[i]);
    if (std::isinf(dG) || std::isnan(dG)) return kInf;
    sum += step[i] * Au[i] + 0.5 * step[i] * As[i] + dG -
           F.lambda * power_difference(u[i] + u0[i], step[i], F.p + 1.0);
  }
  return F.grid().cell_volume() * sum;
}

Field pde_residual(const EnergyFunctional& F, const Field& u) {
  if (u.size() != F.size()) throw InvalidParameter("field does not match functional");
  Field r = apply_operator(*F.op, u);
  const Field& u0 = F.nl->u0();
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] += F.nl->g(i, u[i]) - F.lambda * signed_power(u[i] + u0[i], F.p);
  }
  return r;
}

Field nonlinear_hessian_diagonal(const EnergyFunctional& F, const Field& u) {
  Field c(u.size());
  const Field& u0 = F.nl->u0();
  for (std::size_t i = 0; i < u.size(); ++i) {
    c[i] = F.nl->g_prime(i, u[i]) - F.lambda * F.p * std::pow(std::fabs(u[i] + u0[i]), F.p - 1.0);
  }
  return c;
}

void IntervalConstraint::validate(std::size_t n) const {
  if (lower && lower->size() != n) throw InvalidParameter("lower bound has the wrong size");
  if (upper && upper->size() != n) throw InvalidParameter("upper bound has the wrong size");
  if (lower && upper) {
    for (std::size_t i = 0; i < n; ++i) {
      if ((*lower)[i] > (*upper)[i]) throw InvalidParameter("empty interval at node " + std::to_string(i));
    }
  }
}

bool IntervalConstraint::feasible(const Field& u, double slack) const {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (lower && u[i] < (*lower)[i] - slack) return false;
    if (upper && u[i] > (*upper)[i] + slack) return false;
  }
  return true;
}

void IntervalConstraint::project(Field& u) const {
  clamp_into(u, lower ? &*lower : nullptr, upper ? &*upper : nullptr);
}

Field project_onto_tangent_cone(const Field& negative_gradient, const Field& u, const IntervalConstraint& K) {
  K.validate(u.size());
  if (negative_gradient.size() != u.size()) throw InvalidParameter("gradient does not match field");
  Field v = negative_gradient;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (K.lower && u[i] <= (*K.lower)[i] && v[i] < 0.0) v[i] = 0.0;
    if (K.upper && u[i] >= (*K.upper)[i] && v[i] > 0.0) v[i] = 0.0;
  }
  return v;
}

double projected_residual(const EnergyFunctional& F, const Field& u, const IntervalConstraint& K) {
  K.validate(u.size());
  if (!K.feasible(u)) throw InvalidParameter("point lies outside the interval");
  const Field r = pde_residual(F, u);
  return sup_norm(project_onto_tangent_cone(-1.0 * r, u, K).span());
}

MinimizeResult minimize_interval(const EnergyFunctional& F, const IntervalConstraint& K, const Field& init,
                                 const MinimizeOptions& options) {
  F.validate();
  const std::size_t n = F.size();
  K.validate(n);
  if (init.size() != n) throw InvalidParameter("initial field does not match functional");
  if (!(options.tol > 0.0) || options.max_iter < 1) throw InvalidParameter("bad minimization options");

  MinimizeResult out;
  out.u = init;
  K.project(out.u);
  if (!all_finite(out.u.span())) throw InvalidParameter("initial field is not finite");
  double e_rel = energy_relative(F, out.u);
  if (std::isinf(e_rel)) throw InvalidParameter("initial field leaves the domain of the energy");

  const double vol = F.grid().cell_volume();
  const std::vector<double>& adiag = F.op->diagonal();
  const Field* lo = K.lower ? &*K.lower : nullptr;
  const Field* up = K.upper ? &*K.upper : nullptr;

  Field r = pde_residual(F, out.u);
  double last_step = 0.0;
  std::vector<char> binding(n);
  std::vector<double> cdiag(n), pdiag(n);

  for (int iter = 0;; ++iter) {
    const double pr = sup_norm(project_onto_tangent_cone(-1.0 * r, out.u, K).span());
    out.trace.push_back({iter, e_rel, pr, last_step});
    if (pr <= options.tol) {
      out.converged = true;
      out.stop_reason = "converged";
      return out;
    }
    if (iter >= options.max_iter) {
      out.stop_reason = "max_iter";
      break;
    }
    if (sup_norm(out.u.span()) > options.sup_cap) {
      out.stop_reason = "sup_cap";
      break;
    }

    const Field c = nonlinear_hessian_diagonal(F, out.u);
    for (std::size_t i = 0; i < n; ++i) cdiag[i] = adiag[i] + std::max(c[i], 0.0);

    // Bertsekas epsilon-active set.
    double width = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double t = out.u[i] - r[i] / cdiag[i];
      if (lo) t = std::max(t, (*lo)[i]);
      if (up) t = std::min(t, (*up)[i]);
      width = std::max(width, std::fabs(out.u[i] - t));
    }
    const double eps = std::min(1e-3, width);
    for (std::size_t i = 0; i < n; ++i) {
      binding[i] = (lo && out.u[i] <= (*lo)[i] + eps && r[i] > 0.0) ||
                   (up && out.u[i] >= (*up)[i] - eps && r[i] < 0.0);
    }

    Field d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i] / cdiag[i];

    if (options.metric == DescentMetric::ProjectedNewton) {
      Field rhs(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) rhs[i] = binding[i] ? 0.0 : -r[i];
      std::vector<double> masked(n);
      auto reduced = [&](const std::vector<double>& shift) {
        return [&, shift](std::span<const double> v, std::span<double> o) {
          for (std::size_t i = 0; i < n; ++i) masked[i] = binding[i] ? 0.0 : v[i];
          F.op->apply(masked, o);
          for (std::size_t i = 0; i < n; ++i) o[i] = binding[i] ? v[i] : o[i] + shift[i] * v[i];
        };
      };
      const double eta = std::clamp(pr, 1e-12, 1e-3);
      const int max_cg = 4 * static_cast<int>(n);
      auto free_slope = [&](const std::vector<double>& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!binding[i]) s += r[i] * x[i];
        }
        return s;
      };

      // Full Hessian first, then the convex part A + diag(g').
      std::vector<double> shift(c.begin(), c.end());
      for (std::size_t i = 0; i < n; ++i) pdiag[i] = binding[i] ? 1.0 : std::max(adiag[i] + c[i], adiag[i]);
      KrylovResult kr = pcg(reduced(shift), pdiag, rhs.span(), eta, max_cg);
      out.linear_iterations += kr.iterations;
      bool ok = !kr.negative_curvature && kr.relative_residual < 0.5 && free_slope(kr.x) < 0.0;
      if (!ok) {
        for (std::size_t i = 0; i < n; ++i) {
          shift[i] = std::max(F.nl->g_prime(i, out.u[i]), 0.0);
          pdiag[i] = binding[i] ? 1.0 : adiag[i] + shift[i];
        }
        kr = pcg(reduced(shift), pdiag, rhs.span(), eta, max_cg);
        out.linear_iterations += kr.iterations;
        ok = !kr.negative_curvature && free_slope(kr.x) < 0.0;
      }
      if (ok) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!binding[i]) d[i] = kr.x[i];
        }
      }
    }

    double free_pred = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!binding[i]) free_pred += r[i] * d[i];
    }

    // Projected Armijo; the residual-decrease branch only takes steps that do
    // not raise the energy, so the trace stays monotone.
    double alpha = 1.0;
    bool accepted = false;
    Field trial(n), step(n);
    while (alpha >= options.min_step) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = out.u[i] + alpha * d[i];
      K.project(trial);
      double pred = alpha * free_pred;
      for (std::size_t i = 0; i < n; ++i) {
        step[i] = trial[i] - out.u[i];
        if (binding[i]) pred += r[i] * step[i];
      }
      const double dE = energy_difference(F, out.u, step);
      if (std::isfinite(dE) && dE <= 0.0) {
        Field trial_r = pde_residual(F, trial);
        bool take = dE <= options.armijo * vol * pred;
        if (!take) {
          const double trial_pr = sup_norm(project_onto_tangent_cone(-1.0 * trial_r, trial, K).span());
          take = trial_pr <= (1.0 - 1e-4 * alpha) * pr;
        }
        if (take) {
          out.u = trial;
          r = std::move(trial_r);
          e_rel += dE;
          last_step = alpha;
          accepted = true;
          break;
        }
      }
      alpha *= options.shrink;
    }
    if (!accepted) {
      out.stop_reason = "line_search";
      break;
    }
  }

  const std::string message = "interval minimization stopped (" + out.stop_reason + ") with projected residual " +
                              std::to_string(out.trace.back().projected_residual);
  throw MinimizationError(message, std::move(out));
}

void write_minimization_csv(const std::string& path, const std::vector<MinimizeTraceRow>& trace) {
  CsvWriter csv(path, {"iter", "energy", "projected_residual", "step_size"});
  for (const auto& row : trace) {
    csv.cell(row.iter).cell(row.energy).cell(row.projected_residual).cell(row.step_size);
    csv.end_row();
  }
}

}  // namespace grushin
