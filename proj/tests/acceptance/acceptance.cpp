// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "grushin/cli.hpp"
#include "grushin/continuation.hpp"
#include "grushin/linear_solver.hpp"
#include "grushin/multiplicity.hpp"
#include "grushin/singular.hpp"
#include "grushin/verification.hpp"

using namespace grushin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<double> kGammas{0.0, 0.5, 1.0, 2.0};
const std::vector<double> kDeltas{0.5, 1.0, 2.0, 4.0};

struct SingularCase {
  double gamma, delta;
  SingularSolution lower, upper;
  double seconds;
  double h;
};

std::vector<SingularCase>& singular_cases() {
  static std::vector<SingularCase> cases = [] {
    std::vector<SingularCase> out;
    const Grid2D grid = Grid2D::square(1.0, 65);
    for (double g : kGammas) {
      const OperatorMatrix A(grid, g);
      for (double d : kDeltas) {
        SingularConfig c;
        c.delta = d;
        const auto t0 = std::chrono::steady_clock::now();
        SingularSolution lo = solve_purely_singular(A, c, LadderStart::Lower, true);
        const double secs = seconds_since(t0);
        SingularSolution up = solve_purely_singular(A, c, LadderStart::Upper);
        out.push_back({g, d, std::move(lo), std::move(up), secs, grid.hx()});
      }
    }
    return out;
  }();
  return cases;
}

std::string case_name(double g, double d) { return "gamma=" + num(g) + " delta=" + num(d); }

Outcome barrier_sandwich() {
  Outcome o;
  double worst = 0.0, slowest = 0.0;
  for (const auto& c : singular_cases()) {
    const BarrierReport r = check_barriers(c.lower.u0, c.lower.box.lower, c.lower.box.upper, 5 * c.h);
    worst = std::max(worst, r.max_violation());
    slowest = std::max(slowest, c.seconds);
    o.require(r.ok, case_name(c.gamma, c.delta) + " violates by " + num(r.max_violation()));
    o.require(c.seconds < 60.0, case_name(c.gamma, c.delta) + " took " + num(c.seconds) + " s");
  }
  if (o.pass) o.detail = "16 cases, max violation " + num(worst) + ", slowest " + num(slowest) + " s";
  return o;
}

Outcome monotone_ladder() {
  Outcome o;
  double worst_drop = 0.0;
  for (const auto& c : singular_cases()) {
    const auto& L = c.lower.ladder;
    for (std::size_t k = 0; k + 1 < L.size(); ++k) {
      for (std::size_t i = 0; i < L[k].size(); ++i) worst_drop = std::max(worst_drop, L[k][i] - L[k + 1][i]);
    }
    o.require(increments_eventually_decreasing(c.lower.trace), case_name(c.gamma, c.delta) + " increments not decreasing");
  }
  o.require(worst_drop <= 1e-10, "ladder drops by " + num(worst_drop));
  if (o.pass) o.detail = "largest drop between levels " + num(worst_drop);
  return o;
}

Outcome ladder_uniqueness() {
  Outcome o;
  double worst = 0.0;
  for (const auto& c : singular_cases()) {
    const double d = sup_diff(c.lower.u0.span(), c.upper.u0.span());
    worst = std::max(worst, d);
    o.require(comparison_check(c.lower.u0, c.upper.u0, 1e-7).verdict == Verdict::Pass,
              case_name(c.gamma, c.delta) + " ladders differ by " + num(d));
  }
  if (o.pass) o.detail = "max sup difference " + num(worst) + " <= 1e-7";
  return o;
}

Outcome maximum_principle() {
  Outcome o;
  const Grid2D grid = Grid2D::square(1.0, 65);
  double smallest = 1.0;
  for (double g : kGammas) {
    const OperatorMatrix A(grid, g);
    const Field u1 = solve_torsion(A, 1e-12);
    smallest = std::min(smallest, min_value(u1.span()));
    const CheckReport r = max_principle_check(A, u1, 1e-8);
    o.require(r.verdict == Verdict::Pass, "gamma=" + num(g) + ": " + r.message);
  }
  const OperatorMatrix A(grid, 1.0);
  Field u = solve_torsion(A, 1e-12);
  const std::size_t mid = grid.index(32, 32);
  u[mid] = -0.1 * sup_norm(u.span());
  o.require(max_principle_check(A, u, 1e-8, {mid}).verdict == Verdict::Fail, "self-test did not fail");
  if (o.pass) o.detail = "min torsion value " + num(smallest) + "; negative-node self-test fails";
  return o;
}

// -Delta_gamma of cos(pi x / 2) cos(pi y / 2).
double cos_mode(double x, double y) { return std::cos(std::numbers::pi * x / 2) * std::cos(std::numbers::pi * y / 2); }

double truncation_error(int n, double gamma) {
  const Grid2D g = Grid2D::square(1.0, n);
  const OperatorMatrix A(g, gamma);
  const Field Au = apply_operator(A, g.sample(cos_mode));
  double err = 0.0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const double x = g.x(i), y = g.y(j);
      const double exact = std::numbers::pi * std::numbers::pi / 4 * (1 + (gamma == 0.0 ? 1.0 : 4 * x * x)) * cos_mode(x, y);
      err = std::max(err, std::abs(Au[g.index(i, j)] - exact));
    }
  }
  return err;
}

double energy_error(int n, double gamma) {
  using GL = boost::math::quadrature::gauss<double, 30>;
  auto poly = [](double x, double y) { return (1 - x * x) * (1 - y * y); };
  auto integrand = [&](double x, double y) {
    const double ux = -2 * x * (1 - y * y), uy = -2 * y * (1 - x * x);
    return ux * ux + (gamma == 0.0 ? 1.0 : 4 * x * x) * uy * uy;
  };
  const double exact =
      GL::integrate([&](double x) { return GL::integrate([&](double y) { return integrand(x, y); }, -1.0, 1.0); }, -1.0, 1.0);
  const Grid2D g = Grid2D::square(1.0, n);
  return std::abs(dirichlet_energy(g, gamma, g.sample(poly)) - exact);
}

Outcome manufactured_convergence() {
  Outcome o;
  const double hr = std::log(130.0 / 66.0);  // h(65) / h(129)
  std::string d;
  for (double g : {0.0, 1.0}) {
    const double op_order = std::log(truncation_error(65, g) / truncation_error(129, g)) / hr;
    const double en_order = std::log(energy_error(65, g) / energy_error(129, g)) / hr;
    o.require(op_order >= 1.9, "gamma=" + num(g) + " operator order " + num(op_order));
    o.require(en_order >= 1.9, "gamma=" + num(g) + " energy order " + num(en_order));
    d += (d.empty() ? "" : ", ") + std::string("gamma=") + num(g) + " orders " + num(op_order) + "/" + num(en_order);
  }
  if (o.pass) o.detail = d;
  return o;
}

Outcome polar_identity() {
  Outcome o;
  const std::vector<int> res{128, 256, 512, 1024, 2048};
  double worst_err = 0.0, worst_order = 1e300;
  for (double g : {0.5, 1.0, 2.0}) {
    for (double a : {0.0, 1.0, 2.0}) {
      std::vector<double> x, e;
      double at512 = 0.0;
      for (int r : res) {
        const PolarResult p = polar_identity_check(GrushinParams(g), a, 0.0, 1.0, r);
        x.push_back(r);
        e.push_back(std::max(p.relative_error, 1e-16));
        if (r == 512) at512 = p.relative_error;
      }
      const double order = -loglog_slope(x, e);
      worst_err = std::max(worst_err, at512);
      worst_order = std::min(worst_order, order);
      o.require(at512 <= 0.01, "gamma=" + num(g) + " alpha=" + num(a) + " error " + num(at512));
      o.require(order >= 0.9, "gamma=" + num(g) + " alpha=" + num(a) + " order " + num(order));
    }
  }
  if (o.pass) o.detail = "max error at 512 " + num(worst_err) + ", min fitted order " + num(worst_order);
  return o;
}

Outcome blowup_scalings() {
  Outcome o;
  std::vector<double> eps;
  for (int k = 0; k < 6; ++k) eps.push_back(1e-2 * std::pow(1e-2, k / 5.0));
  std::string d;
  for (auto [g, q] : {std::pair{1.0, 4.0}, std::pair{2.0, 3.0}}) {
    BlowupOptions opt;
    opt.q = q;
    opt.dirichlet_item = false;
    const BlowupReport r = blowup_scaling_check(GrushinParams(g), BubbleSpec{1e-2, plane_point(0.5, 0.0), 0.2}, eps, opt);
    for (const auto& it : r.items) {
      if (it.name.rfind("(ii)", 0) != 0 && it.name.rfind("(iv)", 0) != 0) continue;
      const double rel = std::abs(it.fitted - it.predicted) / it.predicted;
      o.require(rel <= 0.15, "gamma=" + num(g) + " " + it.name + " fitted " + num(it.fitted) + " vs " + num(it.predicted));
      d += (d.empty() ? "" : ", ") + std::string("gamma=") + num(g) + " " + it.name.substr(0, it.name.find(' ')) + " " +
           num(it.fitted) + "/" + num(it.predicted);
    }
  }
  if (o.pass) o.detail = d;
  return o;
}

ContinuationOptions branch_options() {
  ContinuationOptions o;
  o.relative_tol = 0.02;
  return o;
}

const BranchProblem& problem(int n, double p) {
  static std::map<std::pair<int, double>, BranchProblem> cache;
  auto it = cache.find({n, p});
  if (it == cache.end()) it = cache.emplace(std::pair{n, p}, BranchProblem::build(Grid2D::square(1.0, n), 1.0, 1.0, p)).first;
  return it->second;
}

const LambdaBracket& bracket(int n, double p) {
  static std::map<std::pair<int, double>, LambdaBracket> cache;
  auto it = cache.find({n, p});
  if (it == cache.end()) it = cache.emplace(std::pair{n, p}, estimate_lambda_star(problem(n, p), 1e-4, branch_options())).first;
  return it->second;
}

Outcome first_solution_branch() {
  Outcome o;
  std::vector<double> lambdas;
  for (double l = 0.1; lambdas.size() < 10; l *= 1.5) lambdas.push_back(l);
  const Branch b = sweep(problem(65, 2.0), lambdas, true, branch_options());
  int converged = 0;
  for (const auto& pt : b.points) {
    if (!pt.converged) continue;
    ++converged;
    o.require(pt.energy_rel < 0.0, "I(u) >= I(0) at lambda=" + num(pt.lambda));
  }
  o.require(converged >= 3 && b.points[0].converged, "only " + std::to_string(converged) + " converged points");
  std::string why;
  o.require(branch_is_monotone(b, 1e-10, &why), why);
  if (o.pass) o.detail = std::to_string(converged) + " converged points up to lambda=" + num(b.points[converged - 1].lambda);
  return o;
}

Outcome lambda_star_bracket() {
  Outcome o;
  const LambdaBracket& b = bracket(65, 2.0);
  o.require(!b.open, "bracket open: " + b.note);
  if (!o.pass) return o;
  o.require(b.width() <= 0.05 * b.lo, "width " + num(b.width()) + " > 0.05 lo");
  const NonexistenceReport probe = nonexistence_probe(problem(65, 2.0), 2.0 * b.hi, 5, 20240601, branch_options());
  o.require(probe.all_failed(), std::to_string(probe.attempts - probe.failures) + " probes converged at 2 hi");
  const LambdaBracket& fine = bracket(129, 2.0);
  o.require(!fine.open, "129 bracket open");
  const double mid = 0.5 * (b.lo + b.hi), fmid = 0.5 * (fine.lo + fine.hi);
  const double drift = std::abs(fmid - mid) / mid;
  o.require(drift <= 0.2, "refinement drift " + num(drift));
  if (o.pass) {
    o.detail = "[" + num(b.lo) + ", " + num(b.hi) + "] on 65, [" + num(fine.lo) + ", " + num(fine.hi) +
               "] on 129, 5/5 probes fail at " + num(2 * b.hi);
  }
  return o;
}

Outcome second_solution() {
  Outcome o;
  std::string d;
  for (double p : {2.0, 5.0}) {
    const BranchProblem& P = problem(65, p);
    const LambdaBracket& b = bracket(65, p);
    const std::string tag = "p=" + num(p);
    if (!(b.lo > 0.0)) {
      o.require(false, tag + " no converged lambda");
      continue;
    }
    const double lambda = 0.25 * b.lo;
    const BranchPoint first = solve_branch_point(P, lambda, P.grid().zeros(), branch_options());
    o.require(first.converged, tag + " first solution failed");
    if (!first.converged) continue;
    const EnergyFunctional F = P.at(lambda);
    const bool critical = std::abs(p - critical_power(P.params)) < 1e-12;
    const Field direction =
        critical ? sample_bubble(P.grid(), P.params, BubbleSpec{0.1, plane_point(0.5, 0.0), 0.2}) : first.solution;
    MountainPassOptions mo;
    const MountainPassResult mp = mountain_pass(F, first.solution, direction, 32, mo);
    o.require(mp.found, tag + " " + mp.report);
    o.require(mp.distance > 1e-3, tag + " distance " + num(mp.distance));
    o.require(mp.residual <= 10 * mo.tol, tag + " residual " + num(mp.residual));
    o.require(mp.min_excess >= -1e-10, tag + " below first solution by " + num(-mp.min_excess));
    d += (d.empty() ? "" : ", ") + tag + " lambda=" + num(lambda) + " distance " + num(mp.distance);
    if (critical) {
      const double S = sobolev_constant(Grid2D::square(1.0, 65), 1.0, P.params, 1e-9);
      const double gap = mp.level - mp.first_energy, threshold = pass_threshold(S, lambda, P.params);
      o.require(gap < threshold, tag + " level gap " + num(gap) + " >= " + num(threshold));
      d += " gap " + num(gap) + " < " + num(threshold);
    }
  }
  if (o.pass) o.detail = d;
  return o;
}

Outcome nonlinearity_properties() {
  Outcome o;
  const BranchProblem& P = problem(65, 2.0);
  const CheckReport r = nonlinearity_property_check(*P.nl, 100, 20240601);
  o.require(r.verdict == Verdict::Pass, r.message);
  long total = 0;
  for (double p : {2.0, 3.0, 6.0}) {
    const InequalityResult ir = elementary_inequality_check(p, 100000, 20240601);
    total += ir.violations;
    o.require(ir.violations == 0, "p=" + num(p) + " " + std::to_string(ir.violations) + " violations");
  }
  if (o.pass) o.detail = "G properties hold at 100 nodes; " + std::to_string(total) + " inequality violations";
  return o;
}

Outcome gradient_consistency() {
  Outcome o;
  const CheckReport r = gradient_consistency_check(problem(65, 2.0).at(1.0), 3, 5, 20240601);
  o.require(r.verdict == Verdict::Pass, r.message);
  if (o.pass && !r.metrics.empty()) o.detail = "max relative error " + num(r.metrics.front().value);
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "grushin_acceptance_determinism";
  fs::remove_all(root);
  for (const char* sub : {"a", "b"}) {
    cli::RunOptions opts;
    opts.subcommand = "verify";
    opts.out_dir = (root / sub).string();
    std::ostringstream out, err;
    const int code = cli::run(opts, out, err);
    o.require(code == 0, std::string("verify run ") + sub + " exited " + std::to_string(code));
  }
  int compared = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    if (e.path().extension() != ".csv") continue;
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const fs::path other = root / "b" / e.path().filename();
    o.require(fs::exists(other) && slurp(e.path()) == slurp(other), e.path().filename().string() + " differs");
    ++compared;
  }
  o.require(compared > 0, "no CSV files written");
  fs::remove_all(root);
  if (o.pass) o.detail = std::to_string(compared) + " CSV files byte-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"barrier sandwich", barrier_sandwich},
      {"monotone truncation ladder", monotone_ladder},
      {"uniqueness via comparison", ladder_uniqueness},
      {"discrete strong maximum principle", maximum_principle},
      {"manufactured-solution convergence", manufactured_convergence},
      {"polar identity", polar_identity},
      {"blow-up scalings", blowup_scalings},
      {"first solution and branch", first_solution_branch},
      {"lambda* bracket", lambda_star_bracket},
      {"second solution", second_solution},
      {"nonlinearity properties", nonlinearity_properties},
      {"gradient consistency", gradient_consistency},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%-4s criterion %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
