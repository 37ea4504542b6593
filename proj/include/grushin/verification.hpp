#pragma once

// Property checks: discrete maximum principle, comparison, the gauge polar
// coordinates identity, bubble blow-up rates and a power inequality.

#include <cstdint>
#include <string>
#include <vector>

#include "grushin/core.hpp"
#include "grushin/discretization.hpp"
#include "grushin/field.hpp"
#include "grushin/variational.hpp"

namespace grushin {

enum class Verdict { Pass, Fail, Inconclusive, Inapplicable };

const char* to_string(Verdict v);

struct Metric {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  Verdict verdict = Verdict::Pass;
};

struct CheckReport {
  std::string check;
  std::string case_name;
  Verdict verdict = Verdict::Pass;
  std::vector<Metric> metrics;
  std::string message;

  bool failed() const { return verdict == Verdict::Fail; }
};

/// Dichotomy: min(u) > 0 or ||u||_inf <= residual_bound, for u with
/// A u >= -residual_bound. Nodes listed in `forced` are taken as satisfying
/// the supersolution inequality without checking it.
CheckReport max_principle_check(const OperatorMatrix& A, const Field& u, double residual_bound,
                                const std::vector<std::size_t>& forced = {});

CheckReport comparison_check(const Field& u_from_lower, const Field& u_from_upper, double tol);

/// Lebesgue measure of the unit gauge ball in the plane, by adaptive
/// quadrature (cached per gamma).
double gauge_ball_volume(double gamma);

struct PolarResult {
  double lhs = 0.0;  // midpoint rule over the annulus
  double rhs = 0.0;  // Q |B_1| (r2^{Q+alpha} - r1^{Q+alpha}) / (Q + alpha)
  double relative_error = 0.0;
};

/// Throws InvalidParameter unless alpha > -Q, 0 <= r1 < r2, resolution >= 2
/// and n = m = 1.
PolarResult polar_identity_check(const GrushinParams& params, double alpha, double r1, double r2, int resolution);

struct BlowupItem {
  std::string name;
  double predicted = 0.0;
  double fitted = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

struct BlowupReport {
  std::vector<double> eps;
  std::vector<double> dirichlet;         // D2
  std::vector<double> critical_norm;     // C
  std::vector<double> l2;                // M2
  std::vector<double> lq;                // Mq
  double critical_plateau = 0.0;
  double dirichlet_reference = 0.0;
  double q = 0.0;
  std::vector<BlowupItem> items;  // (i) .. (iv)
};

struct BlowupOptions {
  double q = 0.0;               // 0 picks the midpoint of (2*/2, 2*)
  double tolerance = 0.15;      // relative, on fitted exponents
  int fit_points = 0;           // 0 means the smallest two thirds of eps_list
  bool dirichlet_item = true;   // item (i) needs 2D quadrature
};

/// Integrals of the cut-off bubble by dedicated quadrature, fitted log-log
/// slopes over the smallest epsilons. Throws InvalidParameter when eps_list
/// has fewer than 5 entries, is not decreasing geometric, or Q <= 2.
BlowupReport blowup_scaling_check(const GrushinParams& params, const BubbleSpec& bubble,
                                  const std::vector<double>& eps_list, const BlowupOptions& options = {});

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

enum class InequalitySign {
  Taylor,   // |a - b|^p - |a|^p + p|a|^{p-2} a.b
  Printed,  // |a - b|^p - |a|^p - p|a|^{p-2} a.b, kept as a self-test
};

struct InequalityResult {
  double p = 0.0;
  long samples = 0;
  long violations = 0;
  double max_ratio = 0.0;          // LHS / RHS (p >= 2) or LHS / |b|^p (p < 2)
  double max_ratio_doubled = 0.0;  // p < 2: same statistic on twice the samples
  Verdict verdict = Verdict::Pass;
};

double inequality_lhs(double p, const double a[2], const double b[2], InequalitySign sign = InequalitySign::Taylor);

/// Pairs (a, b) uniform in the unit disc, std::mt19937_64 seeded with `seed`.
InequalityResult elementary_inequality_check(double p, long n_samples, std::uint64_t seed,
                                             InequalitySign sign = InequalitySign::Taylor);

/// Scaling G(rs) <= r^2 G(s), midpoint convexity and G(s) - g(s) s / 2 >= 0
/// at `nodes` random nodes, each with slack 1e-12.
CheckReport nonlinearity_property_check(const ShiftedNonlinearity& nl, int nodes, std::uint64_t seed,
                                        double slack = 1e-12);

/// Central differences of the energy against cell_volume <residual, w> in
/// `directions` random directions at `fields` random nonnegative fields.
CheckReport gradient_consistency_check(const EnergyFunctional& F, int fields, int directions, std::uint64_t seed,
                                       double rel_tol = 1e-5);

/// CSV `check,case,metric,value,expected,verdict`, one row per metric.
void write_summary_csv(const std::string& path, const std::vector<CheckReport>& reports);

}  // namespace grushin
