#include "grushin/core.hpp"

#include <cmath>
#include <string>

#include "grushin/errors.hpp"

namespace grushin {

namespace {

double squared_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return s;
}

void require_matching(const GrushinParams& params, const Point& z) {
  if (static_cast<int>(z.x.size()) != params.n() || static_cast<int>(z.y.size()) != params.m()) {
    throw InvalidParameter("point dimensions do not match (n, m) = (" + std::to_string(params.n()) +
                           ", " + std::to_string(params.m()) + ")");
  }
}

}  // namespace

double homogeneous_dimension(double gamma, int n, int m) {
  if (n < 1 || m < 1) throw InvalidParameter("n and m must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidParameter("gamma must be finite and >= 0");
  return m + (1.0 + gamma) * n;
}

GrushinParams::GrushinParams(double gamma, int n, int m)
    : gamma_(gamma), n_(n), m_(m), Q_(homogeneous_dimension(gamma, n, m)) {}

double critical_exponent(const GrushinParams& params) {
  const double Q = params.Q();
  if (!(Q > 2.0)) throw InvalidParameter("critical exponent undefined for Q <= 2");
  return 2.0 * Q / (Q - 2.0);
}

double critical_power(const GrushinParams& params) { return critical_exponent(params) - 1.0; }

Point operator-(const Point& a, const Point& b) {
  Point r = a;
  for (std::size_t i = 0; i < r.x.size(); ++i) r.x[i] -= b.x.at(i);
  for (std::size_t j = 0; j < r.y.size(); ++j) r.y[j] -= b.y.at(j);
  return r;
}

double gauge(const GrushinParams& params, const Point& z) {
  require_matching(params, z);
  const double a = 1.0 + params.gamma();
  const double x2 = squared_norm(z.x);
  const double y2 = squared_norm(z.y);
  // |x|^{2a} = (|x|^2)^a
  return std::pow(std::pow(x2, a) + y2, 1.0 / (2.0 * a));
}

double gauge_plane(double gamma, double x, double y) {
  const double a = 1.0 + gamma;
  return std::pow(std::pow(std::abs(x), 2.0 * a) + y * y, 1.0 / (2.0 * a));
}

Point dilate(const GrushinParams& params, double t, const Point& z) {
  if (!(t > 0.0)) throw InvalidParameter("dilation factor must be positive");
  require_matching(params, z);
  const double ty = std::pow(t, 1.0 + params.gamma());
  Point r = z;
  for (double& c : r.x) c *= t;
  for (double& c : r.y) c *= ty;
  return r;
}

void validate_bubble(const GrushinParams& params, const BubbleSpec& spec) {
  if (!(spec.epsilon > 0.0)) throw InvalidParameter("bubble epsilon must be positive");
  if (!(spec.cutoff_radius > 0.0)) throw InvalidParameter("bubble cutoff_radius must be positive");
  require_matching(params, spec.center);
  // The 2R gauge ball contains exactly the points with |x - x0| < 2R in the x block
  // (when y = y0), so it misses {x = 0} iff |x0| > 2R.
  const double x0 = std::sqrt(squared_norm(spec.center.x));
  if (!(x0 > 2.0 * spec.cutoff_radius)) {
    throw InvalidParameter("bubble support B_2R(center) must not meet the degeneracy set {x = 0}");
  }
}

double model_profile(const GrushinParams& params, double d) {
  const double a = 1.0 + params.gamma();
  const double Q = params.Q();
  return std::pow(1.0 + std::pow(d, 2.0 * a), -(Q - 2.0) / (2.0 * a));
}

double cutoff_profile(double d, double R) {
  if (d <= R) return 1.0;
  if (d >= 2.0 * R) return 0.0;
  const double s = (d - R) / R;
  const double smooth = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
  return 1.0 - smooth;
}

double cutoff_profile_derivative(double d, double R) {
  if (d <= R || d >= 2.0 * R) return 0.0;
  const double s = (d - R) / R;
  return -30.0 * s * s * (1.0 - s) * (1.0 - s) / R;
}

double cutoff_eval(const Point& center, double R, const Point& z, const GrushinParams& params) {
  if (!(R > 0.0)) throw InvalidParameter("cutoff radius must be positive");
  return cutoff_profile(gauge(params, z - center), R);
}

double bubble_eval(const GrushinParams& params, const BubbleSpec& spec, const Point& z) {
  if (!params.has_critical_exponent()) throw InvalidParameter("bubble requires Q > 2");
  validate_bubble(params, spec);
  const Point w = z - spec.center;
  const double zeta = cutoff_profile(gauge(params, w), spec.cutoff_radius);
  if (zeta == 0.0) return 0.0;
  const double Q = params.Q();
  // gauge(dilate(1/eps, w)) = gauge(w) / eps
  const double d_scaled = gauge(params, w) / spec.epsilon;
  return zeta * std::pow(spec.epsilon, -(Q - 2.0) / 2.0) * model_profile(params, d_scaled);
}

}  // namespace grushin
