#pragma once

// Closed-form geometry of the Grushin operator
//   Delta_gamma = Delta_x + (1+gamma)^2 |x|^{2 gamma} Delta_y   on R^n x R^m.

#include <vector>

namespace grushin {

/// Homogeneous dimension m + (1+gamma) n.
double homogeneous_dimension(double gamma, int n, int m);

class GrushinParams {
 public:
  GrushinParams(double gamma, int n = 1, int m = 1);

  double gamma() const { return gamma_; }
  int n() const { return n_; }
  int m() const { return m_; }
  double Q() const { return Q_; }

  /// True when Q > 2, i.e. when the critical exponent exists.
  bool has_critical_exponent() const { return Q_ > 2.0; }

 private:
  double gamma_;
  int n_;
  int m_;
  double Q_;
};

/// 2Q/(Q-2); throws InvalidParameter when Q <= 2.
double critical_exponent(const GrushinParams& params);

/// 2*_gamma - 1, the critical power of the nonlinearity.
double critical_power(const GrushinParams& params);

struct Point {
  std::vector<double> x;
  std::vector<double> y;
};

/// Point in the Grushin plane (n = m = 1).
inline Point plane_point(double x, double y) { return Point{{x}, {y}}; }

Point operator-(const Point& a, const Point& b);

/// (|x|^{2(1+gamma)} + |y|^2)^{1/(2(1+gamma))}.
double gauge(const GrushinParams& params, const Point& z);

/// Gauge in the plane without allocating a Point.
double gauge_plane(double gamma, double x, double y);

/// Anisotropic dilation (t x, t^{1+gamma} y).
Point dilate(const GrushinParams& params, double t, const Point& z);

struct BubbleSpec {
  double epsilon = 1.0;
  Point center;
  double cutoff_radius = 1.0;
};

/// Throws InvalidParameter unless epsilon > 0, R > 0, the point dimensions
/// match and the closed 2R gauge ball around the center misses {x = 0}.
void validate_bubble(const GrushinParams& params, const BubbleSpec& spec);

/// Model profile (1 + d^{2(1+gamma)})^{-(Q-2)/(2(1+gamma))} as a function of
/// the gauge d; decays like d^{2-Q}.
double model_profile(const GrushinParams& params, double d);

/// Quintic smoothstep ramp in the gauge radius: 1 on [0, R], 0 beyond 2R.
double cutoff_profile(double d, double R);
double cutoff_profile_derivative(double d, double R);

double cutoff_eval(const Point& center, double R, const Point& z, const GrushinParams& params);

/// zeta(z) eps^{-(Q-2)/2} V(dilate(1/eps, z - center)).
double bubble_eval(const GrushinParams& params, const BubbleSpec& spec, const Point& z);

}  // namespace grushin
