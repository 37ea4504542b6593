#include "grushin/field.hpp"

#include <algorithm>
#include <cmath>

#include "grushin/errors.hpp"

namespace grushin {

namespace {
void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidParameter("field dimension mismatch");
}
}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sup_norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

double min_value(std::span<const double> a) {
  if (a.empty()) throw InvalidParameter("min of empty field");
  return *std::min_element(a.begin(), a.end());
}

double max_value(std::span<const double> a) {
  if (a.empty()) throw InvalidParameter("max of empty field");
  return *std::max_element(a.begin(), a.end());
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Field operator+(const Field& a, const Field& b) {
  require_same(a.size(), b.size());
  Field r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

Field operator-(const Field& a, const Field& b) {
  require_same(a.size(), b.size());
  Field r = a;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

Field operator*(double s, const Field& a) {
  Field r = a;
  for (double& v : r) v *= s;
  return r;
}

void clamp_into(Field& u, const Field* lower, const Field* upper) {
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (lower) u[i] = std::max(u[i], (*lower)[i]);
    if (upper) u[i] = std::min(u[i], (*upper)[i]);
  }
}

}  // namespace grushin
