#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace grushin {

/// Nodal values on the interior nodes of a Grid2D; the Dirichlet boundary is
/// implicitly zero.
class Field {
 public:
  Field() = default;
  explicit Field(std::size_t size, double value = 0.0) : values_(size, value) {}
  explicit Field(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const Field&) const = default;

 private:
  std::vector<double> values_;
};

// Reductions run in index order so results are bit-reproducible.
double dot(std::span<const double> a, std::span<const double> b);
double sup_norm(std::span<const double> a);
double sup_diff(std::span<const double> a, std::span<const double> b);
double min_value(std::span<const double> a);
double max_value(std::span<const double> a);
bool all_finite(std::span<const double> a);

/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& a);

/// Componentwise clamp into [lower, upper]; either bound may be empty.
void clamp_into(Field& u, const Field* lower, const Field* upper);

}  // namespace grushin
