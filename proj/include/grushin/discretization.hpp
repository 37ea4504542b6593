#pragma once

// Finite-difference discretization of -Delta_gamma on a rectangle of the
// Grushin plane (n = m = 1) with homogeneous Dirichlet data.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "grushin/field.hpp"

namespace grushin {

class Grid2D {
 public:
  /// nx, ny count interior nodes. Unless allow_off_degeneracy is set the
  /// rectangle must meet the degeneracy line {x = 0}.
  Grid2D(double x_min, double x_max, double y_min, double y_max, int nx, int ny,
         bool allow_off_degeneracy = false);

  /// (-a, a)^2 with n interior nodes per axis.
  static Grid2D square(double half_width, int n);

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  double y_min() const { return y_min_; }
  double y_max() const { return y_max_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  std::size_t size() const { return static_cast<std::size_t>(nx_) * ny_; }
  double cell_volume() const { return hx_ * hy_; }
  double area() const { return (x_max_ - x_min_) * (y_max_ - y_min_); }

  double x(int i) const { return x_min_ + (i + 1) * hx_; }
  double y(int j) const { return y_min_ + (j + 1) * hy_; }
  /// Row-major: y outer, x inner.
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }

  Field sample(const std::function<double(double, double)>& f) const;
  Field zeros() const { return Field(size(), 0.0); }

  /// Bilinear interpolation of a field (zero on the boundary) at (x, y);
  /// zero outside the rectangle.
  double interpolate(const Field& u, double x, double y) const;

  bool operator==(const Grid2D&) const = default;

 private:
  double x_min_, x_max_, y_min_, y_max_;
  int nx_, ny_;
  double hx_, hy_;
};

/// Sparse symmetric matrix representing -Delta_gamma (5-point divergence-form
/// stencil), stored in CSR with rows ordered like Grid2D::index.
class OperatorMatrix {
 public:
  OperatorMatrix(Grid2D grid, double gamma);

  const Grid2D& grid() const { return grid_; }
  double gamma() const { return gamma_; }
  std::size_t size() const { return grid_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& cols() const { return cols_; }
  const std::vector<double>& vals() const { return vals_; }
  const std::vector<double>& diagonal() const { return diag_; }

  /// Coefficient (1+gamma)^2 |x_i|^{2 gamma} of the y-faces in column i.
  double y_face_coefficient(int i) const { return y_coef_[static_cast<std::size_t>(i)]; }

  /// Entry (row, col); zero when not stored.
  double entry(std::size_t row, std::size_t col) const;

  /// out = A u
  void apply(std::span<const double> u, std::span<double> out) const;

 private:
  Grid2D grid_;
  double gamma_;
  std::vector<double> y_coef_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  std::vector<double> diag_;
};

OperatorMatrix assemble_operator(const Grid2D& grid, double gamma);

Field apply_operator(const OperatorMatrix& A, const Field& u);

/// Face quadrature of |d_x u|^2 + (1+gamma)^2 |x|^{2 gamma} |d_y u|^2.
double dirichlet_energy(const Grid2D& grid, double gamma, const Field& u);

/// Trapezoidal sum (boundary values are zero).
double integrate(const Grid2D& grid, const Field& u);

double lp_norm(const Grid2D& grid, const Field& u, double p);

/// CSV with header `x,y,value`, one row per interior node, 17 significant digits.
void write_field_csv(std::ostream& os, const Grid2D& grid, const Field& u);
void write_field_csv(const std::string& path, const Grid2D& grid, const Field& u);

}  // namespace grushin
