#include "grushin/discretization.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "grushin/csv.hpp"
#include "grushin/errors.hpp"

namespace grushin {

Grid2D::Grid2D(double x_min, double x_max, double y_min, double y_max, int nx, int ny,
               bool allow_off_degeneracy)
    : x_min_(x_min), x_max_(x_max), y_min_(y_min), y_max_(y_max), nx_(nx), ny_(ny) {
  if (!(x_min < x_max) || !(y_min < y_max)) throw InvalidParameter("grid rectangle is empty");
  if (nx < 3 || ny < 3) throw InvalidParameter("grid needs at least 3 interior nodes per axis");
  if (!allow_off_degeneracy && !(x_min < 0.0 && x_max > 0.0)) {
    throw InvalidParameter("grid rectangle must intersect the degeneracy line x = 0");
  }
  hx_ = (x_max - x_min) / (nx + 1);
  hy_ = (y_max - y_min) / (ny + 1);
}

Grid2D Grid2D::square(double half_width, int n) {
  return Grid2D(-half_width, half_width, -half_width, half_width, n, n);
}

Field Grid2D::sample(const std::function<double(double, double)>& f) const {
  Field u(size());
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) u[index(i, j)] = f(x(i), y(j));
  return u;
}

double Grid2D::interpolate(const Field& u, double xq, double yq) const {
  if (u.size() != size()) throw InvalidParameter("field does not match grid");
  if (xq <= x_min_ || xq >= x_max_ || yq <= y_min_ || yq >= y_max_) return 0.0;
  // Node coordinates including the boundary: index 0 and n+1 are boundary.
  const double sx = (xq - x_min_) / hx_;
  const double sy = (yq - y_min_) / hy_;
  int ix = std::min(static_cast<int>(std::floor(sx)), nx_);
  int iy = std::min(static_cast<int>(std::floor(sy)), ny_);
  const double tx = sx - ix;
  const double ty = sy - iy;
  auto value = [&](int a, int b) {
    if (a <= 0 || a >= nx_ + 1 || b <= 0 || b >= ny_ + 1) return 0.0;
    return u[index(a - 1, b - 1)];
  };
  return (1 - tx) * (1 - ty) * value(ix, iy) + tx * (1 - ty) * value(ix + 1, iy) +
         (1 - tx) * ty * value(ix, iy + 1) + tx * ty * value(ix + 1, iy + 1);
}

OperatorMatrix::OperatorMatrix(Grid2D grid, double gamma) : grid_(std::move(grid)), gamma_(gamma) {
  if (!(gamma >= 0.0)) throw InvalidParameter("gamma must be >= 0");
  const int nx = grid_.nx();
  const int ny = grid_.ny();
  const double cx = 1.0 / (grid_.hx() * grid_.hx());
  const double cy = 1.0 / (grid_.hy() * grid_.hy());

  // y-faces between (i, j) and (i, j+1) have their midpoint at x_i.
  y_coef_.resize(static_cast<std::size_t>(nx));
  for (int i = 0; i < nx; ++i) {
    y_coef_[i] = (1.0 + gamma) * (1.0 + gamma) * std::pow(std::abs(grid_.x(i)), 2.0 * gamma);
  }

  const std::size_t n = grid_.size();
  row_ptr_.reserve(n + 1);
  cols_.reserve(5 * n);
  vals_.reserve(5 * n);
  diag_.resize(n);
  row_ptr_.push_back(0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double ay = y_coef_[i] * cy;
      const std::size_t row = grid_.index(i, j);
      auto push = [&](std::size_t col, double v) {
        cols_.push_back(col);
        vals_.push_back(v);
      };
      // Columns in increasing order.
      if (j > 0 && ay != 0.0) push(grid_.index(i, j - 1), -ay);
      if (i > 0) push(grid_.index(i - 1, j), -cx);
      diag_[row] = 2.0 * cx + 2.0 * ay;
      push(row, diag_[row]);
      if (i + 1 < nx) push(grid_.index(i + 1, j), -cx);
      if (j + 1 < ny && ay != 0.0) push(grid_.index(i, j + 1), -ay);
      row_ptr_.push_back(cols_.size());
    }
  }
}

double OperatorMatrix::entry(std::size_t row, std::size_t col) const {
  for (std::size_t k = row_ptr_.at(row); k < row_ptr_.at(row + 1); ++k) {
    if (cols_[k] == col) return vals_[k];
  }
  return 0.0;
}

void OperatorMatrix::apply(std::span<const double> u, std::span<double> out) const {
  if (u.size() != size() || out.size() != size()) throw InvalidParameter("operator dimension mismatch");
  const std::size_t n = size();
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += vals_[k] * u[cols_[k]];
    out[r] = s;
  }
}

OperatorMatrix assemble_operator(const Grid2D& grid, double gamma) { return OperatorMatrix(grid, gamma); }

Field apply_operator(const OperatorMatrix& A, const Field& u) {
  Field out(A.size());
  A.apply(u.span(), out.span());
  return out;
}

double dirichlet_energy(const Grid2D& grid, double gamma, const Field& u) {
  if (u.size() != grid.size()) throw InvalidParameter("field does not match grid");
  const int nx = grid.nx();
  const int ny = grid.ny();
  const double vol = grid.cell_volume();
  auto at = [&](int i, int j) {
    if (i < 0 || i >= nx || j < 0 || j >= ny) return 0.0;
    return u[grid.index(i, j)];
  };
  double ex = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = -1; i < nx; ++i) {
      const double d = (at(i + 1, j) - at(i, j)) / grid.hx();
      ex += d * d;
    }
  }
  double ey = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double a = (1.0 + gamma) * (1.0 + gamma) * std::pow(std::abs(grid.x(i)), 2.0 * gamma);
    if (a == 0.0) continue;
    double col = 0.0;
    for (int j = -1; j < ny; ++j) {
      const double d = (at(i, j + 1) - at(i, j)) / grid.hy();
      col += d * d;
    }
    ey += a * col;
  }
  return vol * (ex + ey);
}

double integrate(const Grid2D& grid, const Field& u) {
  if (u.size() != grid.size()) throw InvalidParameter("field does not match grid");
  double s = 0.0;
  for (double v : u) s += v;
  return s * grid.cell_volume();
}

double lp_norm(const Grid2D& grid, const Field& u, double p) {
  if (!(p >= 1.0)) throw InvalidParameter("lp_norm requires p >= 1");
  if (u.size() != grid.size()) throw InvalidParameter("field does not match grid");
  double s = 0.0;
  for (double v : u) s += std::pow(std::abs(v), p);
  return std::pow(s * grid.cell_volume(), 1.0 / p);
}

void write_field_csv(std::ostream& os, const Grid2D& grid, const Field& u) {
  if (u.size() != grid.size()) throw InvalidParameter("field does not match grid");
  os << "x,y,value\n";
  for (int j = 0; j < grid.ny(); ++j) {
    for (int i = 0; i < grid.nx(); ++i) {
      os << format_double(grid.x(i)) << ',' << format_double(grid.y(j)) << ','
         << format_double(u[grid.index(i, j)]) << '\n';
    }
  }
}

void write_field_csv(const std::string& path, const Grid2D& grid, const Field& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_field_csv(os, grid, u);
}

}  // namespace grushin
