#include <cmath>

#include <gtest/gtest.h>

#include "grushin/discretization.hpp"
#include "grushin/errors.hpp"
#include "grushin/linear_solver.hpp"
#include "grushin/singular.hpp"

using namespace grushin;

namespace {

SingularConfig config_for(double delta) {
  SingularConfig c;
  c.delta = delta;
  return c;
}

double sup_distance_to_fine(const Grid2D& coarse, const Field& uc, const Grid2D& fine, const Field& uf) {
  double d = 0.0;
  for (int j = 0; j < coarse.ny(); ++j) {
    for (int i = 0; i < coarse.nx(); ++i) {
      d = std::max(d, std::abs(uc[coarse.index(i, j)] - fine.interpolate(uf, coarse.x(i), coarse.y(j))));
    }
  }
  return d;
}

double refinement_ratio(double gamma, double delta) {
  const SingularConfig c = config_for(delta);
  Grid2D g1 = Grid2D::square(1.0, 65), g2 = Grid2D::square(1.0, 129), g3 = Grid2D::square(1.0, 257);
  Field u1 = solve_purely_singular(g1, gamma, c).u0;
  Field u2 = solve_purely_singular(g2, gamma, c).u0;
  Field u3 = solve_purely_singular(g3, gamma, c).u0;
  return sup_distance_to_fine(g1, u1, g3, u3) / sup_distance_to_fine(g2, u2, g3, u3);
}

}  // namespace

TEST(PhiK, TruncationExamples) {
  EXPECT_DOUBLE_EQ(phi_k_prime(1.0, 10.0, 0.5), -2.0);
  EXPECT_DOUBLE_EQ(phi_k_prime(1.0, 10.0, 0.05), -10.0);
  EXPECT_DOUBLE_EQ(phi_k_prime(2.0, 10.0, -3.0), -10.0);
}

TEST(PhiK, MonotoneBoundedAndPrimitive) {
  for (double delta : {0.5, 1.0, 2.0}) {
    const double k = 7.0;
    double prev = -k;
    for (int i = -50; i <= 400; ++i) {
      const double s = i * 0.01;
      const double v = phi_k_prime(delta, k, s);
      EXPECT_GE(v, prev);
      EXPECT_GE(v, -k);
      EXPECT_LT(v, 0.0);
      prev = v;
    }
    for (double s : {0.01, 0.2, 0.7, 1.5, 3.0}) {
      const double h = 1e-6;
      const double fd = (phi_k(delta, k, s + h) - phi_k(delta, k, s - h)) / (2 * h);
      EXPECT_NEAR(fd, phi_k_prime(delta, k, s), 1e-6);
    }
  }
}

TEST(Barriers, HandEvaluatedNode) {
  Grid2D g = Grid2D::square(1.0, 3);
  Field u1(g.size(), 0.3);
  Barriers b = barriers(g, 1.0, 1.0, u1);
  EXPECT_NEAR(b.lower[0], 0.5477225575051661, 1e-15);
  EXPECT_NEAR(b.upper[0], 0.7745966692414834, 1e-15);
}

TEST(Barriers, SmallDeltaLimit) {
  Grid2D g = Grid2D::square(1.0, 17);
  Field u1 = solve_torsion(g, 1.0, 1e-12);
  Barriers b = barriers(g, 1.0, 1e-6, u1);
  for (std::size_t i = 0; i < u1.size(); ++i) {
    EXPECT_NEAR(b.lower[i], u1[i], 1e-5 * u1[i]);
    EXPECT_NEAR(b.upper[i], u1[i], 2e-5 * u1[i] * (1 + std::abs(std::log(u1[i]))));
  }
}

TEST(Barriers, OrderedAndValidated) {
  Grid2D g = Grid2D::square(1.0, 17);
  for (double gamma : {0.0, 1.0}) {
    Field u1 = solve_torsion(g, gamma, 1e-12);
    for (double delta : {0.5, 1.0, 2.0, 4.0}) {
      Barriers b = barriers(g, gamma, delta, u1);
      for (std::size_t i = 0; i < u1.size(); ++i) ASSERT_LE(b.lower[i], b.upper[i]);
    }
    Field bad = u1;
    bad[5] = 0.0;
    EXPECT_THROW(barriers(g, gamma, 1.0, bad), InvalidParameter);
  }
}

TEST(Barriers, UpperMonotoneInDeltaBySign) {
  // d/d delta of ((1+delta) s)^{1/(1+delta)} has the sign of 1 - ln((1+delta) s).
  Grid2D g = Grid2D::square(1.0, 3);
  for (double s : {0.05, 0.2, 0.4, 0.9, 2.0, 5.0}) {
    Field u1(g.size(), s);
    for (double delta : {0.5, 1.0, 2.0}) {
      const double h = 1e-5;
      const double d = barriers(g, 0.0, delta + h, u1).upper[0] - barriers(g, 0.0, delta - h, u1).upper[0];
      const double predicted = 1.0 - std::log((1.0 + delta) * s);
      if (std::abs(predicted) > 1e-3) EXPECT_EQ(d > 0, predicted > 0) << "s " << s << " delta " << delta;
    }
  }
}

TEST(CheckBarriers, ConstructedCases) {
  Field lower(4, 1.0), upper(4, 2.0);
  BarrierReport ok = check_barriers(lower, lower, upper, 1e-3);
  EXPECT_TRUE(ok.ok);
  EXPECT_EQ(ok.max_upper_violation, 0.0);
  EXPECT_TRUE(ok.violating_nodes.empty());

  const double tol = 1e-3;
  Field above(4, 2.0 + 2 * tol);
  BarrierReport bad = check_barriers(above, lower, upper, tol);
  EXPECT_FALSE(bad.ok);
  EXPECT_NEAR(bad.max_violation(), tol, 1e-12);
  EXPECT_EQ(bad.violating_nodes.size(), 4u);
}

TEST(Regularized, FixedPointIsReturnedUnchanged) {
  Grid2D g = Grid2D::square(1.0, 17);
  OperatorMatrix A(g, 1.0);
  Field u1 = solve_torsion(A, 1e-13);
  Barriers box = barriers(g, 1.0, 1.0, u1);
  const double k = 50.0;
  RegularizedSolve first = solve_regularized(A, 1.0, k, box.lower, box, {});
  RegularizedSolve again = solve_regularized(A, 1.0, k, first.u, box, {});
  EXPECT_EQ(again.newton_iterations + again.picard_iterations, 0);
  EXPECT_EQ(again.u, first.u);
  EXPECT_LE(sup_norm(regularized_residual(A, 1.0, k, first.u).span()), 1e-10);
  EXPECT_TRUE(first.within_barriers);
}

TEST(Regularized, MonotoneInTruncationLevel) {
  Grid2D g = Grid2D::square(1.0, 33);
  OperatorMatrix A(g, 1.0);
  SingularConfig c = config_for(1.0);
  SingularSolution s = solve_purely_singular(A, c, LadderStart::Lower, true);
  ASSERT_GE(s.ladder.size(), 3u);
  for (std::size_t l = 0; l + 1 < s.ladder.size(); ++l) {
    EXPECT_LT(s.trace[l].k, s.trace[l + 1].k);
    for (std::size_t i = 0; i < A.size(); ++i) ASSERT_LE(s.ladder[l][i], s.ladder[l + 1][i] + 1e-10);
  }
}

TEST(Regularized, AgreesWithFineGrid) {
  const double k = 1e3;
  auto solve_at = [&](int n) {
    Grid2D g = Grid2D::square(1.0, n);
    OperatorMatrix A(g, 1.0);
    Field u1 = solve_torsion(A, 1e-13);
    Barriers box = barriers(g, 1.0, 1.0, u1);
    return std::pair{g, solve_regularized(A, 1.0, k, box.lower, box, {}).u};
  };
  auto [gc, uc] = solve_at(65);
  auto [gf, uf] = solve_at(129);
  EXPECT_LE(sup_distance_to_fine(gc, uc, gf, uf), 5 * gc.hx());
}

TEST(PurelySingular, IncrementsDecreaseAndStartDoesNotMatter) {
  for (double gamma : {0.0, 1.0}) {
    Grid2D g = Grid2D::square(1.0, 33);
    OperatorMatrix A(g, gamma);
    SingularConfig c = config_for(1.0);
    SingularSolution lo = solve_purely_singular(A, c, LadderStart::Lower);
    SingularSolution up = solve_purely_singular(A, c, LadderStart::Upper);
    EXPECT_TRUE(increments_eventually_decreasing(lo.trace));
    EXPECT_LE(lo.trace.back().sup_increment, c.outer_tol);
    EXPECT_LE(sup_diff(lo.u0.span(), up.u0.span()), 10 * c.outer_tol);
    EXPECT_GE(lo.trace.front().k, minimal_truncation_level(lo.u1, c.delta));
  }
}

TEST(PurelySingular, BarrierSandwich) {
  Grid2D g = Grid2D::square(1.0, 65);
  for (double gamma : {0.0, 1.0}) {
    for (double delta : {0.5, 4.0}) {
      SingularSolution s = solve_purely_singular(g, gamma, config_for(delta));
      BarrierReport r = check_barriers(s.u0, s.box.lower, s.box.upper, 5 * g.hx());
      EXPECT_TRUE(r.ok) << "gamma " << gamma << " delta " << delta << " violation " << r.max_violation();
    }
  }
}

TEST(PurelySingular, RejectsBadConfig) {
  SingularConfig c;
  c.delta = 0.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c.delta = 1.0;
  c.k_growth = 1.0;
  EXPECT_THROW(c.validate(), InvalidParameter);
}

TEST(PurelySingular, EventuallyDecreasingHelper) {
  auto trace = [](std::initializer_list<double> incs) {
    std::vector<LadderLevel> t;
    for (double v : incs) t.push_back(LadderLevel{1.0, v, 0, 0.0});
    return t;
  };
  EXPECT_TRUE(increments_eventually_decreasing(trace({1.0, 0.1, 0.2, 0.05, 0.01, 0.001})));
  EXPECT_FALSE(increments_eventually_decreasing(trace({1.0, 0.1, 0.05, 0.01, 0.02, 0.001})));
}

TEST(GridConvergence, LaplacianCase) { EXPECT_GE(refinement_ratio(0.0, 1.0), 3.0); }

TEST(GridConvergence, DegenerateCase) { EXPECT_GE(refinement_ratio(1.0, 1.0), 3.0); }
