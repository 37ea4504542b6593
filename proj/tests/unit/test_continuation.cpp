#include <cmath>

#include <gtest/gtest.h>

#include "grushin/continuation.hpp"

using namespace grushin;

namespace {

const BranchProblem& problem33() {
  static const BranchProblem p = BranchProblem::build(Grid2D::square(1.0, 33), 1.0, 1.0, 2.0);
  return p;
}

}  // namespace

TEST(BranchProblem, WrapsSingularSolution) {
  const BranchProblem& P = problem33();
  EXPECT_EQ(P.nl->size(), P.grid().size());
  EXPECT_GT(min_value(P.nl->u0().span()), 0.0);
  EXPECT_GT(min_value(P.torsion.span()), 0.0);
  EXPECT_DOUBLE_EQ(P.at(0.7).lambda, 0.7);
}

TEST(Sweep, SinglePointIsOneBranchSolve) {
  const BranchProblem& P = problem33();
  Branch b = sweep(P, {0.3}, true);
  ASSERT_EQ(b.points.size(), 1u);
  BranchPoint direct = solve_branch_point(P, 0.3, P.grid().zeros());
  EXPECT_TRUE(b.points[0].converged);
  EXPECT_EQ(b.points[0].solution, direct.solution);
  EXPECT_EQ(b.points[0].iterations, direct.iterations);
}

TEST(Sweep, BranchIsMonotoneWithDecreasingEnergy) {
  const BranchProblem& P = problem33();
  Branch b = sweep(P, {0.1, 0.3, 0.6, 1.0, 1.4}, true);
  for (const auto& pt : b.points) {
    ASSERT_TRUE(pt.converged) << pt.lambda << ": " << pt.failure;
    EXPECT_LE(pt.residual, 1e-8);
    EXPECT_LT(pt.energy_rel, 0.0);
  }
  std::string detail;
  EXPECT_TRUE(branch_is_monotone(b, 1e-10, &detail)) << detail;
  for (std::size_t k = 1; k < b.points.size(); ++k) EXPECT_LT(b.points[k].energy_rel, b.points[k - 1].energy_rel);
  EXPECT_TRUE(b.lambda_star_bracket.open);
}

TEST(Sweep, RejectsUnorderedLambdas) {
  EXPECT_THROW(sweep(problem33(), {0.3, 0.2}, true), InvalidParameter);
  EXPECT_THROW(sweep(problem33(), {-0.1}, true), InvalidParameter);
}

TEST(Sweep, WarmStartsNeverCostMore) {
  const BranchProblem& P = problem33();
  const std::vector<double> lambdas{0.2, 0.6, 1.2};
  Branch warm = sweep(P, lambdas, true);
  Branch cold = sweep(P, lambdas, false);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    ASSERT_TRUE(warm.points[k].converged);
    ASSERT_TRUE(cold.points[k].converged);
    EXPECT_LE(warm.points[k].iterations, cold.points[k].iterations) << "lambda " << lambdas[k];
    EXPECT_LE(sup_diff(warm.points[k].solution.span(), cold.points[k].solution.span()), 1e-6);
  }
}

TEST(BranchMonotone, DetectsCrossingPair) {
  Branch b;
  BranchPoint a, c;
  a.lambda = 1.0;
  c.lambda = 2.0;
  a.converged = c.converged = true;
  a.solution = Field(std::vector<double>{1.0, 1.0});
  c.solution = Field(std::vector<double>{2.0, 0.5});
  b.points = {a, c};
  std::string detail;
  EXPECT_FALSE(branch_is_monotone(b, 1e-10, &detail));
  EXPECT_FALSE(detail.empty());
  b.points[1].solution = Field(std::vector<double>{1.0, 1.0});
  EXPECT_FALSE(branch_is_monotone(b, 1e-10));  // equal fields are not strictly ordered
  b.points[1].solution = Field(std::vector<double>{1.0, 1.5});
  EXPECT_TRUE(branch_is_monotone(b, 1e-10));
}

TEST(LambdaStar, BracketInvariantAndWidth) {
  const BranchProblem& P = problem33();
  ContinuationOptions opt;
  LambdaBracket wide = estimate_lambda_star(P, 4e-3, opt);
  ASSERT_FALSE(wide.open) << wide.note;
  EXPECT_LE(wide.width(), 4e-3);
  EXPECT_TRUE(solve_branch_point(P, wide.lo, wide.lo_solution, opt).converged);
  EXPECT_FALSE(solve_branch_point(P, wide.hi, wide.lo_solution, opt).converged);

  LambdaBracket narrow = estimate_lambda_star(P, 1e-3, opt);
  ASSERT_FALSE(narrow.open);
  EXPECT_LE(narrow.width(), 1e-3);
  // A quarter of the tolerance is two more halvings, give or take one.
  const double ratio = wide.width() / narrow.width();
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 8.0);
  EXPECT_GE(narrow.lo, wide.lo);
  EXPECT_LE(narrow.hi, wide.hi);
}

TEST(LambdaStar, OpenBracketIsNeverFabricated) {
  ContinuationOptions opt;
  opt.lambda_start = 0.05;
  opt.lambda_max = 0.2;
  LambdaBracket b = estimate_lambda_star(problem33(), 1e-3, opt);
  EXPECT_TRUE(b.open);
  EXPECT_TRUE(std::isinf(b.hi));
  EXPECT_GE(b.lo, 0.05);
  EXPECT_FALSE(b.note.empty());
}

TEST(LambdaStar, NoSolutionWellAboveBracket) {
  const BranchProblem& P = problem33();
  LambdaBracket b = estimate_lambda_star(P, 1e-2);
  ASSERT_FALSE(b.open);
  NonexistenceReport r = nonexistence_probe(P, 2.0 * b.hi, 5, 42);
  EXPECT_EQ(r.attempts, 5);
  EXPECT_TRUE(r.all_failed());
  NonexistenceReport below = nonexistence_probe(P, 0.5 * b.lo, 2, 42);
  EXPECT_EQ(below.failures, 0);
}

TEST(ContinuationOptions, Validation) {
  ContinuationOptions o;
  o.lambda_growth = 1.0;
  EXPECT_THROW(o.validate(), InvalidParameter);
  o = {};
  o.jobs = 0;
  EXPECT_THROW(o.validate(), InvalidParameter);
}
