#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "grushin/continuation.hpp"
#include "grushin/multiplicity.hpp"

using namespace grushin;

TEST(PassThreshold, Examples) {
  EXPECT_DOUBLE_EQ(pass_threshold(1.0, 1.0, GrushinParams(2.0)), 0.25);
  EXPECT_NEAR(pass_threshold(2.0, 1.0, GrushinParams(1.0)), 0.9428090415820634, 1e-15);
  GrushinParams p(1.0);
  EXPECT_GT(pass_threshold(3.0, 0.5, p), pass_threshold(3.0, 1.0, p));
  EXPECT_GT(pass_threshold(3.0, 1.0, p), pass_threshold(3.0, 2.0, p));
  EXPECT_THROW(pass_threshold(0.0, 1.0, p), InvalidParameter);
  EXPECT_THROW(pass_threshold(1.0, -1.0, p), InvalidParameter);
  EXPECT_THROW(pass_threshold(1.0, 1.0, GrushinParams(0.0)), InvalidParameter);
}

TEST(RayleighQuotient, ScaleInvariant) {
  Grid2D g = Grid2D::square(1.0, 33);
  OperatorMatrix A(g, 1.0);
  Field u = g.sample([](double x, double y) { return (1 - x * x) * (1 - y * y) * (1 + 0.3 * x); });
  const double q = critical_exponent(GrushinParams(1.0));
  const double a = rayleigh_quotient(A, u, q);
  EXPECT_NEAR(rayleigh_quotient(A, 2.0 * u, q), a, 1e-12 * a);
  EXPECT_NEAR(rayleigh_quotient(A, -0.1 * u, q), a, 1e-12 * a);
}

TEST(Sobolev, LargerBoxGivesSmallerQuotient) {
  // Same mesh width, nested boxes, exponent chosen since Q = 2 has no critical one.
  GrushinParams params(0.0);
  SobolevOptions opt;
  opt.exponent = 4.0;
  double prev = std::numeric_limits<double>::infinity();
  for (auto [a, n] : {std::pair{0.5, 15}, std::pair{1.0, 31}, std::pair{2.0, 63}}) {
    const double s = sobolev_estimate(Grid2D::square(a, n), 0.0, params, opt).quotient;
    EXPECT_LE(s, prev * (1 + 1e-6)) << "half width " << a;
    prev = s;
  }
}

TEST(Sobolev, EstimateIsAtMostSeedQuotient) {
  Grid2D g = Grid2D::square(1.0, 33);
  GrushinParams params(1.0);
  OperatorMatrix A(g, 1.0);
  SobolevEstimate est = sobolev_estimate(g, 1.0, params);
  ASSERT_FALSE(est.history.empty());
  EXPECT_LE(est.quotient, est.history.front());
  for (std::size_t k = 1; k < est.history.size(); ++k) EXPECT_LE(est.history[k], est.history[k - 1]);
  EXPECT_NEAR(rayleigh_quotient(A, est.minimizer, critical_exponent(params)), est.quotient, 1e-9 * est.quotient);
  SobolevOptions no_exp;
  EXPECT_THROW(sobolev_estimate(g, 0.0, GrushinParams(0.0), no_exp), InvalidParameter);
}

TEST(Sobolev, BubbleQuotientFallsWithCutoffRadius) {
  GrushinParams params(1.0);
  Grid2D g = Grid2D::square(2.0, 257);
  OperatorMatrix A(g, 1.0);
  const double q = critical_exponent(params);
  double prev = std::numeric_limits<double>::infinity();
  for (double R : {0.1, 0.2, 0.3}) {
    BubbleSpec b{0.05, plane_point(1.0, 0.0), R};
    const double s = rayleigh_quotient(A, sample_bubble(g, params, b), q);
    EXPECT_LT(s, prev) << "radius " << R;
    prev = s;
  }
}

class MountainPassFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    problem_ = new BranchProblem(BranchProblem::build(Grid2D::square(1.0, 33), 1.0, 1.0, 2.0));
    first_ = new BranchPoint(solve_branch_point(*problem_, 0.3, problem_->grid().zeros()));
    MountainPassOptions opt;
    result_ = new MountainPassResult(mountain_pass(problem_->at(0.3), first_->solution, first_->solution, 16, opt));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete first_;
    delete problem_;
  }
  static BranchProblem* problem_;
  static BranchPoint* first_;
  static MountainPassResult* result_;
};

BranchProblem* MountainPassFixture::problem_ = nullptr;
BranchPoint* MountainPassFixture::first_ = nullptr;
MountainPassResult* MountainPassFixture::result_ = nullptr;

TEST_F(MountainPassFixture, EndpointsStayFixed) {
  ASSERT_TRUE(first_->converged);
  const MountainPassResult& r = *result_;
  ASSERT_EQ(r.path.size(), 16u);
  EXPECT_EQ(r.path.front(), first_->solution);
  Field end = first_->solution + r.t0 * first_->solution;
  EXPECT_LE(sup_diff(r.path.back().span(), end.span()), 1e-14 * sup_norm(end.span()));
  EXPECT_LT(energy_relative(problem_->at(0.3), r.path.back()), r.first_energy);
}

TEST_F(MountainPassFixture, NodesRespectConstraintAndSweepsDescend) {
  const MountainPassResult& r = *result_;
  for (const Field& v : r.path) {
    for (std::size_t i = 0; i < v.size(); ++i) ASSERT_GE(v[i], first_->solution[i] - 1e-12);
  }
  ASSERT_EQ(r.path_max.size(), r.path_max_before.size());
  for (std::size_t k = 0; k < r.path_max.size(); ++k) EXPECT_LE(r.path_max[k], r.path_max_before[k]);
}

TEST_F(MountainPassFixture, FindsSecondSubcriticalSolution) {
  const MountainPassResult& r = *result_;
  ASSERT_TRUE(r.found) << r.report;
  EXPECT_GT(r.distance, 1e-3);
  EXPECT_GT(r.level, r.first_energy);
  EXPECT_TRUE(r.ordered);
  EXPECT_LE(r.residual, 1e-7);
  const Field res = pde_residual(problem_->at(0.3), r.u_second);
  for (std::size_t i = 0; i < res.size(); ++i) {
    if (r.u_second[i] > first_->solution[i]) EXPECT_LE(std::abs(res[i]), 1e-7);
  }
}

TEST(MountainPass, RejectsBadInput) {
  BranchProblem P = BranchProblem::build(Grid2D::square(1.0, 9), 1.0, 1.0, 2.0);
  Field u = P.grid().zeros();
  EXPECT_THROW(mountain_pass(P.at(0.1), u, P.torsion, 2), InvalidParameter);
  EXPECT_THROW(mountain_pass(P.at(0.1), u, u, 8), InvalidParameter);
}
