#include <dmpc/conic/solver.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace dmpc;
using namespace dmpc::conic;

namespace {

Matrix m2(double a, double b, double c, double d)
{
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

}  // namespace

TEST(EvalExpr, ZeroCoefficientsReturnConstant)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  AffineMatrixExpr e(m2(1, 2, 2, 3));
  e.add_term(x, Matrix::Zero(2, 2));
  Vector a(1);
  a << 7.0;
  EXPECT_TRUE(eval_expr(e, a).isApprox(m2(1, 2, 2, 3)));
}

TEST(EvalExpr, IdentityTimesVariable)
{
  SdpProblem p;
  const Var x  = p.add_variable("x");
  const auto e = AffineMatrixExpr::term(x, Matrix::Identity(3, 3));
  Vector a(1);
  a << 3.0;
  EXPECT_TRUE(eval_expr(e, a).isApprox(3.0 * Matrix::Identity(3, 3)));
}

TEST(EvalExpr, MatchesNaiveSummation)
{
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  SdpProblem p;
  const auto vars = p.add_variables(5, "y");
  std::vector<Matrix> coefs;
  Matrix c0 = symmetrize(Matrix::NullaryExpr(4, 4, [&] { return nd(rng); }));
  AffineMatrixExpr e(c0);
  for (const auto & v : vars) {
    coefs.push_back(symmetrize(Matrix::NullaryExpr(4, 4, [&] { return nd(rng); })));
    e.add_term(v, coefs.back());
  }
  Vector a = Vector::NullaryExpr(5, [&] { return nd(rng); });
  Matrix naive = c0;
  for (int k = 0; k < 5; ++k) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) { naive(r, c) += a(k) * coefs[static_cast<std::size_t>(k)](r, c); }
    }
  }
  EXPECT_LE((eval_expr(e, a) - naive).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EvalExpr, MissingVariableThrows)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  const Var y = p.add_variable("y");
  auto e      = AffineMatrixExpr::term(y, Matrix::Identity(2, 2));
  (void)x;
  Vector a(1);
  a << 1.0;
  EXPECT_THROW(eval_expr(e, a), MissingVariable);
}

TEST(Solve, PsdCorner)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  AffineMatrixExpr e(m2(0, 0, 0, 1));
  e.add_term(x, m2(1, 0, 0, 0));
  p.add_psd(e);
  p.add_objective(x);
  const auto r = solve(p);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  EXPECT_NEAR(r[x], 0.0, 1e-6);
}

TEST(Solve, TwoByTwoPsdIffXAtLeastOne)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  AffineMatrixExpr e(m2(0, 1, 1, 0));
  e.add_term(x, Matrix::Identity(2, 2));
  p.add_psd(e);
  p.add_objective(x);
  const auto r = solve(p);
  ASSERT_EQ(r.status, SolveStatus::Optimal);
  EXPECT_NEAR(r[x], 1.0, 1e-7);
  EXPECT_NEAR(r.objective, 1.0, 1e-7);
}

TEST(Solve, NegativeDiagonalIsInfeasible)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  AffineMatrixExpr e(m2(-1, 0, 0, -1));
  e.add_term(x, m2(0, 1, 1, 0));
  p.add_psd(e);
  p.add_objective(x);
  const auto r = solve(p);
  EXPECT_EQ(r.status, SolveStatus::Infeasible);
  EXPECT_GT(r.infeasibility_margin, 0.5);
}

TEST(Solve, UnboundedLinearObjective)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  p.add_inequality(LinearExpr(x) - 1.0);
  p.add_objective(-1.0 * LinearExpr(x));
  EXPECT_EQ(solve(p).status, SolveStatus::Unbounded);
}

TEST(Solve, InconsistentEqualitiesAreInfeasible)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  p.add_equality(LinearExpr(x) - 1.0);
  p.add_equality(LinearExpr(x) - 2.0);
  p.add_objective(x);
  EXPECT_EQ(solve(p).status, SolveStatus::Infeasible);
}

TEST(Solve, MaxIterationsIsNumericalFailureNotInfeasible)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  AffineMatrixExpr e(m2(0, 1, 1, 0));
  e.add_term(x, Matrix::Identity(2, 2));
  p.add_psd(e);
  p.add_objective(x);
  SolveOptions o;
  o.max_iter = 2;
  EXPECT_EQ(solve(p, o).status, SolveStatus::NumericalFailure);
}

TEST(QuadraticEpigraph, ZeroQuadraticLeavesObjective)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  p.add_objective(2.0 * LinearExpr(x));
  const Var t = p.add_variable("t");
  const auto lift = quadratic_epigraph(p, t);
  EXPECT_FALSE(lift.constraint.has_value());
  EXPECT_DOUBLE_EQ(lift.objective.coefficient(x), 2.0);
  EXPECT_DOUBLE_EQ(lift.objective.coefficient(t), 0.0);
}

TEST(QuadraticEpigraph, ScalarSquareLift)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  p.add_quadratic(AffineMatrixExpr::term(x, Matrix::Ones(1, 1)), Matrix::Ones(1, 1));
  const Var t     = p.add_variable("t");
  const auto lift = quadratic_epigraph(p, t);
  ASSERT_TRUE(lift.constraint.has_value());
  Vector a(2);
  a << 3.0, 9.0;
  EXPECT_TRUE(lift.constraint->expr.evaluate(a).isApprox(m2(9, 3, 3, 1)));
  // minimize x² with x >= 3 through the lift: t* = 9
  p.add_inequality(LinearExpr(x) - 3.0);
  const auto r = solve(p);
  ASSERT_TRUE(r.optimal());
  EXPECT_NEAR(r.objective, 9.0, 1e-6);
}

TEST(QuadraticEpigraph, RejectsIndefiniteWeight)
{
  SdpProblem p;
  const Var x = p.add_variable("x");
  EXPECT_THROW(p.add_quadratic(AffineMatrixExpr::term(x, Matrix::Ones(1, 1)), -Matrix::Ones(1, 1)), ValidationError);
}

// Library of problems with analytic optima.
TEST(Solve, AnalyticLibrary)
{
  // 1) max eigenvalue of a symmetric matrix: min t s.t. tI - A ⪰ 0.
  {
    Matrix A(3, 3);
    A << 2, 1, 0, 1, 3, 1, 0, 1, 4;
    SdpProblem p;
    const Var t = p.add_variable("t");
    AffineMatrixExpr e(Matrix(-A));
    e.add_term(t, Matrix::Identity(3, 3));
    p.add_psd(e);
    p.add_objective(t);
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, max_eigenvalue(A), 1e-6);
  }
  // 2) least squares: min ‖x - (1,2)‖², x1 + x2 = 1 → x = (0, 1), value 2.
  {
    SdpProblem p;
    const auto x = p.add_variables(2, "x");
    p.add_quadratic(AffineMatrixExpr::column(x) - Matrix(Eigen::Vector2d(1.0, 2.0)), Matrix::Identity(2, 2));
    p.add_equality(LinearExpr(x[0]) + LinearExpr(x[1]) - 1.0);
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, 2.0, 1e-6);
    EXPECT_NEAR(r[x[0]], 0.0, 1e-6);
  }
  // 3) LP: min x + y, x >= 1, y >= 2, x + y >= 4 → 4.
  {
    SdpProblem p;
    const Var x = p.add_variable("x"), y = p.add_variable("y");
    p.add_inequality(LinearExpr(x) - 1.0);
    p.add_inequality(LinearExpr(y) - 2.0);
    p.add_inequality(LinearExpr(x) + LinearExpr(y) - 4.0);
    p.add_objective(LinearExpr(x) + LinearExpr(y));
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, 4.0, 1e-6);
  }
  // 4) trace maximization over a ball: max x + y s.t. [[1, x, y],[x, 1, 0],[y, 0, 1]] ⪰ 0 → √2.
  {
    SdpProblem p;
    const Var x = p.add_variable("x"), y = p.add_variable("y");
    Matrix Ex = Matrix::Zero(3, 3), Ey = Matrix::Zero(3, 3);
    Ex(0, 1) = Ex(1, 0) = 1.0;
    Ey(0, 2) = Ey(2, 0) = 1.0;
    AffineMatrixExpr e(Matrix(Matrix::Identity(3, 3)));
    e.add_term(x, Ex).add_term(y, Ey);
    p.add_psd(e);
    p.add_objective(-1.0 * (LinearExpr(x) + LinearExpr(y)));
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, -std::sqrt(2.0), 1e-6);
  }
  // 5) scalar Lyapunov: min p s.t. p - a²p - q >= 0 with a = 0.5, q = 1 → 4/3.
  {
    SdpProblem p;
    const Var v = p.add_variable("p");
    AffineMatrixExpr e(Matrix::Constant(1, 1, -1.0));
    e.add_term(v, Matrix::Constant(1, 1, 1.0 - 0.25));
    p.add_psd(e);
    p.add_objective(v);
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, 4.0 / 3.0, 1e-6);
  }
}

TEST(Solve, ScalingAnLmiLeavesOptimumUnchanged)
{
  for (double scale : {1e-3, 1.0, 250.0}) {
    SdpProblem p;
    const Var x = p.add_variable("x");
    AffineMatrixExpr e(Matrix(scale * m2(0, 1, 1, 0)));
    e.add_term(x, scale * Matrix::Identity(2, 2));
    p.add_psd(e);
    p.add_objective(x);
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.objective, 1.0, 1e-8 * 10);
  }
}

TEST(Solve, RoundTripNeverViolatesFeasibilityTolerance)
{
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    SdpProblem p;
    const auto y = p.add_variables(3, "y");
    for (int b = 0; b < 3; ++b) {
      // F0 = I keeps the origin strictly feasible.
      AffineMatrixExpr e(Matrix(Matrix::Identity(3, 3)));
      for (const auto & v : y) { e.add_term(v, symmetrize(Matrix::NullaryExpr(3, 3, [&] { return nd(rng); }))); }
      p.add_psd(e);
    }
    LinearExpr obj;
    for (const auto & v : y) { obj.add(v, nd(rng)); }
    p.add_objective(obj);
    p.add_quadratic(AffineMatrixExpr::column(y), 0.1 * Matrix::Identity(3, 3));
    const auto r = solve(p);
    ASSERT_TRUE(r.optimal()) << to_string(r.status);
    EXPECT_LE(max_constraint_violation(p, r.assignment), 1e-8);
  }
}
