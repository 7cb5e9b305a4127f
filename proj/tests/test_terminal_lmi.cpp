#include <dmpc/conic/solver.hpp>
#include <dmpc/offline_synthesis.hpp>
#include <dmpc/scenarios.hpp>
#include <dmpc/terminal_lmi.hpp>

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace dmpc;
using conic::AffineMatrixExpr;
using conic::LinearExpr;

namespace {

/// One scalar subsystem x+ = x + u with the given rows.
DistributedSystem scalar_system(Matrix G, Vector g, Matrix H, Vector h)
{
  SubsystemModel s;
  s.A = Matrix::Ones(1, 1);
  s.B = Matrix::Ones(1, 1);
  s.G = std::move(G);
  s.g = std::move(g);
  s.H = std::move(H);
  s.h = std::move(h);
  s.Q = Matrix::Identity(1, 1);
  s.R = Matrix::Identity(1, 1);
  return make_system({s}, Topology{{{0}}}, ModelChecks{false});
}

Matrix mat(double v) { return Matrix::Constant(1, 1, v); }
Vector vec(std::initializer_list<double> v)
{
  Vector out(static_cast<Index>(v.size()));
  Index k = 0;
  for (double x : v) { out(k++) = x; }
  return out;
}

TerminalSetExpr fixed_set(double c, double a) { return TerminalSetExpr::constant({vec({c}), a}); }

using RowBuilder = std::function<AffineMatrixExpr(const std::vector<TerminalSetExpr> &, const std::vector<LinearExpr> &)>;

/// Largest a (capped at 1e3) such that the LMI is feasible for some multiplier >= 0, with c fixed.
double max_certified_a(double c, const RowBuilder & build)
{
  conic::SdpProblem p;
  const auto a  = p.add_variable("a", conic::Sign::Nonnegative);
  const auto mu = p.add_variable("mu", conic::Sign::Nonnegative);
  p.add_inequality(LinearExpr(1e3) - LinearExpr(a));
  TerminalSetExpr set{LinearExpr(a), AffineMatrixExpr(Matrix(mat(c)))};
  p.add_psd(build({set}, {LinearExpr(mu)}), "row");
  p.add_objective(-1.0 * LinearExpr(a));
  const auto r = conic::solve(p);
  if (!r.optimal()) { return -1.0; }
  return r[a];
}

/// Whether the LMI at fixed (c, a) is feasible for some multiplier >= 0.
bool feasible_at(double c, double a, const RowBuilder & build)
{
  conic::SdpProblem p;
  const auto mu = p.add_variable("mu", conic::Sign::Nonnegative);
  p.add_psd(build({fixed_set(c, a)}, {LinearExpr(mu)}), "row");
  return conic::solve(p).optimal();
}

double min_eig(const AffineMatrixExpr & e) { return min_eigenvalue(e.evaluate(Vector::Zero(0))); }

}  // namespace

TEST(Membership, CenterIsInside)
{
  const Matrix Pinv = mat(1.0);
  for (double a : {0.0, 0.3, 2.0}) {
    const auto set = fixed_set(0.4, a);
    EXPECT_GE(min_eig(membership_lmi(AffineMatrixExpr(Matrix(mat(0.4))), set, Pinv)), -1e-14);
  }
}

TEST(Membership, BoundaryAndExterior)
{
  const auto set = fixed_set(0.0, 1.0);
  const Matrix boundary = membership_lmi(AffineMatrixExpr(Matrix(mat(1.0))), set, mat(1.0)).evaluate(Vector::Zero(0));
  EXPECT_NEAR(boundary.determinant(), 0.0, 1e-14);
  EXPECT_GE(min_eigenvalue(boundary), -1e-14);
  const Matrix outside = membership_lmi(AffineMatrixExpr(Matrix(mat(1.5))), set, mat(1.0)).evaluate(Vector::Zero(0));
  EXPECT_LT(outside.determinant(), 0.0);
}

TEST(Membership, AgreesWithPredicateOnRandomPoints)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Matrix P(2, 2);
  P << 2.0, 0.3, 0.3, 1.0;
  const Matrix Pinv = P.inverse();
  const TerminalSet set{vec({0.2, -0.1}), 0.9};
  for (int k = 0; k < 200; ++k) {
    const Vector x = vec({u(rng), u(rng)});
    const bool inside = check_membership(x, set, P);
    const double eig  = min_eig(membership_lmi(AffineMatrixExpr(Matrix(x)), TerminalSetExpr::constant(set), Pinv));
    EXPECT_EQ(inside, eig >= -1e-12) << x.transpose();
  }
}

TEST(CheckMembership, Cases)
{
  const Matrix P = mat(4.0);
  const TerminalSet set{vec({1.0}), 1.0};
  EXPECT_TRUE(check_membership(vec({1.0}), set, P));
  EXPECT_TRUE(check_membership(vec({1.5}), set, P));  // (0.5)^2 * 4 = 1
  EXPECT_FALSE(check_membership(vec({1.5 + 1e-6}), set, P));
  EXPECT_FALSE(check_membership(vec({-3.0}), set, P));
}

TEST(Invariance, CenterZeroMatchesOriginForm)
{
  const auto sys = scenarios::coupled_pair();
  const auto ti  = *synthesize(sys).ingredients;
  conic::SdpProblem p;
  const auto a = p.add_variables(2, "a");
  const auto l = p.add_variables(2, "l");
  for (Index i = 0; i < 2; ++i) {
    std::vector<TerminalSetExpr> sets;
    for (Index j = 0; j < 2; ++j) { sets.push_back({LinearExpr(a[static_cast<std::size_t>(j)]), AffineMatrixExpr(1, 1)}); }
    const std::vector<LinearExpr> lam{LinearExpr(l[0]), LinearExpr(l[1])};
    const Matrix A_cl = closed_loop_local(i, sys, ti);
    const auto expr   = invariance_lmi(i, A_cl, ti.P[static_cast<std::size_t>(i)].inverse(), ti.P, sys.maps, sets, lam);
    std::mt19937_64 rng(static_cast<unsigned>(i));
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int k = 0; k < 5; ++k) {
      const Vector x = vec({u(rng), u(rng), u(rng), u(rng)});
      Matrix origin  = Matrix::Zero(4, 4);
      const double ai = x(i);
      origin(0, 0)    = ai / ti.P[static_cast<std::size_t>(i)](0, 0);
      const Matrix alpha = vec({x(0), x(1)}).asDiagonal();
      origin.block(0, 1, 1, 2) = A_cl * alpha;
      origin.block(1, 0, 2, 1) = (A_cl * alpha).transpose();
      origin(1, 1) = x(2) * ti.P[0](0, 0);
      origin(2, 2) = x(3) * ti.P[1](0, 0);
      origin(3, 3) = ai - x(2) - x(3);
      EXPECT_LT((expr.evaluate(x) - origin).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(Invariance, FixedPointWithZeroSize)
{
  // x+ = x under K = 0, so every c is an equilibrium; the point set {c} is invariant.
  const auto sys = scalar_system(Matrix::Zero(0, 1), Vector::Zero(0), Matrix::Zero(0, 1), Vector::Zero(0));
  const Matrix A_cl = sys[0].A;
  const auto expr = invariance_lmi(0, A_cl, mat(1.0), {mat(1.0)}, sys.maps, {fixed_set(0.7, 0.0)}, {LinearExpr(0.0)});
  EXPECT_GE(min_eig(expr), -1e-14);
}

TEST(Invariance, LmiSizeNeverExceedsSampledSize)
{
  // Largest uniform a with c = 0 certified by invariance plus state and input rows,
  // against the largest a for which sampling finds no violated implication.
  const auto sys = scenarios::coupled_pair();
  const auto ti  = *synthesize(sys).ingredients;
  conic::SdpProblem p;
  const auto a = p.add_variable("a", conic::Sign::Nonnegative);
  for (Index i = 0; i < 2; ++i) {
    const std::vector<TerminalSetExpr> sets(2, TerminalSetExpr{LinearExpr(a), AffineMatrixExpr(1, 1)});
    auto mult = [&](const std::string & tag) {
      std::vector<LinearExpr> out;
      for (const auto & v : p.add_variables(2, tag, conic::Sign::Nonnegative)) { out.emplace_back(v); }
      return out;
    };
    const auto ii = static_cast<std::size_t>(i);
    p.add_psd(invariance_lmi(i, closed_loop_local(i, sys, ti), ti.P[ii].inverse(), ti.P, sys.maps, sets, mult("l")));
    for (Index k = 0; k < sys[i].state_rows(); ++k) { p.add_psd(state_row_lmi_linear(i, k, sys, ti, sets, mult("s"))); }
    for (Index l = 0; l < sys[i].input_rows(); ++l) { p.add_psd(input_row_lmi_linear(i, l, sys, ti, sets, mult("b"))); }
  }
  p.add_objective(-1.0 * LinearExpr(a));
  const auto r = conic::solve(p);
  ASSERT_TRUE(r.optimal());
  const double a_lmi = r[a];
  ASSERT_GT(a_lmi, 0.0);

  auto clean = [&](double av) {
    return sample_soundness(sys, ti, {{vec({0.0}), av}, {vec({0.0}), av}}, 10000, 3).sound();
  };
  double lo = 0.0, hi = 10.0 * a_lmi;
  for (int k = 0; k < 40; ++k) {
    const double mid = 0.5 * (lo + hi);
    (clean(mid) ? lo : hi) = mid;
  }
  EXPECT_LE(a_lmi, lo + 1e-6);
  EXPECT_TRUE(clean(a_lmi));
}

TEST(StateRowQuadratic, OriginOnlyFeasibleWithoutMultiplier)
{
  const auto sys = scalar_system(mat(1.0), vec({5.0}), Matrix::Zero(0, 1), Vector::Zero(0));
  const TerminalIngredients ti{{mat(1.0)}, {mat(0.0)}};
  EXPECT_GE(min_eig(state_row_lmi_quadratic(0, 0, sys, ti, {fixed_set(0.0, 0.0)}, {LinearExpr(0.0)})), 0.0);
  EXPECT_THROW(row_lmi_quadratic(0, mat(1.0), 0.0, ti.P, sys.maps, {fixed_set(0.0, 0.0)}, {LinearExpr(0.0)}),
               ValidationError);
}

TEST(StateRowQuadratic, SupportFunctionBound)
{
  const auto sys = scalar_system(mat(1.0), vec({5.0}), Matrix::Zero(0, 1), Vector::Zero(0));
  const TerminalIngredients ti{{mat(1.0)}, {mat(0.0)}};
  auto build = [&](const auto & sets, const auto & mult) { return state_row_lmi_quadratic(0, 0, sys, ti, sets, mult); };
  EXPECT_NEAR(max_certified_a(0.0, build), 5.0, 1e-6);
  EXPECT_FALSE(feasible_at(-6.0, 0.5, build));
}

TEST(StateRowLinear, TightAndOffsetCenters)
{
  const auto sys = scalar_system(mat(1.0), vec({5.0}), Matrix::Zero(0, 1), Vector::Zero(0));
  const TerminalIngredients ti{{mat(1.0)}, {mat(0.0)}};
  auto build = [&](const auto & sets, const auto & mult) { return state_row_lmi_linear(0, 0, sys, ti, sets, mult); };
  EXPECT_NEAR(max_certified_a(0.0, build), 5.0, 1e-6);
  // Analytic certificate σ = 2.5 at a = 5.
  EXPECT_NEAR(min_eig(state_row_lmi_linear(0, 0, sys, ti, {fixed_set(0.0, 5.0)}, {LinearExpr(2.5)})), 0.0, 1e-12);
  EXPECT_TRUE(feasible_at(-6.0, 0.5, build));
  EXPECT_GE(min_eig(state_row_lmi_linear(0, 0, sys, ti, {fixed_set(-6.0, 0.5)}, {LinearExpr(5.5)})), -1e-12);
  // Point sets: feasible iff G c <= g.
  EXPECT_TRUE(feasible_at(4.9, 0.0, build));
  EXPECT_FALSE(feasible_at(5.1, 0.0, build));
}

TEST(InputRowQuadratic, Cases)
{
  const auto sys = scalar_system(Matrix::Zero(0, 1), Vector::Zero(0), vec({1.0, -1.0}), vec({1.0, 0.25}));
  const TerminalIngredients zero{{mat(1.0)}, {mat(0.0)}};
  for (Index l = 0; l < 2; ++l) {
    EXPECT_GE(min_eig(input_row_lmi_quadratic(0, l, sys, zero, {fixed_set(0.3, 7.0)}, {LinearExpr(0.0)})), 0.0);
  }
  const TerminalIngredients unit{{mat(1.0)}, {mat(1.0)}};
  EXPECT_NEAR(max_certified_a(0.0, [&](const auto & s, const auto & m) {
                return input_row_lmi_quadratic(0, 0, sys, unit, s, m);
              }), 1.0, 1e-6);
  const TerminalIngredients half{{mat(1.0)}, {mat(-0.5)}};
  EXPECT_NEAR(max_certified_a(0.0, [&](const auto & s, const auto & m) {
                return input_row_lmi_quadratic(0, 1, sys, half, s, m);
              }), 0.5, 1e-6);
  EXPECT_NEAR(max_certified_a(0.0, [&](const auto & s, const auto & m) {
                return input_row_lmi_quadratic(0, 0, sys, half, s, m);
              }), 2.0, 1e-6);
}

TEST(InputRowLinear, AsymmetricBox)
{
  const auto sys = scalar_system(Matrix::Zero(0, 1), Vector::Zero(0), vec({1.0, -1.0}), vec({1.0, 0.25}));
  const TerminalIngredients zero{{mat(1.0)}, {mat(0.0)}};
  for (Index l = 0; l < 2; ++l) {
    EXPECT_GE(min_eig(input_row_lmi_linear(0, l, sys, zero, {fixed_set(0.3, 7.0)}, {LinearExpr(0.0)})), 0.0);
  }
  const TerminalIngredients unit{{mat(1.0)}, {mat(1.0)}};
  for (Index l = 0; l < 2; ++l) {
    auto build = [&](const auto & s, const auto & m) { return input_row_lmi_linear(0, l, sys, unit, s, m); };
    EXPECT_NEAR(max_certified_a(0.375, build), 0.625, 1e-6);
  }
  EXPECT_NEAR(max_certified_a(0.0, [&](const auto & s, const auto & m) {
                return input_row_lmi_linear(0, 1, sys, unit, s, m);
              }), 0.25, 1e-6);
}

TEST(RowLmi, LinearTightAndQuadraticNoLooser)
{
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double P   = 0.5 + 2.5 * u(rng);
    const double Gk  = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 1.5 * u(rng));
    const double g   = 1.0 + 4.0 * u(rng);
    const double c   = (u(rng) - 0.5) * 1.8 * g / std::abs(Gk);
    const double cap = (g - Gk * c) / (std::abs(Gk) / std::sqrt(P));
    const auto sys   = scalar_system(mat(Gk), vec({g}), Matrix::Zero(0, 1), Vector::Zero(0));
    const TerminalIngredients ti{{mat(P)}, {mat(0.0)}};
    const double lin  = max_certified_a(c, [&](const auto & s, const auto & m) {
      return state_row_lmi_linear(0, 0, sys, ti, s, m);
    });
    const double quad = max_certified_a(c, [&](const auto & s, const auto & m) {
      return state_row_lmi_quadratic(0, 0, sys, ti, s, m);
    });
    EXPECT_NEAR(lin, cap, 1e-6) << "instance " << k;
    EXPECT_LE(quad, lin + 1e-6) << "instance " << k;
  }
}

TEST(TerminalLmi, AffineInDecisionVariables)
{
  const auto sys = scenarios::coupled_pair();
  const auto ti  = *synthesize(sys).ingredients;
  conic::SdpProblem p;
  const auto a = p.add_variables(2, "a");
  const auto c = p.add_variables(2, "c");
  const auto m = p.add_variables(2, "m");
  std::vector<TerminalSetExpr> sets;
  for (std::size_t j = 0; j < 2; ++j) { sets.push_back({LinearExpr(a[j]), AffineMatrixExpr::column({c[j]})}); }
  const std::vector<LinearExpr> mult{LinearExpr(m[0]), LinearExpr(m[1])};
  const std::vector<AffineMatrixExpr> exprs{
      invariance_lmi(0, closed_loop_local(0, sys, ti), ti.P[0].inverse(), ti.P, sys.maps, sets, mult),
      state_row_lmi_quadratic(0, 0, sys, ti, sets, mult), input_row_lmi_quadratic(0, 1, sys, ti, sets, mult),
      state_row_lmi_linear(1, 1, sys, ti, sets, mult), input_row_lmi_linear(1, 0, sys, ti, sets, mult)};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto & e : exprs) {
    for (int k = 0; k < 10; ++k) {
      Vector x(6), d(6);
      for (Index q = 0; q < 6; ++q) {
        x(q) = u(rng);
        d(q) = u(rng);
      }
      const Matrix second = e.evaluate(x + d) + e.evaluate(x - d) - 2.0 * e.evaluate(x);
      EXPECT_LT(second.cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(Soundness, InflatedSetIsCaught)
{
  const auto sys = scenarios::coupled_pair();
  const auto ti  = *synthesize(sys).ingredients;
  EXPECT_TRUE(sample_soundness(sys, ti, {{vec({0.0}), 0.0}, {vec({0.0}), 0.0}}, 1000).sound());
  const auto big = sample_soundness(sys, ti, {{vec({0.0}), 5.0}, {vec({0.0}), 5.0}}, 1000);
  EXPECT_GT(big.violations(), 0);
  // Deterministic for a fixed seed.
  const auto again = sample_soundness(sys, ti, {{vec({0.0}), 5.0}, {vec({0.0}), 5.0}}, 1000);
  EXPECT_EQ(big.violations(), again.violations());
  EXPECT_EQ(big.worst_excess, again.worst_excess);
}
