#pragma once

/**
 * @file
 * @brief Online optimal control problems with adaptive ellipsoidal terminal sets.
 *
 * Three schemes share one builder:
 *  - Adap: centers pinned at the origin, squared row constraints;
 *  - Asym: free centers, squared row constraints;
 *  - Rlxd: free centers, one-sided row constraints.
 *
 * The per-subsystem part (`add_local_constraints`, `add_local_cost`) is also
 * used by the consensus solver, where neighbor variables are local copies.
 */

#include "conic/solver.hpp"
#include "conic/variables.hpp"
#include "offline_synthesis.hpp"
#include "terminal_lmi.hpp"

#include <cctype>
#include <string>
#include <vector>

namespace dmpc {

enum class Scheme
{
  Adap,
  Asym,
  Rlxd,
};

inline const char * to_string(Scheme s)
{
  switch (s) {
    case Scheme::Adap: return "D-ADAP";
    case Scheme::Asym: return "D-ASYM";
    case Scheme::Rlxd: return "D-RLXD";
  }
  return "?";
}

/// Accepts "adap", "asym", "rlxd" and the D- prefixed names, case-insensitive.
inline Scheme parse_scheme(std::string s)
{
  for (auto & ch : s) { ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch))); }
  if (s.rfind("d-", 0) == 0) { s = s.substr(2); }
  if (s == "adap") { return Scheme::Adap; }
  if (s == "asym") { return Scheme::Asym; }
  if (s == "rlxd") { return Scheme::Rlxd; }
  throw ValidationError("unknown scheme '" + s + "' (expected adap, asym or rlxd)");
}

inline RowForm row_form(Scheme s) { return s == Scheme::Rlxd ? RowForm::Linear : RowForm::Quadratic; }

struct OcpOptions
{
  /// Forces c_i = 0 for every scheme; Adap always pins.
  bool pin_center{false};
  conic::SolveOptions solver{};
};

inline bool pins_center(Scheme s, const OcpOptions & opt) { return opt.pin_center || s == Scheme::Adap; }

/// Decision expressions seen by subsystem i. Neighbor-indexed entries follow maps.neighbors(i).
struct LocalOcpVars
{
  std::vector<std::vector<conic::AffineMatrixExpr>> x;  ///< x[p][t], t = 0..T
  std::vector<conic::AffineMatrixExpr> u;               ///< u_i(t), t = 0..T-1
  std::vector<TerminalSetExpr> sets;                    ///< (a_j, c_j)
};

/// S-procedure multipliers of one subsystem, one per neighbor in each row.
struct LocalMultipliers
{
  std::vector<conic::Var> lambda;
  std::vector<std::vector<conic::Var>> state_rows;  ///< [k][p]
  std::vector<std::vector<conic::Var>> input_rows;  ///< [l][p]
};

/// Numeric multiplier values; matrices are rows x |N_i|.
struct MultiplierValues
{
  std::vector<Vector> lambda;
  std::vector<Matrix> state_rows, input_rows;
};

/// Rejects row data the scheme cannot represent.
inline void validate_scheme(Scheme scheme, const DistributedSystem & sys)
{
  if (row_form(scheme) == RowForm::Linear) { return; }
  for (Index i = 0; i < sys.size(); ++i) {
    const auto & s = sys[i];
    if (s.state_rows() && !(s.g.array() > 0.0).all()) {
      throw ValidationError(std::string(to_string(scheme)) + ": subsystem " + std::to_string(i + 1)
                            + " has a nonpositive state bound, which the squared row form cannot represent");
    }
    if (s.input_rows() && !(s.h.array() > 0.0).all()) {
      throw ValidationError(std::string(to_string(scheme)) + ": subsystem " + std::to_string(i + 1)
                            + " has a nonpositive input bound, which the squared row form cannot represent");
    }
  }
}

/// x_{N_i}(t) = Σ_j T_ijᵀ x_j(t)
inline conic::AffineMatrixExpr neighborhood_state(Index i, const SelectionMaps & maps, const LocalOcpVars & v, Index t)
{
  conic::AffineMatrixExpr out(maps.neighborhood_dim(i), 1);
  const auto & nb = maps.neighbors(i);
  for (std::size_t p = 0; p < nb.size(); ++p) {
    out += Matrix(maps.extractor(i, nb[p]).transpose()) * v.x[p][static_cast<std::size_t>(t)];
  }
  return out;
}

/**
 * @brief Dynamics, stage constraints and terminal LMIs of subsystem i.
 *
 * Adds x_i(t+1) = A_{N_i} x_{N_i}(t) + B_i u_i(t) for t < T, G x_{N_i}(t) <= g
 * for t <= T, H u_i(t) <= h for t < T, terminal membership of x_i(T), the
 * invariance LMI and one row LMI per state and input row.
 */
inline LocalMultipliers add_local_constraints(conic::SdpProblem & p, Scheme scheme, Index i, const LocalOcpVars & v,
                                              const DistributedSystem & sys, const TerminalIngredients & ti)
{
  using conic::LinearExpr;
  const auto & maps = sys.maps;
  const auto & s    = sys[i];
  const auto ii     = static_cast<std::size_t>(i);
  const auto self   = static_cast<std::size_t>(maps.topology.position(i, i));
  const auto nb     = maps.neighbors(i).size();
  const Index T     = static_cast<Index>(v.u.size());
  const std::string tag = std::to_string(i + 1);

  for (Index t = 0; t < T; ++t) {
    const auto tt = static_cast<std::size_t>(t);
    p.add_equality(v.x[self][tt + 1] - (s.A * neighborhood_state(i, maps, v, t) + s.B * v.u[tt]));
    if (s.input_rows()) { p.add_inequality(conic::AffineMatrixExpr(Matrix(s.h)) - s.H * v.u[tt]); }
  }
  for (Index t = 0; t <= T; ++t) {
    if (s.state_rows()) { p.add_inequality(conic::AffineMatrixExpr(Matrix(s.g)) - s.G * neighborhood_state(i, maps, v, t)); }
  }

  const Matrix P_inv = ti.P[ii].llt().solve(Matrix::Identity(s.state_dim(), s.state_dim()));
  p.add_psd(membership_lmi(v.x[self][static_cast<std::size_t>(T)], v.sets[self], P_inv), "membership" + tag);

  LocalMultipliers mult;
  auto fresh = [&](const std::string & name) {
    std::vector<conic::Var> vars = p.add_variables(static_cast<Index>(nb), name + tag, conic::Sign::Nonnegative);
    std::vector<LinearExpr> expr(vars.begin(), vars.end());
    return std::make_pair(vars, expr);
  };

  auto [lam, lam_e] = fresh("lambda");
  mult.lambda       = lam;
  p.add_psd(invariance_lmi(i, closed_loop_local(i, sys, ti), P_inv, ti.P, maps, v.sets, lam_e), "invariance" + tag);

  const bool linear = row_form(scheme) == RowForm::Linear;
  for (Index k = 0; k < s.state_rows(); ++k) {
    auto [m, e] = fresh(linear ? "sigma" : "tau");
    mult.state_rows.push_back(m);
    p.add_psd(linear ? state_row_lmi_linear(i, k, sys, ti, v.sets, e) : state_row_lmi_quadratic(i, k, sys, ti, v.sets, e),
              "state row " + std::to_string(k + 1) + " of " + tag);
  }
  for (Index l = 0; l < s.input_rows(); ++l) {
    auto [m, e] = fresh(linear ? "beta" : "rho");
    mult.input_rows.push_back(m);
    p.add_psd(linear ? input_row_lmi_linear(i, l, sys, ti, v.sets, e) : input_row_lmi_quadratic(i, l, sys, ti, v.sets, e),
              "input row " + std::to_string(l + 1) + " of " + tag);
  }
  return mult;
}

/// J_i = Σ_{t<T} x_{N_i}ᵀ Q x_{N_i} + u_iᵀ R u_i, plus x_i(T)ᵀ P_i x_i(T).
inline void add_local_cost(conic::SdpProblem & p, Index i, const LocalOcpVars & v, const DistributedSystem & sys,
                           const TerminalIngredients & ti)
{
  const auto & s  = sys[i];
  const Index T   = static_cast<Index>(v.u.size());
  const auto self = static_cast<std::size_t>(sys.maps.topology.position(i, i));
  for (Index t = 0; t < T; ++t) {
    p.add_quadratic(neighborhood_state(i, sys.maps, v, t), s.Q);
    p.add_quadratic(v.u[static_cast<std::size_t>(t)], s.R);
  }
  p.add_quadratic(v.x[self][static_cast<std::size_t>(T)], ti.P[static_cast<std::size_t>(i)]);
}

/// Centralized OCP and handles to its decision expressions.
struct OcpProblem
{
  Scheme scheme{Scheme::Asym};
  Index horizon{0};
  conic::SdpProblem problem;
  std::vector<std::vector<conic::AffineMatrixExpr>> x;  ///< x[j][t]
  std::vector<std::vector<conic::AffineMatrixExpr>> u;  ///< u[j][t]
  std::vector<TerminalSetExpr> sets;
  std::vector<LocalMultipliers> multipliers;
};

/// Splits a global vector into per-subsystem blocks.
inline std::vector<Vector> split_state(const Vector & x, const SelectionMaps & maps)
{
  require(x.size() == maps.state_dim(), "state has " + std::to_string(x.size()) + " entries, expected "
                                            + std::to_string(maps.state_dim()));
  std::vector<Vector> out;
  for (std::size_t j = 0; j < maps.state_dims.size(); ++j) {
    out.push_back(x.segment(maps.state_offsets[j], maps.state_dims[j]));
  }
  return out;
}

/// The variables of subsystem i's neighborhood drawn from the global handles.
inline LocalOcpVars local_view(const OcpProblem & ocp, Index i, const SelectionMaps & maps)
{
  LocalOcpVars v;
  for (Index j : maps.neighbors(i)) {
    v.x.push_back(ocp.x[static_cast<std::size_t>(j)]);
    v.sets.push_back(ocp.sets[static_cast<std::size_t>(j)]);
  }
  v.u = ocp.u[static_cast<std::size_t>(i)];
  return v;
}

inline OcpProblem build_ocp(Scheme scheme, const Vector & x0, Index T, const TerminalIngredients & ti,
                            const DistributedSystem & sys, const OcpOptions & opt = {})
{
  require(T >= 1, "build_ocp: horizon must be at least 1");
  require(static_cast<Index>(ti.P.size()) == sys.size() && ti.K.size() == ti.P.size(),
          "build_ocp: terminal ingredients do not match the system");
  validate_scheme(scheme, sys);
  const auto x0_blocks = split_state(x0, sys.maps);
  const bool pinned    = pins_center(scheme, opt);

  OcpProblem ocp;
  ocp.scheme  = scheme;
  ocp.horizon = T;
  auto & p    = ocp.problem;
  for (Index j = 0; j < sys.size(); ++j) {
    const auto & s        = sys[j];
    const std::string tag = std::to_string(j + 1);
    std::vector<conic::AffineMatrixExpr> xj{conic::AffineMatrixExpr(Matrix(x0_blocks[static_cast<std::size_t>(j)]))};
    std::vector<conic::AffineMatrixExpr> uj;
    for (Index t = 0; t < T; ++t) {
      xj.push_back(conic::matrix_variable(p, s.state_dim(), 1, "x" + tag + "(" + std::to_string(t + 1) + ")"));
      uj.push_back(conic::matrix_variable(p, s.input_dim(), 1, "u" + tag + "(" + std::to_string(t) + ")"));
    }
    ocp.x.push_back(std::move(xj));
    ocp.u.push_back(std::move(uj));
    TerminalSetExpr set{conic::LinearExpr(p.add_variable("a" + tag, conic::Sign::Nonnegative)),
                        pinned ? conic::AffineMatrixExpr(s.state_dim(), 1)
                               : conic::matrix_variable(p, s.state_dim(), 1, "c" + tag)};
    ocp.sets.push_back(std::move(set));
  }
  for (Index i = 0; i < sys.size(); ++i) {
    const LocalOcpVars v = local_view(ocp, i, sys.maps);
    ocp.multipliers.push_back(add_local_constraints(p, scheme, i, v, sys, ti));
    add_local_cost(p, i, v, sys, ti);
  }
  return ocp;
}

struct OcpSolution
{
  Scheme scheme{Scheme::Asym};
  conic::SolveStatus status{conic::SolveStatus::NumericalFailure};
  Index horizon{0};
  std::vector<Matrix> x;  ///< per subsystem, n_i x (T+1)
  std::vector<Matrix> u;  ///< per subsystem, m_i x T
  std::vector<TerminalSet> sets;
  MultiplierValues multipliers;
  double J{0.0};                 ///< cost evaluated on the returned trajectories
  double solver_objective{0.0};  ///< objective reported by the conic solver
  Index iterations{0};

  bool feasible() const { return status == conic::SolveStatus::Optimal; }

  Vector state(Index t) const
  {
    Index n = 0;
    for (const auto & xi : x) { n += xi.rows(); }
    Vector out(n);
    Index off = 0;
    for (const auto & xi : x) {
      out.segment(off, xi.rows()) = xi.col(t);
      off += xi.rows();
    }
    return out;
  }

  Vector input(Index t) const
  {
    Index m = 0;
    for (const auto & ui : u) { m += ui.rows(); }
    Vector out(m);
    Index off = 0;
    for (const auto & ui : u) {
      out.segment(off, ui.rows()) = ui.col(t);
      off += ui.rows();
    }
    return out;
  }
};

/// Σ_i [Σ_{t<T} x_{N_i}ᵀQ_{N_i}x_{N_i} + u_iᵀR_iu_i] + x_i(T)ᵀP_i x_i(T)
inline double evaluate_cost(const std::vector<Matrix> & x, const std::vector<Matrix> & u, const DistributedSystem & sys,
                            const TerminalIngredients & ti)
{
  const auto & maps = sys.maps;
  require(static_cast<Index>(x.size()) == sys.size() && u.size() == x.size(), "evaluate_cost: one trajectory per subsystem");
  const Index T = u.front().cols();
  for (Index j = 0; j < sys.size(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    require(x[jj].rows() == sys[j].state_dim() && x[jj].cols() == T + 1, "evaluate_cost: state trajectory shape");
    require(u[jj].rows() == sys[j].input_dim() && u[jj].cols() == T, "evaluate_cost: input trajectory shape");
  }
  double J = 0.0;
  for (Index i = 0; i < sys.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    for (Index t = 0; t < T; ++t) {
      Vector xN = Vector::Zero(maps.neighborhood_dim(i));
      for (Index j : maps.neighbors(i)) {
        xN += maps.extractor(i, j).transpose() * x[static_cast<std::size_t>(j)].col(t);
      }
      J += xN.dot(sys[i].Q * xN) + u[ii].col(t).dot(sys[i].R * u[ii].col(t));
    }
    J += x[ii].col(T).dot(ti.P[ii] * x[ii].col(T));
  }
  return J;
}

/// Reads the trajectories, sets and multipliers of a solved centralized problem.
inline OcpSolution extract_solution(const OcpProblem & ocp, const conic::SolveResult & r, const DistributedSystem & sys,
                                    const TerminalIngredients & ti)
{
  OcpSolution sol;
  sol.scheme     = ocp.scheme;
  sol.status     = r.status;
  sol.horizon    = ocp.horizon;
  sol.iterations = r.iterations;
  if (!r.optimal()) { return sol; }
  const Index T = ocp.horizon;
  for (Index j = 0; j < sys.size(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    Matrix xj(sys[j].state_dim(), T + 1), uj(sys[j].input_dim(), T);
    for (Index t = 0; t <= T; ++t) { xj.col(t) = ocp.x[jj][static_cast<std::size_t>(t)].evaluate(r.assignment); }
    for (Index t = 0; t < T; ++t) { uj.col(t) = ocp.u[jj][static_cast<std::size_t>(t)].evaluate(r.assignment); }
    sol.x.push_back(xj);
    sol.u.push_back(uj);
    const auto & set = ocp.sets[jj];
    sol.sets.push_back({set.c.evaluate(r.assignment).col(0), std::max(0.0, set.a.evaluate(r.assignment))});
  }
  auto values = [&](const std::vector<std::vector<conic::Var>> & rows, std::size_t width) {
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      for (std::size_t q = 0; q < width; ++q) { m(static_cast<Index>(k), static_cast<Index>(q)) = r[rows[k][q]]; }
    }
    return m;
  };
  for (const auto & m : ocp.multipliers) {
    sol.multipliers.lambda.push_back(r.values(m.lambda));
    sol.multipliers.state_rows.push_back(values(m.state_rows, m.lambda.size()));
    sol.multipliers.input_rows.push_back(values(m.input_rows, m.lambda.size()));
  }
  sol.solver_objective = r.objective;
  sol.J                = evaluate_cost(sol.x, sol.u, sys, ti);
  return sol;
}

inline OcpSolution solve_ocp(Scheme scheme, const Vector & x0, Index T, const TerminalIngredients & ti,
                             const DistributedSystem & sys, const OcpOptions & opt = {})
{
  const OcpProblem ocp = build_ocp(scheme, x0, T, ti, sys, opt);
  return extract_solution(ocp, conic::solve(ocp.problem, opt.solver), sys, ti);
}

/// Worst residuals of a returned solution against its defining properties.
struct SolutionCheck
{
  double dynamics{0.0};    ///< max |x_i(t+1) − A x_N(t) − B u_i(t)|
  double state_rows{0.0};  ///< max excess of G x_N(t) − g, t <= T (0 if satisfied)
  double input_rows{0.0};  ///< max excess of H u_i(t) − h, t < T
  double membership{0.0};  ///< max excess of (x_i(T)−c_i)ᵀP_i(x_i(T)−c_i) − a_i²
  double initial{0.0};     ///< max |x(0) − x0|

  bool ok(double tol = 1e-6) const
  {
    return dynamics <= tol && state_rows <= tol && input_rows <= tol && membership <= tol && initial <= tol;
  }
};

inline SolutionCheck check_solution(const OcpSolution & sol, const Vector & x0, const DistributedSystem & sys,
                                    const TerminalIngredients & ti)
{
  require(sol.feasible(), "check_solution: solution is not feasible");
  const auto & maps = sys.maps;
  const Index T     = sol.horizon;
  SolutionCheck c;
  c.initial = max_abs(sol.state(0) - x0);
  for (Index i = 0; i < sys.size(); ++i) {
    const auto ii  = static_cast<std::size_t>(i);
    const auto & s = sys[i];
    for (Index t = 0; t <= T; ++t) {
      Vector xN = Vector::Zero(maps.neighborhood_dim(i));
      for (Index j : maps.neighbors(i)) { xN += maps.extractor(i, j).transpose() * sol.x[static_cast<std::size_t>(j)].col(t); }
      if (s.state_rows()) { c.state_rows = std::max(c.state_rows, (s.G * xN - s.g).maxCoeff()); }
      if (t < T) {
        c.dynamics = std::max(c.dynamics, max_abs(sol.x[ii].col(t + 1) - s.A * xN - s.B * sol.u[ii].col(t)));
        if (s.input_rows()) { c.input_rows = std::max(c.input_rows, (s.H * sol.u[ii].col(t) - s.h).maxCoeff()); }
      }
    }
    const Vector d = sol.x[ii].col(T) - sol.sets[ii].c;
    c.membership   = std::max(c.membership, d.dot(ti.P[ii] * d) - sol.sets[ii].alpha());
  }
  return c;
}

}  // namespace dmpc
