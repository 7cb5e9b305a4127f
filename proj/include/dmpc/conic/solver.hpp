#pragma once

/**
 * @file
 * @brief Front end of the conic layer: presolve, interior-point solve and
 *        status classification (Optimal / Infeasible / Unbounded / NumericalFailure).
 */

#include "ipm.hpp"
#include "problem.hpp"

#include <ostream>

#include <string>
#include <vector>

namespace dmpc::conic {

enum class SolveStatus
{
  Optimal,
  Infeasible,
  Unbounded,
  NumericalFailure,
};

inline const char * to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::Optimal: return "OPTIMAL";
    case SolveStatus::Infeasible: return "INFEASIBLE";
    case SolveStatus::Unbounded: return "UNBOUNDED";
    case SolveStatus::NumericalFailure: return "NUMFAIL";
  }
  return "NUMFAIL";
}

inline std::ostream & operator<<(std::ostream & os, SolveStatus s) { return os << to_string(s); }

struct SolveOptions
{
  double feas_tol{1e-8};
  double opt_tol{1e-8};
  int max_iter{200};
  /// Every user LMI F ⪰ 0 is imposed as F ⪰ lmi_shift·I.
  double lmi_shift{0.0};
  /// Phase-I margin above which a problem is declared infeasible.
  double infeas_tol{1e-6};
  /// Accuracy accepted when the interior-point iterations stall short of the targets.
  double reduced_tol{1e-6};
};

struct SolveResult
{
  SolveStatus status{SolveStatus::NumericalFailure};
  Assignment assignment;
  double objective{0.0};
  /// max(0, -min eigenvalue) over all LMIs and linear rows at the assignment.
  double max_psd_residual{0.0};
  /// Phase-I value min{t : F(y) + tI ⪰ 0}; positive values certify infeasibility.
  double infeasibility_margin{0.0};
  int iterations{0};
  /// Optimal only to SolveOptions::reduced_tol.
  bool reduced_accuracy{false};

  bool optimal() const { return status == SolveStatus::Optimal; }
  double operator[](Var v) const { return assignment(v.id); }

  Vector values(const std::vector<Var> & vars) const
  {
    Vector out(static_cast<Index>(vars.size()));
    for (std::size_t k = 0; k < vars.size(); ++k) { out(static_cast<Index>(k)) = assignment(vars[k].id); }
    return out;
  }
};

namespace detail {

/// y = y0 + N z, with N stored row-wise as sparse (column, coefficient) lists.
struct Elimination
{
  Vector y0;
  std::vector<std::vector<std::pair<Index, double>>> rows;
  Index free_vars{0};
  bool consistent{true};
  double residual{0.0};
};

/// Reduced row echelon elimination of A y = b with threshold pivoting.
inline Elimination eliminate_equalities(const Matrix & A_in, const Vector & b_in, Index n)
{
  Matrix A = A_in;
  Vector b = b_in;
  const Index rows = A.rows();
  std::vector<Index> pivot_col;
  std::vector<char> is_pivot(static_cast<std::size_t>(n), 0);
  Elimination el;

  Index r = 0;
  for (Index row = 0; row < rows; ++row) {
    // Move the current equation to position r.
    A.row(r).swap(A.row(row));
    std::swap(b(r), b(row));
    const double scale = max_abs(A.row(r));
    if (scale <= 1e-12 * std::max(1.0, A_in.size() > 0 ? max_abs(A_in) : 0.0)) {
      el.residual = std::max(el.residual, std::abs(b(r)));
      continue;
    }
    Index col = -1;
    for (Index k = n - 1; k >= 0; --k) {
      if (!is_pivot[static_cast<std::size_t>(k)] && std::abs(A(r, k)) >= 0.1 * scale) {
        col = k;
        break;
      }
    }
    const double pv = A(r, col);
    A.row(r) /= pv;
    b(r) /= pv;
    for (Index other = 0; other < rows; ++other) {
      if (other != r && A(other, col) != 0.0) {
        const double f = A(other, col);
        A.row(other) -= f * A.row(r);
        b(other) -= f * b(r);
      }
    }
    is_pivot[static_cast<std::size_t>(col)] = 1;
    pivot_col.push_back(col);
    ++r;
  }
  // Remaining rows (r..rows) are zero after elimination; check consistency.
  for (Index k = r; k < rows; ++k) { el.residual = std::max(el.residual, std::abs(b(k))); }
  el.consistent = el.residual <= 1e-9 * (1.0 + max_abs(b_in));

  std::vector<Index> free_index(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    if (!is_pivot[static_cast<std::size_t>(k)]) { free_index[static_cast<std::size_t>(k)] = el.free_vars++; }
  }
  el.y0 = Vector::Zero(n);
  el.rows.assign(static_cast<std::size_t>(n), {});
  for (Index k = 0; k < n; ++k) {
    if (free_index[static_cast<std::size_t>(k)] >= 0) { el.rows[static_cast<std::size_t>(k)].push_back({free_index[static_cast<std::size_t>(k)], 1.0}); }
  }
  for (std::size_t q = 0; q < pivot_col.size(); ++q) {
    const Index pr = static_cast<Index>(q), pc = pivot_col[q];
    el.y0(pc) = b(pr);
    for (Index k = 0; k < n; ++k) {
      if (k != pc && A(pr, k) != 0.0 && free_index[static_cast<std::size_t>(k)] >= 0) {
        el.rows[static_cast<std::size_t>(pc)].push_back({free_index[static_cast<std::size_t>(k)], -A(pr, k)});
      }
    }
  }
  return el;
}

inline Vector lift(const Elimination & el, const Vector & z)
{
  Vector y = el.y0;
  for (std::size_t k = 0; k < el.rows.size(); ++k) {
    for (auto [j, a] : el.rows[k]) { y(static_cast<Index>(k)) += a * z(j); }
  }
  return y;
}

/// Substitutes y = y0 + N z into a linear expression: returns (constant, dense coefficients in z).
inline std::pair<double, Vector> substitute(const LinearExpr & e, const Elimination & el)
{
  double c0 = e.constant();
  Vector g  = Vector::Zero(el.free_vars);
  for (auto [k, a] : e.terms()) {
    c0 += a * el.y0(k);
    for (auto [j, nkj] : el.rows[static_cast<std::size_t>(k)]) { g(j) += a * nkj; }
  }
  return {c0, g};
}

inline LmiBlock substitute(const AffineMatrixExpr & e, const Elimination & el, double shift)
{
  LmiBlock b;
  b.F0 = e.constant();
  if (shift != 0.0) { b.F0.diagonal().array() -= shift; }
  std::map<Index, Matrix> acc;
  for (const auto & [k, Fk] : e.coefficients()) {
    b.F0 += el.y0(k) * Fk;
    for (auto [j, nkj] : el.rows[static_cast<std::size_t>(k)]) {
      auto it = acc.find(j);
      if (it == acc.end()) {
        acc.emplace(j, nkj * Fk);
      } else {
        it->second += nkj * Fk;
      }
    }
  }
  for (auto & [j, Fj] : acc) {
    if (max_abs(Fj) > 0.0) { b.F.emplace_back(j, std::move(Fj)); }
  }
  return b;
}

/// Drops variables absent from every cone; they must have zero cost.
inline ConeProgram compress(const ConeProgram & in, std::vector<Index> & kept, bool & unbounded)
{
  std::vector<char> used(static_cast<std::size_t>(in.num_vars), 0);
  for (const auto & b : in.blocks) {
    for (const auto & kv : b.F) { used[static_cast<std::size_t>(kv.first)] = 1; }
  }
  for (Index r = 0; r < in.G.rows(); ++r) {
    for (Index k = 0; k < in.num_vars; ++k) {
      if (in.G(r, k) != 0.0) { used[static_cast<std::size_t>(k)] = 1; }
    }
  }
  unbounded = false;
  kept.clear();
  std::vector<Index> remap(static_cast<std::size_t>(in.num_vars), -1);
  for (Index k = 0; k < in.num_vars; ++k) {
    if (used[static_cast<std::size_t>(k)]) {
      remap[static_cast<std::size_t>(k)] = static_cast<Index>(kept.size());
      kept.push_back(k);
    } else if (std::abs(in.c(k)) > 1e-12) {
      unbounded = true;
    }
  }
  ConeProgram out;
  out.num_vars = static_cast<Index>(kept.size());
  out.offset   = in.offset;
  out.c.resize(out.num_vars);
  out.G.resize(in.G.rows(), out.num_vars);
  for (Index q = 0; q < out.num_vars; ++q) {
    out.c(q)     = in.c(kept[static_cast<std::size_t>(q)]);
    out.G.col(q) = in.G.col(kept[static_cast<std::size_t>(q)]);
  }
  out.h = in.h;
  for (const auto & b : in.blocks) {
    LmiBlock nbk;
    nbk.F0 = b.F0;
    for (const auto & [k, Fk] : b.F) { nbk.F.emplace_back(remap[static_cast<std::size_t>(k)], Fk); }
    out.blocks.push_back(std::move(nbk));
  }
  return out;
}

/// min t  s.t.  F(z) + tI ⪰ 0, h + Gz + t >= 0, t >= -1, |z| <= bound.
inline ConeProgram phase_one(const ConeProgram & in, double bound = 1e6)
{
  const Index m = in.num_vars;
  const Index t = m;
  ConeProgram out;
  out.num_vars = m + 1;
  out.c        = Vector::Zero(m + 1);
  out.c(t)     = 1.0;
  const Index p = in.h.size();
  out.G = Matrix::Zero(p + 1 + 2 * m, m + 1);
  out.h = Vector::Zero(p + 1 + 2 * m);
  if (p > 0) {
    out.G.topLeftCorner(p, m) = in.G;
    out.G.block(0, t, p, 1).setOnes();
    out.h.head(p) = in.h;
  }
  out.G(p, t) = 1.0;
  out.h(p)    = 1.0;
  for (Index k = 0; k < m; ++k) {
    out.G(p + 1 + 2 * k, k)     = -1.0;
    out.h(p + 1 + 2 * k)        = bound;
    out.G(p + 2 + 2 * k, k)     = 1.0;
    out.h(p + 2 + 2 * k)        = bound;
  }
  for (const auto & b : in.blocks) {
    LmiBlock nb = b;
    nb.F.emplace_back(t, Matrix::Identity(b.dim(), b.dim()));
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

/// min cᵀd  s.t.  Σ d_k F_k ⪰ 0, G d >= 0, cᵀd >= -1: optimum -1 exposes an unbounded ray.
inline ConeProgram recession(const ConeProgram & in, double bound = 1e6)
{
  const Index m = in.num_vars;
  ConeProgram out;
  out.num_vars = m;
  out.c        = in.c;
  const Index p = in.h.size();
  out.G = Matrix::Zero(p + 1 + 2 * m, m);
  out.h = Vector::Zero(p + 1 + 2 * m);
  if (p > 0) { out.G.topRows(p) = in.G; }
  out.G.row(p) = in.c.transpose();
  out.h(p)     = 1.0;
  for (Index k = 0; k < m; ++k) {
    out.G(p + 1 + 2 * k, k) = -1.0;
    out.h(p + 1 + 2 * k)    = bound;
    out.G(p + 2 + 2 * k, k) = 1.0;
    out.h(p + 2 + 2 * k)    = bound;
  }
  for (const auto & b : in.blocks) {
    LmiBlock nb = b;
    nb.F0.setZero();
    out.blocks.push_back(std::move(nb));
  }
  return out;
}

}  // namespace detail

/// Largest violation of any linear row or LMI at an assignment (0 if all hold).
inline double max_constraint_violation(const SdpProblem & problem, const Assignment & x)
{
  double v = 0.0;
  for (const auto & e : problem.inequalities()) { v = std::max(v, -e.evaluate(x)); }
  for (const auto & e : problem.equalities()) { v = std::max(v, std::abs(e.evaluate(x))); }
  for (const auto & c : problem.psd_constraints()) { v = std::max(v, -min_eigenvalue(c.expr.evaluate(x))); }
  return v;
}

inline SolveResult solve(const SdpProblem & problem, const SolveOptions & options = {})
{
  SolveResult out;
  const Index n_user = problem.num_variables();

  // Epigraph lift of the quadratic objective.
  SdpProblem lifted = problem;
  const Var t       = lifted.add_variable("epigraph");
  EpigraphLift lift = quadratic_epigraph(lifted, t);
  const Index n     = lifted.num_variables();

  // Equalities A y = -e0.
  const auto & eqs = lifted.equalities();
  Matrix A         = Matrix::Zero(static_cast<Index>(eqs.size()), n);
  Vector b         = Vector::Zero(static_cast<Index>(eqs.size()));
  for (std::size_t r = 0; r < eqs.size(); ++r) {
    for (auto [k, a] : eqs[r].terms()) { A(static_cast<Index>(r), k) = a; }
    b(static_cast<Index>(r)) = -eqs[r].constant();
  }
  const detail::Elimination el = detail::eliminate_equalities(A, b, n);
  if (!el.consistent) {
    out.status               = SolveStatus::Infeasible;
    out.infeasibility_margin = el.residual;
    out.assignment           = Vector::Zero(n_user);
    return out;
  }

  ConeProgram cp;
  cp.num_vars       = el.free_vars;
  auto [off, cvec]  = detail::substitute(lift.objective, el);
  cp.offset         = off;
  cp.c              = cvec;
  const auto & ineq = lifted.inequalities();
  cp.G.resize(static_cast<Index>(ineq.size()), el.free_vars);
  cp.h.resize(static_cast<Index>(ineq.size()));
  for (std::size_t r = 0; r < ineq.size(); ++r) {
    auto [h0, g]                 = detail::substitute(ineq[r], el);
    cp.h(static_cast<Index>(r))  = h0;
    cp.G.row(static_cast<Index>(r)) = g.transpose();
  }
  for (const auto & c : lifted.psd_constraints()) { cp.blocks.push_back(detail::substitute(c.expr, el, options.lmi_shift)); }
  if (lift.constraint) { cp.blocks.push_back(detail::substitute(lift.constraint->expr, el, 0.0)); }

  std::vector<Index> kept;
  bool unbounded          = false;
  const ConeProgram cprog = detail::compress(cp, kept, unbounded);
  if (unbounded) {
    out.status     = SolveStatus::Unbounded;
    out.assignment = Vector::Zero(n_user);
    return out;
  }

  auto to_user = [&](const Vector & zc) {
    Vector z = Vector::Zero(el.free_vars);
    for (std::size_t q = 0; q < kept.size(); ++q) { z(kept[q]) = zc(static_cast<Index>(q)); }
    return detail::lift(el, z);
  };

  IpmOptions ipm_opt;
  ipm_opt.feas_tol    = options.feas_tol;
  ipm_opt.opt_tol     = options.opt_tol;
  ipm_opt.max_iter    = options.max_iter;
  ipm_opt.reduced_tol = options.reduced_tol;
  const IpmResult r = solve_ipm(cprog, ipm_opt);
  out.iterations    = r.iterations;
  if (r.exit == IpmExit::Converged) {
    const Vector y         = to_user(r.y);
    out.assignment         = y.head(n_user);
    out.status             = SolveStatus::Optimal;
    out.reduced_accuracy   = r.reduced_accuracy;
    out.objective          = problem.objective_value(out.assignment);
    out.max_psd_residual   = max_constraint_violation(problem, out.assignment);
    return out;
  }

  out.assignment = to_user(r.y).head(n_user);
  const IpmResult p1 = solve_ipm(detail::phase_one(cprog), ipm_opt);
  out.iterations += p1.iterations;
  if (p1.exit != IpmExit::Converged) {
    out.status = SolveStatus::NumericalFailure;
    return out;
  }
  // The dual objective bounds the phase-I optimum from below.
  out.infeasibility_margin = std::min(p1.primal_objective, p1.dual_objective);
  if (out.infeasibility_margin > options.infeas_tol) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  const IpmResult rc = solve_ipm(detail::recession(cprog), ipm_opt);
  out.iterations += rc.iterations;
  out.status = (rc.exit == IpmExit::Converged && rc.primal_objective < -0.5) ? SolveStatus::Unbounded
                                                                             : SolveStatus::NumericalFailure;
  return out;
}

}  // namespace dmpc::conic
