#pragma once

/**
 * @file
 * @brief Infeasible-start primal-dual interior-point method for small LMI problems.
 *
 * Solves the pair
 * \f[
 *   \min_y\ c^\top y \ \text{s.t.}\ Z_j = F_{0j} + \sum_k y_k F_{kj} \succeq 0,\ s = h + G y \geq 0
 * \f]
 * \f[
 *   \max\ -\textstyle\sum_j \langle F_{0j}, X_j\rangle - h^\top x \ \text{s.t.}\
 *   \sum_j \langle F_{kj}, X_j\rangle + (G^\top x)_k = c_k,\ X_j \succeq 0,\ x \geq 0
 * \f]
 * with the HKM search direction and a Mehrotra predictor-corrector.
 */

#include "../linalg.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <utility>
#include <vector>

namespace dmpc::conic {

/// One LMI block F0 + Σ y_k F_k, with only the nonzero F_k stored.
struct LmiBlock
{
  Matrix F0;
  std::vector<std::pair<Index, Matrix>> F;

  Index dim() const { return F0.rows(); }

  Matrix evaluate(const Vector & y) const
  {
    Matrix out = F0;
    for (const auto & [k, Fk] : F) { out += y(k) * Fk; }
    return out;
  }
};

/// min cᵀy + offset  s.t.  h + G y >= 0,  every block ⪰ 0.
struct ConeProgram
{
  Index num_vars{0};
  Vector c;
  double offset{0.0};
  Matrix G;
  Vector h;
  std::vector<LmiBlock> blocks;
};

struct IpmOptions
{
  double feas_tol{1e-8};
  double opt_tol{1e-8};
  int max_iter{200};
  /// Looser thresholds accepted when progress stalls before reaching the targets.
  double reduced_tol{1e-6};
  /// Iterations without improvement of the best iterate before giving up.
  int stall_window{8};
};

enum class IpmExit
{
  Converged,
  MaxIterations,
  Stalled,
  Diverged,
};

struct IpmResult
{
  IpmExit exit{IpmExit::Stalled};
  Vector y;
  std::vector<Matrix> X;  ///< dual matrices, one per block
  Vector x_lp;            ///< dual multipliers of the linear rows
  double primal_objective{0.0};
  double dual_objective{0.0};
  double primal_infeasibility{0.0};
  double dual_infeasibility{0.0};
  double relative_gap{0.0};
  int iterations{0};
  /// Converged only to IpmOptions::reduced_tol.
  bool reduced_accuracy{false};
};

namespace detail {

/// Largest α such that X + α·dX stays positive semidefinite (infinity if unbounded).
inline double max_step(const Eigen::LLT<Matrix> & chol, const Matrix & dX)
{
  if (dX.size() == 0) { return std::numeric_limits<double>::infinity(); }
  Matrix Li_dX = chol.matrixL().solve(dX);
  Matrix S     = chol.matrixL().solve(Matrix(Li_dX.transpose()));
  const double lmin = min_eigenvalue(S);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

inline double max_step_lp(const Vector & v, const Vector & dv)
{
  double a = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) { a = std::min(a, -v(i) / dv(i)); }
  }
  return a;
}

inline double frob_inner(const Matrix & A, const Matrix & B) { return A.cwiseProduct(B).sum(); }

}  // namespace detail

inline IpmResult solve_ipm(const ConeProgram & prob, const IpmOptions & opt = {})
{
  using detail::frob_inner;
  const Index m  = prob.num_vars;
  const Index p  = prob.h.size();
  const auto  nb = prob.blocks.size();

  IpmResult res;
  res.y = Vector::Zero(m);

  Index cone_dim = p;
  double normF = prob.h.norm(), normFk = 0.0;
  for (const auto & b : prob.blocks) {
    cone_dim += b.dim();
    normF = std::max(normF, b.F0.norm());
    for (const auto & kv : b.F) { normFk = std::max(normFk, kv.second.norm()); }
  }
  if (p > 0) { normFk = std::max(normFk, prob.G.norm()); }
  if (cone_dim == 0) {
    res.exit = prob.c.norm() == 0.0 ? IpmExit::Converged : IpmExit::Diverged;
    return res;
  }
  const double normc = prob.c.norm();

  // Starting point scaled to the data, in the spirit of SDPT3.
  double xi = std::max(10.0, std::sqrt(static_cast<double>(cone_dim)));
  for (Index k = 0; k < m; ++k) { xi = std::max(xi, (1.0 + std::abs(prob.c(k))) / (1.0 + normFk)); }
  const double eta = std::max({10.0, std::sqrt(static_cast<double>(cone_dim)), normF, normFk});

  Vector & y = res.y;
  std::vector<Matrix> X(nb), Z(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const Index n = prob.blocks[j].dim();
    X[j]          = xi * Matrix::Identity(n, n);
    Z[j]          = eta * Matrix::Identity(n, n);
  }
  Vector x = Vector::Constant(p, xi), s = Vector::Constant(p, eta);

  std::vector<Matrix> Zinv(nb), Rd(nb), dX(nb), dZ(nb), dXa(nb), dZa(nb);
  Vector rlp(p), dx(p), ds(p), dxa(p), dsa(p);

  // Best iterate by max(pinf, dinf, gap), restored when the run stalls.
  IpmResult best;
  double best_score = std::numeric_limits<double>::infinity();
  int best_iter     = 0;  // last iteration that halved the best score
  auto finish       = [&](IpmExit exit) {
    if (exit != IpmExit::Converged && best_score <= opt.reduced_tol) {
      const int iters       = res.iterations;
      res                   = best;
      res.iterations        = iters;
      res.exit              = IpmExit::Converged;
      res.reduced_accuracy  = true;
      return res;
    }
    res.exit = exit;
    return res;
  };

  for (int iter = 0; iter <= opt.max_iter; ++iter) {
    res.iterations = iter;

    // Residuals.
    Vector rp = prob.c;
    double pobj = prob.c.dot(y) + prob.offset;
    double dobj = prob.offset;
    double compl_sum = 0.0;
    double rd_norm2 = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const auto & b = prob.blocks[j];
      for (const auto & [k, Fk] : b.F) { rp(k) -= frob_inner(Fk, X[j]); }
      Rd[j] = b.evaluate(y) - Z[j];
      rd_norm2 += Rd[j].squaredNorm();
      dobj -= frob_inner(b.F0, X[j]);
      compl_sum += frob_inner(X[j], Z[j]);
    }
    if (p > 0) {
      rp -= prob.G.transpose() * x;
      rlp = prob.h + prob.G * y - s;
      rd_norm2 += rlp.squaredNorm();
      dobj -= prob.h.dot(x);
      compl_sum += x.dot(s);
    }
    const double mu = compl_sum / static_cast<double>(cone_dim);

    res.primal_objective     = pobj;
    res.dual_objective       = dobj;
    res.dual_infeasibility   = rp.norm() / (1.0 + normc);
    res.primal_infeasibility = std::sqrt(rd_norm2) / (1.0 + normF);
    res.relative_gap         = std::max(std::abs(pobj - dobj), compl_sum) / (1.0 + std::abs(pobj) + std::abs(dobj));
    res.X                    = X;
    res.x_lp                 = x;

    if (res.primal_infeasibility <= opt.feas_tol && res.dual_infeasibility <= opt.feas_tol
        && res.relative_gap <= opt.opt_tol) {
      return finish(IpmExit::Converged);
    }
    const double score = std::max({res.primal_infeasibility, res.dual_infeasibility, res.relative_gap});
    if (score < best_score) {
      if (score < 0.5 * best_score) { best_iter = iter; }
      best       = res;
      best_score = score;
    }
    if (iter == opt.max_iter) { return finish(IpmExit::MaxIterations); }
    if (!std::isfinite(mu) || y.norm() > 1e12 || mu > 1e20) { return finish(IpmExit::Diverged); }
    if (best_score <= opt.reduced_tol && iter - best_iter >= opt.stall_window) { return finish(IpmExit::Stalled); }

    // Schur complement M_kl = <F_k, X F_l Z^{-1}> + (Gᵀ diag(x/s) G)_kl.
    Matrix M = Matrix::Zero(m, m);
    bool ok  = true;
    std::vector<std::vector<Matrix>> XFZ(nb);
    for (std::size_t j = 0; j < nb && ok; ++j) {
      Eigen::LLT<Matrix> llt(Z[j]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      Zinv[j] = llt.solve(Matrix::Identity(Z[j].rows(), Z[j].cols()));
      const auto & F = prob.blocks[j].F;
      XFZ[j].resize(F.size());
      for (std::size_t a = 0; a < F.size(); ++a) { XFZ[j][a] = X[j] * F[a].second * Zinv[j]; }
      for (std::size_t a = 0; a < F.size(); ++a) {
        for (std::size_t c = a; c < F.size(); ++c) {
          const double v = frob_inner(F[a].second, XFZ[j][c]);
          M(F[a].first, F[c].first) += v;
          if (c != a) { M(F[c].first, F[a].first) += v; }
        }
      }
    }
    if (!ok || (s.array() <= 0.0).any()) { return finish(IpmExit::Stalled); }
    if (p > 0) { M.noalias() += prob.G.transpose() * (x.array() / s.array()).matrix().asDiagonal() * prob.G; }
    M = symmetrize(M);
    Matrix M_reg     = M;
    const double reg = 1e-14 * std::max(1.0, max_abs(M.diagonal()));
    M_reg.diagonal().array() += reg;
    Eigen::LDLT<Matrix> ldlt(M_reg);
    if (ldlt.info() != Eigen::Success) { return finish(IpmExit::Stalled); }

    // Search direction for a given complementarity target (Rc for blocks, rc for rows).
    auto direction = [&](const std::vector<Matrix> & Rc, const Vector & rc, Vector & dy) {
      Vector rhs = -rp;
      for (std::size_t j = 0; j < nb; ++j) {
        const Matrix T = Rc[j] * Zinv[j] - X[j] - X[j] * Rd[j] * Zinv[j];
        for (const auto & [k, Fk] : prob.blocks[j].F) { rhs(k) += frob_inner(Fk, T); }
      }
      if (p > 0) {
        const Vector t = (rc.array() / s.array() - x.array() - x.array() * rlp.array() / s.array()).matrix();
        rhs.noalias() += prob.G.transpose() * t;
      }
      dy = ldlt.solve(rhs);
      for (int refine = 0; refine < 2; ++refine) { dy += ldlt.solve(Vector(rhs - M * dy)); }
      for (std::size_t j = 0; j < nb; ++j) {
        dZ[j] = Rd[j];
        for (const auto & [k, Fk] : prob.blocks[j].F) { dZ[j] += dy(k) * Fk; }
        dX[j] = symmetrize(Matrix(Rc[j] * Zinv[j] - X[j] - X[j] * dZ[j] * Zinv[j]));
      }
      if (p > 0) {
        ds = rlp + prob.G * dy;
        dx = (rc.array() / s.array() - x.array() - x.array() * ds.array() / s.array()).matrix();
      }
    };

    auto step_lengths = [&](double & ap, double & ad) {
      ap = detail::max_step_lp(x, dx);
      ad = detail::max_step_lp(s, ds);
      for (std::size_t j = 0; j < nb; ++j) {
        Eigen::LLT<Matrix> cx(X[j]), cz(Z[j]);
        if (cx.info() != Eigen::Success || cz.info() != Eigen::Success) {
          ap = ad = 0.0;
          return;
        }
        ap = std::min(ap, detail::max_step(cx, dX[j]));
        ad = std::min(ad, detail::max_step(cz, dZ[j]));
      }
    };

    // Predictor.
    std::vector<Matrix> Rc(nb);
    for (std::size_t j = 0; j < nb; ++j) { Rc[j] = Matrix::Zero(X[j].rows(), X[j].cols()); }
    Vector rc = Vector::Zero(p);
    Vector dy;
    direction(Rc, rc, dy);
    double ap = 0.0, ad = 0.0;
    step_lengths(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) { mu_aff += frob_inner(X[j] + ap * dX[j], Z[j] + ad * dZ[j]); }
    if (p > 0) { mu_aff += (x + ap * dx).dot(s + ad * ds); }
    mu_aff /= static_cast<double>(cone_dim);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // Corrector.
    dXa = dX;
    dZa = dZ;
    dxa = dx;
    dsa = ds;
    for (std::size_t j = 0; j < nb; ++j) {
      Rc[j] = sigma * mu * Matrix::Identity(X[j].rows(), X[j].cols()) - dXa[j] * dZa[j];
    }
    if (p > 0) { rc = (Vector::Constant(p, sigma * mu).array() - dxa.array() * dsa.array()).matrix(); }
    direction(Rc, rc, dy);
    step_lengths(ap, ad);
    const double gamma = 0.9 + 0.09 * std::min({1.0, ap, ad});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    if (ap < 1e-12 && ad < 1e-12) { return finish(IpmExit::Stalled); }

    for (std::size_t j = 0; j < nb; ++j) {
      X[j] = symmetrize(Matrix(X[j] + ap * dX[j]));
      Z[j] = symmetrize(Matrix(Z[j] + ad * dZ[j]));
    }
    if (p > 0) {
      x += ap * dx;
      s += ad * ds;
    }
    y += ad * dy;
  }
  return finish(IpmExit::MaxIterations);
}

}  // namespace dmpc::conic
