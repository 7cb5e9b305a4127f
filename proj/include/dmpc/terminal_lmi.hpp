#pragma once

/**
 * @file
 * @brief Online terminal-set LMIs, affine in a_j = α_j^{1/2}, c_j and the
 *        S-procedure multipliers.
 *
 * Terminal sets are ellipsoids X_j = {x : (x − c_j)ᵀ P_j (x − c_j) <= a_j²}.
 * Writing x_j = c_j + a_j z_j with z_jᵀ P_j z_j <= 1 turns each implication
 * over the product of neighbor sets into a homogeneous quadratic inequality
 * in (z, 1), which the S-procedure converts into the LMIs below.
 *
 * Neighbor-indexed arguments (`sets`, multiplier rows) are ordered like
 * `maps.neighbors(i)`.
 */

#include "conic/affine_expr.hpp"
#include "offline_synthesis.hpp"
#include "system_model.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dmpc {

/// Numeric terminal set of one subsystem.
struct TerminalSet
{
  Vector c;
  double a{0.0};

  double alpha() const { return a * a; }
};

/// Terminal set whose center and size may be decision variables.
struct TerminalSetExpr
{
  conic::LinearExpr a;       ///< α^{1/2}
  conic::AffineMatrixExpr c;  ///< n_j x 1

  static TerminalSetExpr constant(const TerminalSet & s)
  {
    return {conic::LinearExpr(s.a), conic::AffineMatrixExpr(Matrix(s.c))};
  }
};

/// Shape of the per-row constraint LMIs.
enum class RowForm
{
  Quadratic,  ///< squared row, symmetric about the origin, needs bound > 0
  Linear,     ///< one-sided row, handles offset centers
};

namespace detail {

/// s·M for scalar expression s.
inline conic::AffineMatrixExpr times(const conic::LinearExpr & s, const Matrix & M)
{
  conic::AffineMatrixExpr out(Matrix(s.constant() * M));
  for (auto [id, coef] : s.terms()) { out.add_term(conic::Var{id}, coef * M); }
  return out;
}

inline conic::LinearExpr sum(const std::vector<conic::LinearExpr> & v)
{
  conic::LinearExpr out;
  for (const auto & e : v) { out += e; }
  return out;
}

inline void check_row_count(const std::vector<conic::LinearExpr> & mult, const SelectionMaps & maps, Index i)
{
  require(mult.size() == maps.neighbors(i).size(), "terminal LMI: one multiplier per neighbor required");
}

}  // namespace detail

/// α_{N_i}^{1/2} = Σ_j a_j T_ijᵀ T_ij
inline conic::AffineMatrixExpr alpha_sqrt_neighborhood(Index i, const SelectionMaps & maps,
                                                       const std::vector<TerminalSetExpr> & sets)
{
  const Index nn = maps.neighborhood_dim(i);
  conic::AffineMatrixExpr out(nn, nn);
  const auto & nb = maps.neighbors(i);
  require(sets.size() == nb.size(), "alpha_sqrt_neighborhood: one set per neighbor required");
  for (std::size_t p = 0; p < nb.size(); ++p) {
    const Matrix & T = maps.extractor(i, nb[p]);
    out += detail::times(sets[p].a, T.transpose() * T);
  }
  return out;
}

/// c_{N_i} = Σ_j T_ijᵀ c_j
inline conic::AffineMatrixExpr center_neighborhood(Index i, const SelectionMaps & maps,
                                                   const std::vector<TerminalSetExpr> & sets)
{
  conic::AffineMatrixExpr out(maps.neighborhood_dim(i), 1);
  const auto & nb = maps.neighbors(i);
  require(sets.size() == nb.size(), "center_neighborhood: one set per neighbor required");
  for (std::size_t p = 0; p < nb.size(); ++p) { out += Matrix(maps.extractor(i, nb[p]).transpose()) * sets[p].c; }
  return out;
}

/// Σ_j μ_j P_ij with P_ij = T_ijᵀ P_j T_ij.
inline conic::AffineMatrixExpr weighted_neighbor_P(Index i, const SelectionMaps & maps, const std::vector<Matrix> & P,
                                                   const std::vector<conic::LinearExpr> & mult)
{
  detail::check_row_count(mult, maps, i);
  const Index nn = maps.neighborhood_dim(i);
  conic::AffineMatrixExpr out(nn, nn);
  const auto & nb = maps.neighbors(i);
  for (std::size_t p = 0; p < nb.size(); ++p) {
    out += detail::times(mult[p], neighbor_embed(P[static_cast<std::size_t>(nb[p])], nb[p], maps, i));
  }
  return out;
}

/// [[P_i⁻¹ a_i, x_T − c_i], [(x_T − c_i)ᵀ, a_i]] ⪰ 0
inline conic::AffineMatrixExpr membership_lmi(const conic::AffineMatrixExpr & x_T, const TerminalSetExpr & set,
                                              const Matrix & P_inv)
{
  const Index n = P_inv.rows();
  require(x_T.rows() == n && x_T.cols() == 1 && set.c.rows() == n, "membership_lmi: dimension mismatch");
  conic::BlockBuilder b({n, 1});
  b.set(0, 0, detail::times(set.a, P_inv));
  b.set(1, 0, (x_T - set.c).transpose());
  b.set(1, 1, conic::as_matrix(set.a));
  return b.build();
}

/**
 * @brief One-step invariance of X_i under the terminal controller:
 *        x_j ∈ X_j ∀j ∈ N_i  ⇒  A_cl x_{N_i} ∈ X_i.
 *
 *   [ P_i⁻¹ a_i          A_cl α_N^{1/2}   A_cl c_N − c_i ]
 *   [ ·ᵀ                 Σ λ_j P_ij       0              ]  ⪰ 0
 *   [ ·ᵀ                 0                a_i − Σ λ_j    ]
 */
inline conic::AffineMatrixExpr invariance_lmi(Index i, const Matrix & A_cl, const Matrix & P_inv_i,
                                              const std::vector<Matrix> & P, const SelectionMaps & maps,
                                              const std::vector<TerminalSetExpr> & sets,
                                              const std::vector<conic::LinearExpr> & lambda)
{
  const Index n = P_inv_i.rows(), nn = maps.neighborhood_dim(i);
  require(A_cl.rows() == n && A_cl.cols() == nn, "invariance_lmi: closed-loop matrix has wrong shape");
  const Index self = maps.topology.position(i, i);
  const auto & own = sets[static_cast<std::size_t>(self)];

  conic::BlockBuilder b({n, nn, 1});
  b.set(0, 0, detail::times(own.a, P_inv_i));
  b.set(0, 1, A_cl * alpha_sqrt_neighborhood(i, maps, sets));
  b.set(0, 2, A_cl * center_neighborhood(i, maps, sets) - own.c);
  b.set(1, 1, weighted_neighbor_P(i, maps, P, lambda));
  b.set(2, 2, conic::as_matrix(own.a - detail::sum(lambda)));
  return b.build();
}

/**
 * @brief (r x_N)² <= bound² on the neighbor set product, which implies r x_N <= bound.
 *
 *   [ bound         r α_N^{1/2}   r c_N          ]
 *   [ ·ᵀ            Σ τ_j P_ij    0              ]  ⪰ 0
 *   [ ·ᵀ            0             bound − Σ τ_j  ]
 */
inline conic::AffineMatrixExpr row_lmi_quadratic(Index i, const Matrix & row, double bound,
                                                 const std::vector<Matrix> & P, const SelectionMaps & maps,
                                                 const std::vector<TerminalSetExpr> & sets,
                                                 const std::vector<conic::LinearExpr> & tau)
{
  const Index nn = maps.neighborhood_dim(i);
  require(row.rows() == 1 && row.cols() == nn, "row_lmi_quadratic: row must be 1 x n_Ni");
  if (!(bound > 0.0)) { throw ValidationError("row_lmi_quadratic: squared row form requires a positive bound"); }
  conic::BlockBuilder b({1, nn, 1});
  b.set(0, 0, Matrix::Constant(1, 1, bound));
  b.set(0, 1, row * alpha_sqrt_neighborhood(i, maps, sets));
  b.set(0, 2, row * center_neighborhood(i, maps, sets));
  b.set(1, 1, weighted_neighbor_P(i, maps, P, tau));
  b.set(2, 2, conic::as_matrix(conic::LinearExpr(bound) - detail::sum(tau)));
  return b.build();
}

/**
 * @brief r x_N <= bound on the neighbor set product.
 *
 *   [ Σ σ_j P_ij          ½ α_N^{1/2} rᵀ          ]
 *   [ ·ᵀ                  bound − r c_N − Σ σ_j   ]  ⪰ 0
 */
inline conic::AffineMatrixExpr row_lmi_linear(Index i, const Matrix & row, double bound, const std::vector<Matrix> & P,
                                              const SelectionMaps & maps, const std::vector<TerminalSetExpr> & sets,
                                              const std::vector<conic::LinearExpr> & sigma)
{
  const Index nn = maps.neighborhood_dim(i);
  require(row.rows() == 1 && row.cols() == nn, "row_lmi_linear: row must be 1 x n_Ni");
  conic::BlockBuilder b({nn, 1});
  b.set(0, 0, weighted_neighbor_P(i, maps, P, sigma));
  b.set(0, 1, 0.5 * (alpha_sqrt_neighborhood(i, maps, sets) * Matrix(row.transpose())));
  b.set(1, 1, conic::as_matrix(conic::LinearExpr(bound) - detail::sum(sigma)) - row * center_neighborhood(i, maps, sets));
  return b.build();
}

inline conic::AffineMatrixExpr state_row_lmi_quadratic(Index i, Index k, const DistributedSystem & sys,
                                                       const TerminalIngredients & ti,
                                                       const std::vector<TerminalSetExpr> & sets,
                                                       const std::vector<conic::LinearExpr> & tau)
{
  const auto & s = sys[i];
  return row_lmi_quadratic(i, s.G.row(k), s.g(k), ti.P, sys.maps, sets, tau);
}

inline conic::AffineMatrixExpr input_row_lmi_quadratic(Index i, Index l, const DistributedSystem & sys,
                                                       const TerminalIngredients & ti,
                                                       const std::vector<TerminalSetExpr> & sets,
                                                       const std::vector<conic::LinearExpr> & rho)
{
  const auto & s = sys[i];
  return row_lmi_quadratic(i, s.H.row(l) * ti.K[static_cast<std::size_t>(i)], s.h(l), ti.P, sys.maps, sets, rho);
}

inline conic::AffineMatrixExpr state_row_lmi_linear(Index i, Index k, const DistributedSystem & sys,
                                                    const TerminalIngredients & ti,
                                                    const std::vector<TerminalSetExpr> & sets,
                                                    const std::vector<conic::LinearExpr> & sigma)
{
  const auto & s = sys[i];
  return row_lmi_linear(i, s.G.row(k), s.g(k), ti.P, sys.maps, sets, sigma);
}

inline conic::AffineMatrixExpr input_row_lmi_linear(Index i, Index l, const DistributedSystem & sys,
                                                    const TerminalIngredients & ti,
                                                    const std::vector<TerminalSetExpr> & sets,
                                                    const std::vector<conic::LinearExpr> & beta)
{
  const auto & s = sys[i];
  return row_lmi_linear(i, s.H.row(l) * ti.K[static_cast<std::size_t>(i)], s.h(l), ti.P, sys.maps, sets, beta);
}

/// A_{N_i} + B_i K_{N_i}
inline Matrix closed_loop_local(Index i, const DistributedSystem & sys, const TerminalIngredients & ti)
{
  return sys[i].A + sys[i].B * ti.K[static_cast<std::size_t>(i)];
}

/// (x − c)ᵀ P (x − c) <= a² up to tol·max(1, a²).
inline bool check_membership(const Vector & x, const TerminalSet & set, const Matrix & P, double tol = 1e-9)
{
  require(x.size() == set.c.size() && P.rows() == x.size(), "check_membership: dimension mismatch");
  const Vector d = x - set.c;
  return d.dot(P * d) - set.alpha() <= tol * std::max(1.0, set.alpha());
}

/// Violation counts of the terminal-set implications on random samples.
struct SoundnessReport
{
  Index samples{0};
  Index invariance_violations{0};
  Index state_violations{0};
  Index input_violations{0};
  double worst_excess{0.0};  ///< largest constraint excess seen, <= 0 when all hold

  Index violations() const { return invariance_violations + state_violations + input_violations; }
  bool sound() const { return violations() == 0; }
};

/// Point drawn uniformly from {c + a P^{-1/2} z : |z| <= 1}.
template <class Rng>
Vector sample_ellipsoid(const TerminalSet & set, const Matrix & P_inv_sqrt, Rng & rng)
{
  const Index n = set.c.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector z(n);
  for (Index k = 0; k < n; ++k) { z(k) = normal(rng); }
  const double norm = z.norm();
  if (norm > 0.0) { z *= std::pow(unif(rng), 1.0 / static_cast<double>(n)) / norm; }
  return set.c + set.a * (P_inv_sqrt * z);
}

/**
 * @brief Samples every subsystem's terminal set jointly and checks, for each i,
 *        invariance under A_{N_i} + B_i K_{N_i}, the state rows G_{N_i} x_{N_i} <= g
 *        and the terminal-input rows H_i K_{N_i} x_{N_i} <= h.
 */
inline SoundnessReport sample_soundness(const DistributedSystem & sys, const TerminalIngredients & ti,
                                        const std::vector<TerminalSet> & sets, Index samples,
                                        std::uint64_t seed = 0, double tol = 1e-6)
{
  const auto & maps = sys.maps;
  const Index M     = sys.size();
  require(static_cast<Index>(sets.size()) == M, "sample_soundness: one terminal set per subsystem required");
  std::vector<Matrix> P_inv_sqrt;
  std::vector<Matrix> A_cl;
  for (Index j = 0; j < M; ++j) {
    P_inv_sqrt.push_back(sym_inv_sqrt(ti.P[static_cast<std::size_t>(j)]));
    A_cl.push_back(closed_loop_local(j, sys, ti));
  }
  std::mt19937_64 rng(seed);
  SoundnessReport rep;
  rep.samples      = samples;
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  Vector x(maps.state_dim());
  for (Index s = 0; s < samples; ++s) {
    for (Index j = 0; j < M; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      x.segment(maps.state_offsets[jj], maps.state_dims[jj]) = sample_ellipsoid(sets[jj], P_inv_sqrt[jj], rng);
    }
    for (Index i = 0; i < M; ++i) {
      const auto ii  = static_cast<std::size_t>(i);
      const auto & m = sys[i];
      const Vector x_N = maps.W[ii] * x;
      const Vector d   = A_cl[ii] * x_N - sets[ii].c;
      const double inv = d.dot(ti.P[ii] * d) - sets[ii].alpha();
      const double st  = m.state_rows() ? (m.G * x_N - m.g).maxCoeff() : -1.0;
      const double in  = m.input_rows() ? (m.H * (ti.K[ii] * x_N) - m.h).maxCoeff() : -1.0;
      rep.invariance_violations += inv > tol ? 1 : 0;
      rep.state_violations += st > tol ? 1 : 0;
      rep.input_violations += in > tol ? 1 : 0;
      rep.worst_excess = std::max({rep.worst_excess, inv, st, in});
    }
  }
  return rep;
}

}  // namespace dmpc
