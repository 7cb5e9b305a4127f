#pragma once

/**
 * @file
 * @brief Offline synthesis of the structured terminal cost P = diag(P_i) and
 *        the distributed terminal gains K_{N_i}.
 *
 * With E = P^{-1} block diagonal, E_{N_i} = W_{N_i} E W_{N_i}ᵀ and
 * Y_{N_i} = K_{N_i} E_{N_i}, each subsystem contributes the block LMI
 *
 *   [ emb(E_i) + H_i   (A E_N + B Y)ᵀ   E_N Q^{1/2}   Yᵀ R^{1/2} ]
 *   [ A E_N + B Y      E_i              0             0          ]  ⪰ 0
 *   [ Q^{1/2} E_N      0                I             0          ]
 *   [ R^{1/2} Y        0                0             I          ]
 *
 * where H_i is a local relaxation matrix. The relaxations are bounded by
 * block-diagonal S_{N_i} ⪰ H_i whose blocks belonging to the same subsystem
 * must sum to a negative semidefinite matrix. Summing the local conditions
 * then certifies the global Lyapunov decrease
 * A_clᵀ P A_cl − P + Q + KᵀRK ⪯ 0.
 */

#include "conic/solver.hpp"
#include "conic/variables.hpp"
#include "system_model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmpc {

/// Terminal cost blocks P_i and distributed terminal gains K_{N_i}.
struct TerminalIngredients
{
  std::vector<Matrix> P;  ///< n_i x n_i
  std::vector<Matrix> K;  ///< m_i x n_{N_i}

  Matrix global_P() const { return block_diagonal(P); }

  /// Global gain Σ V_iᵀ K_{N_i} W_{N_i}.
  Matrix global_K(const SelectionMaps & maps) const
  {
    Matrix K_glob = Matrix::Zero(maps.input_dim(), maps.state_dim());
    for (std::size_t i = 0; i < K.size(); ++i) { K_glob += maps.V[i].transpose() * K[i] * maps.W[i]; }
    return K_glob;
  }
};

struct OfflineOptions
{
  /// Lower bound E_i ⪰ min_eig·I keeping P_i = E_i^{-1} finite.
  double min_eig{1e-4};
  /**
   * The trace objective fixes P but usually leaves a face of optimal gains.
   * A small penalty gain_weight·Σ ‖Y_{N_i}‖²_F selects the low-gain end of
   * that face; 0 leaves the choice to the solver.
   */
  double gain_weight{1e-3};
  conic::SolveOptions solver{};
};

/// The offline SDP together with the expressions needed to read the solution back.
struct OfflineSdp
{
  conic::SdpProblem problem;
  std::vector<conic::AffineMatrixExpr> E;          ///< E_i blocks
  std::vector<conic::AffineMatrixExpr> Y;          ///< Y_{N_i}
  std::vector<conic::AffineMatrixExpr> relax;      ///< H_i
  std::vector<conic::AffineMatrixExpr> relax_bound;  ///< S_{N_i}
  std::vector<conic::AffineMatrixExpr> lmi;        ///< per-subsystem block LMI
};

/// E_{N_i} = Σ_j T_ijᵀ E_j T_ij.
inline conic::AffineMatrixExpr neighborhood_lift(const std::vector<conic::AffineMatrixExpr> & blocks,
                                                 const SelectionMaps & maps, Index i)
{
  const Index nn = maps.neighborhood_dim(i);
  conic::AffineMatrixExpr out(nn, nn);
  for (Index j : maps.neighbors(i)) {
    const Matrix & T = maps.extractor(i, j);
    out += Matrix(T.transpose()) * blocks[static_cast<std::size_t>(j)] * T;
  }
  return out;
}

inline OfflineSdp build_offline_sdp(const DistributedSystem & sys, const OfflineOptions & opt = {})
{
  using conic::AffineMatrixExpr;
  using conic::BlockBuilder;
  const auto & maps = sys.maps;
  const Index M     = sys.size();

  OfflineSdp sdp;
  auto & p = sdp.problem;
  for (Index i = 0; i < M; ++i) {
    const std::string tag = std::to_string(i + 1);
    sdp.E.push_back(conic::symmetric_variable(p, sys[i].state_dim(), "E" + tag));
  }

  // S blocks indexed by (owner neighborhood i, neighbor j).
  std::vector<std::vector<AffineMatrixExpr>> S(static_cast<std::size_t>(M));
  for (Index i = 0; i < M; ++i) {
    const auto & s   = sys[i];
    const auto   is  = static_cast<std::size_t>(i);
    const std::string tag = std::to_string(i + 1);
    const Index n = s.state_dim(), m = s.input_dim(), nn = s.neighborhood_dim();

    sdp.Y.push_back(conic::matrix_variable(p, m, nn, "Y" + tag));
    sdp.relax.push_back(conic::symmetric_variable(p, nn, "Hrelax" + tag));
    AffineMatrixExpr S_N(nn, nn);
    for (Index j : maps.neighbors(i)) {
      S[is].push_back(conic::symmetric_variable(p, sys[j].state_dim(), "S" + tag + "_" + std::to_string(j + 1)));
      const Matrix & T = maps.extractor(i, j);
      S_N += Matrix(T.transpose()) * S[is].back() * T;
    }
    sdp.relax_bound.push_back(S_N);

    AffineMatrixExpr E_i = sdp.E[is];
    p.add_psd(E_i - Matrix(opt.min_eig * Matrix::Identity(n, n)), "E" + tag + " lower bound");

    const AffineMatrixExpr E_N = neighborhood_lift(sdp.E, maps, i);
    const Matrix & T_ii        = maps.extractor(i, i);
    const Matrix Q_half        = sym_sqrt(s.Q);
    const Matrix R_half        = sym_sqrt(s.R);
    const AffineMatrixExpr & Y = sdp.Y.back();

    BlockBuilder b({nn, n, nn, m});
    b.set(0, 0, Matrix(T_ii.transpose()) * E_i * T_ii + sdp.relax.back());
    b.set(1, 0, s.A * E_N + s.B * Y);
    b.set(1, 1, E_i);
    b.set(2, 0, Q_half * E_N);
    b.set(2, 2, Matrix(Matrix::Identity(nn, nn)));
    b.set(3, 0, R_half * Y);
    b.set(3, 3, Matrix(Matrix::Identity(m, m)));
    sdp.lmi.push_back(b.build());
    p.add_psd(sdp.lmi.back(), "decrease" + tag);
    p.add_psd(S_N - sdp.relax.back(), "relaxation bound" + tag);
  }

  // Σ_{j : i ∈ N_j} (S_{N_j})_{ii} ⪯ 0
  for (Index i = 0; i < M; ++i) {
    const Index n = sys[i].state_dim();
    AffineMatrixExpr sum(n, n);
    for (Index j = 0; j < M; ++j) {
      const Index pos = maps.topology.position(j, i);
      if (pos >= 0) { sum += S[static_cast<std::size_t>(j)][static_cast<std::size_t>(pos)]; }
    }
    p.add_psd(-1.0 * sum, "coupling" + std::to_string(i + 1));
  }

  conic::LinearExpr objective;
  for (const auto & E : sdp.E) { objective -= conic::trace(E); }
  p.add_objective(objective);
  if (opt.gain_weight > 0.0) {
    for (const auto & Y : sdp.Y) {
      for (Index r = 0; r < Y.rows(); ++r) {
        p.add_quadratic(Y.block(r, 0, 1, Y.cols()).transpose(), opt.gain_weight * Matrix::Identity(Y.cols(), Y.cols()));
      }
    }
  }
  return sdp;
}

/// P_i = E_i^{-1}, K_{N_i} = Y_{N_i} E_{N_i}^{-1} from numeric E_i and Y_{N_i}.
inline TerminalIngredients recover_terminal_ingredients(const std::vector<Matrix> & E, const std::vector<Matrix> & Y,
                                                        const SelectionMaps & maps, double max_condition = 1e10)
{
  require(static_cast<Index>(E.size()) == maps.subsystems() && E.size() == Y.size(),
          "recover_terminal_ingredients: one E and one Y block per subsystem required");
  for (std::size_t i = 0; i < E.size(); ++i) {
    if (!(spd_condition(E[i]) <= max_condition)) {
      throw NumericalError("recover_terminal_ingredients: E_" + std::to_string(i + 1) + " is near singular");
    }
  }
  TerminalIngredients ti;
  for (std::size_t i = 0; i < E.size(); ++i) {
    ti.P.push_back(symmetrize(E[i].llt().solve(Matrix::Identity(E[i].rows(), E[i].cols()))));
    const Matrix E_N = lift_block_diagonal(E, maps.W[i]);
    ti.K.push_back(E_N.llt().solve(Y[i].transpose()).transpose());
  }
  return ti;
}

inline TerminalIngredients recover_terminal_ingredients(const OfflineSdp & sdp, const conic::SolveResult & result,
                                                        const SelectionMaps & maps)
{
  if (!result.optimal()) { throw NumericalError("recover_terminal_ingredients: offline problem was not solved"); }
  std::vector<Matrix> E, Y;
  for (const auto & e : sdp.E) { E.push_back(symmetrize(e.evaluate(result.assignment))); }
  for (const auto & y : sdp.Y) { Y.push_back(y.evaluate(result.assignment)); }
  return recover_terminal_ingredients(E, Y, maps);
}

struct LyapunovReport
{
  double max_eigenvalue{0.0};  ///< of A_clᵀ P A_cl − P + Q + KᵀRK
  double spectral_radius{0.0};  ///< of A_cl = A + BK
  bool pass{false};
};

inline LyapunovReport verify_lyapunov_decrease(const TerminalIngredients & ti, const DistributedSystem & sys,
                                               double tol = 1e-7)
{
  const GlobalModel g = assemble_global(sys);
  const Matrix K      = ti.global_K(sys.maps);
  const Matrix P      = ti.global_P();
  const Matrix A_cl   = g.A + g.B * K;
  const Matrix D      = A_cl.transpose() * P * A_cl - P + g.Q + K.transpose() * g.R * K;
  LyapunovReport r;
  r.max_eigenvalue  = max_eigenvalue(D);
  r.spectral_radius = spectral_radius(A_cl);
  r.pass            = r.max_eigenvalue <= tol;
  return r;
}

struct SynthesisResult
{
  conic::SolveStatus status{conic::SolveStatus::NumericalFailure};
  std::optional<TerminalIngredients> ingredients;
  LyapunovReport report;
  double objective{0.0};  ///< Σ trace(E_i)
};

/// Builds, solves and verifies; ingredients are only emitted when the decrease check passes.
inline SynthesisResult synthesize(const DistributedSystem & sys, const OfflineOptions & opt = {})
{
  const OfflineSdp sdp = build_offline_sdp(sys, opt);
  const auto sol       = conic::solve(sdp.problem, opt.solver);
  SynthesisResult out;
  out.status = sol.status;
  if (!sol.optimal()) { return out; }
  for (const auto & E : sdp.E) { out.objective += conic::trace(E).evaluate(sol.assignment); }
  TerminalIngredients ti = recover_terminal_ingredients(sdp, sol, sys.maps);
  out.report             = verify_lyapunov_decrease(ti, sys);
  if (!out.report.pass) {
    throw NumericalError("synthesize: Lyapunov decrease check failed (max eigenvalue "
                         + std::to_string(out.report.max_eigenvalue) + ")");
  }
  out.ingredients = std::move(ti);
  return out;
}

}  // namespace dmpc
