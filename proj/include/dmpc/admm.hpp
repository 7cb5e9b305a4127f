#pragma once

/**
 * @file
 * @brief Consensus ADMM over the subsystem graph for the online OCP.
 *
 * Agent i keeps local copies of the variables of every j ∈ N_i: the predicted
 * trajectory x_j(1..T), a_j and (unless pinned) c_j. A block that is held by
 * two or more agents is *shared* and driven to consensus with scaled-form
 * updates
 *
 *   w_i^{k+1} = argmin J_i(w) + ρ/2 Σ_j ‖w_ij − z_j^k + v_ij^k‖²   (local LMIs)
 *   z_j^{k+1} = mean_{i holds j} (w_ij^{k+1} + v_ij^k)
 *   v_ij^{k+1} = v_ij^k + w_ij^{k+1} − z_j^{k+1}
 *
 * The owner j of each block computes z_j, so every message travels between
 * graph neighbors. Inputs u_i and S-procedure multipliers stay local.
 */

#include "online_ocp.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace dmpc {

struct AdmmOptions
{
  double penalty{1.0};
  double eps_primal{1e-4};
  double eps_dual{1e-4};
  int max_iter{500};
  bool pin_center{false};
  conic::SolveOptions solver{};
};

enum class AdmmStatus
{
  Converged,
  Infeasible,
  NoConvergence,
  NumericalFailure,
};

inline const char * to_string(AdmmStatus s)
{
  switch (s) {
    case AdmmStatus::Converged: return "CONVERGED";
    case AdmmStatus::Infeasible: return "INFEASIBLE";
    case AdmmStatus::NoConvergence: return "NO_CONVERGENCE";
    case AdmmStatus::NumericalFailure: return "NUMFAIL";
  }
  return "NUMFAIL";
}

/// Which agents hold which blocks, and how large the blocks are.
struct SharingPattern
{
  std::vector<std::vector<Index>> holders;  ///< holders[j] = {i : j ∈ N_i}, ascending
  std::vector<Index> block_size;            ///< n_j T + 1 (+ n_j if centers are free)

  bool shared(Index j) const { return holders[static_cast<std::size_t>(j)].size() >= 2; }
};

inline SharingPattern sharing_pattern(const DistributedSystem & sys, Index T, bool pinned)
{
  SharingPattern sp;
  sp.holders.resize(static_cast<std::size_t>(sys.size()));
  for (Index i = 0; i < sys.size(); ++i) {
    for (Index j : sys.maps.neighbors(i)) { sp.holders[static_cast<std::size_t>(j)].push_back(i); }
  }
  for (Index j = 0; j < sys.size(); ++j) {
    const Index n = sys[j].state_dim();
    sp.block_size.push_back(n * T + 1 + (pinned ? 0 : n));
  }
  return sp;
}

/// Payload exchanged between neighbors in one round.
struct AdmmMessage
{
  enum class Kind
  {
    Copy,       ///< holder → owner: w_ij + v_ij
    Consensus,  ///< owner → holder: z_j
  };
  Kind kind{Kind::Copy};
  Index sender{0};
  Index receiver{0};
  Index block{0};  ///< subsystem whose variables are carried
  int iteration{0};
  Vector values;
};

/// Iterate of the consensus solver.
struct ConsensusState
{
  double penalty{1.0};
  int iteration{0};
  std::vector<std::vector<Vector>> copies;  ///< copies[i][p]: w_ij for j = N_i[p]
  std::vector<std::vector<Vector>> duals;   ///< duals[i][p]: v_ij (kept zero for unshared blocks)
  std::vector<Vector> consensus;            ///< z_j
  std::vector<double> primal_history, dual_history;
};

/// Outcome of one agent's local solve.
struct LocalResult
{
  conic::SolveStatus status{conic::SolveStatus::NumericalFailure};
  std::vector<Vector> blocks;  ///< w_ij for j = N_i[p]
  Matrix u;                    ///< m_i x T
  double local_cost{0.0};      ///< J_i without the penalty
};

/// Per-agent static data of a consensus run.
struct AdmmProblem
{
  Scheme scheme{Scheme::Asym};
  Vector x0;
  Index horizon{0};
  bool pinned{false};
  const DistributedSystem * sys{nullptr};
  const TerminalIngredients * ti{nullptr};
  SharingPattern pattern;
  conic::SolveOptions solver{};
};

inline ConsensusState initial_state(const AdmmProblem & prob, double penalty)
{
  const auto & sys = *prob.sys;
  ConsensusState st;
  st.penalty = penalty;
  for (Index i = 0; i < sys.size(); ++i) {
    std::vector<Vector> w, v;
    for (Index j : sys.maps.neighbors(i)) {
      w.push_back(Vector::Zero(prob.pattern.block_size[static_cast<std::size_t>(j)]));
      v.push_back(Vector::Zero(prob.pattern.block_size[static_cast<std::size_t>(j)]));
    }
    st.copies.push_back(std::move(w));
    st.duals.push_back(std::move(v));
  }
  for (Index j = 0; j < sys.size(); ++j) {
    st.consensus.push_back(Vector::Zero(prob.pattern.block_size[static_cast<std::size_t>(j)]));
  }
  return st;
}

/**
 * @brief Solves agent i's problem against the consensus values it received.
 *
 * `inbound` carries the z_j of every shared block in N_i; blocks without a
 * message are treated as unshared and get no penalty.
 */
inline LocalResult local_step(const AdmmProblem & prob, Index i, const ConsensusState & st,
                              const std::vector<AdmmMessage> & inbound)
{
  const auto & sys  = *prob.sys;
  const auto & maps = sys.maps;
  const auto & nb   = maps.neighbors(i);
  const auto ii     = static_cast<std::size_t>(i);
  const auto x0     = split_state(prob.x0, maps);
  const Index T     = prob.horizon;

  conic::SdpProblem p;
  LocalOcpVars v;
  std::vector<conic::AffineMatrixExpr> block_expr;
  for (Index j : nb) {
    const Index n         = sys[j].state_dim();
    const std::string tag = std::to_string(j + 1);
    std::vector<conic::AffineMatrixExpr> xj{conic::AffineMatrixExpr(Matrix(x0[static_cast<std::size_t>(j)]))};
    for (Index t = 1; t <= T; ++t) {
      xj.push_back(conic::matrix_variable(p, n, 1, "x" + tag + "(" + std::to_string(t) + ")"));
    }
    const conic::Var a = p.add_variable("a" + tag, conic::Sign::Nonnegative);
    TerminalSetExpr set{conic::LinearExpr(a),
                        prob.pinned ? conic::AffineMatrixExpr(n, 1) : conic::matrix_variable(p, n, 1, "c" + tag)};
    std::vector<conic::AffineMatrixExpr> parts(xj.begin() + 1, xj.end());
    parts.push_back(conic::as_matrix(set.a));
    if (!prob.pinned) { parts.push_back(set.c); }
    block_expr.push_back(conic::vstack(parts));
    v.x.push_back(std::move(xj));
    v.sets.push_back(std::move(set));
  }
  for (Index t = 0; t < T; ++t) {
    v.u.push_back(conic::matrix_variable(p, sys[i].input_dim(), 1, "u" + std::to_string(i + 1) + "(" + std::to_string(t) + ")"));
  }
  add_local_constraints(p, prob.scheme, i, v, sys, *prob.ti);
  add_local_cost(p, i, v, sys, *prob.ti);
  const auto cost_terms = p.quadratic_terms().size();

  for (const auto & msg : inbound) {
    require(msg.kind == AdmmMessage::Kind::Consensus && msg.receiver == i, "local_step: unexpected message");
    const Index pos = maps.topology.position(i, msg.block);
    require(pos >= 0, "local_step: message about a block outside the neighborhood");
    const auto pp = static_cast<std::size_t>(pos);
    require(msg.values.size() == block_expr[pp].rows(), "local_step: payload has the wrong size");
    const Vector target = msg.values - st.duals[ii][pp];
    p.add_quadratic(block_expr[pp] - Matrix(target),
                    0.5 * st.penalty * Matrix::Identity(target.size(), target.size()));
  }

  const auto r = conic::solve(p, prob.solver);
  LocalResult out;
  out.status = r.status;
  if (!r.optimal()) { return out; }
  for (const auto & e : block_expr) { out.blocks.push_back(e.evaluate(r.assignment).col(0)); }
  out.u = Matrix(sys[i].input_dim(), T);
  for (Index t = 0; t < T; ++t) { out.u.col(t) = v.u[static_cast<std::size_t>(t)].evaluate(r.assignment); }
  for (std::size_t q = 0; q < cost_terms; ++q) {
    const auto & term = p.quadratic_terms()[q];
    const Vector w    = term.vec.evaluate(r.assignment).col(0);
    out.local_cost += w.dot(term.weight * w);
  }
  return out;
}

/// Per-coordinate disagreement max_j max_coord (max_i w_ij − min_i w_ij) and ρ max |z^{k+1} − z^k|.
struct Residuals
{
  double primal{0.0};
  double dual{0.0};
};

inline Residuals residuals(const AdmmProblem & prob, const ConsensusState & st, const std::vector<Vector> & previous_z)
{
  const auto & maps = prob.sys->maps;
  Residuals r;
  for (Index j = 0; j < prob.sys->size(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    if (!prob.pattern.shared(j)) { continue; }
    Vector lo = Vector::Constant(prob.pattern.block_size[jj], std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (Index i : prob.pattern.holders[jj]) {
      const auto & w = st.copies[static_cast<std::size_t>(i)][static_cast<std::size_t>(maps.topology.position(i, j))];
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
    r.primal = std::max(r.primal, max_abs(hi - lo));
    r.dual   = std::max(r.dual, st.penalty * max_abs(st.consensus[jj] - previous_z[jj]));
  }
  return r;
}

struct AdmmResult
{
  AdmmStatus status{AdmmStatus::NoConvergence};
  OcpSolution solution;  ///< assembled from the owners' values; status mirrors `status`
  int iterations{0};
  double disagreement{0.0};  ///< final primal residual
  ConsensusState state;
};

using MessageSink = std::function<void(const AdmmMessage &)>;

/**
 * @brief Synchronous consensus rounds: all agents solve, copies travel to
 *        owners, owners average and reply, duals are updated.
 *
 * The reported trajectory is rolled out from x0 with each agent's own inputs;
 * a_i and c_i are the owner's values. Consequently dynamics hold exactly and
 * the remaining properties hold to the consensus tolerance.
 */
inline AdmmResult run_consensus(Scheme scheme, const Vector & x0, Index T, const TerminalIngredients & ti,
                                const DistributedSystem & sys, const AdmmOptions & opt = {},
                                const MessageSink & sink = {})
{
  require(T >= 1, "run_consensus: horizon must be at least 1");
  require(opt.penalty > 0.0, "run_consensus: penalty must be positive");
  validate_scheme(scheme, sys);
  split_state(x0, sys.maps);

  AdmmProblem prob;
  prob.scheme  = scheme;
  prob.x0      = x0;
  prob.horizon = T;
  prob.pinned  = opt.pin_center || scheme == Scheme::Adap;
  prob.sys     = &sys;
  prob.ti      = &ti;
  prob.pattern = sharing_pattern(sys, T, prob.pinned);
  prob.solver  = opt.solver;

  const auto & maps = sys.maps;
  const Index M     = sys.size();
  AdmmResult res;
  res.state = initial_state(prob, opt.penalty);
  auto & st = res.state;
  std::vector<Matrix> inputs(static_cast<std::size_t>(M));

  auto emit = [&](const AdmmMessage & m) {
    if (sink) { sink(m); }
  };

  // Consensus messages for the first round carry the initial z.
  auto consensus_messages = [&](int iteration) {
    std::vector<std::vector<AdmmMessage>> box(static_cast<std::size_t>(M));
    for (Index j = 0; j < M; ++j) {
      if (!prob.pattern.shared(j)) { continue; }
      for (Index i : prob.pattern.holders[static_cast<std::size_t>(j)]) {
        AdmmMessage m{AdmmMessage::Kind::Consensus, j, i, j, iteration, st.consensus[static_cast<std::size_t>(j)]};
        box[static_cast<std::size_t>(i)].push_back(m);
      }
    }
    return box;
  };

  auto inbox = consensus_messages(0);
  for (int k = 1; k <= opt.max_iter; ++k) {
    st.iteration = k;
    for (Index i = 0; i < M; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      for (const auto & m : inbox[ii]) {
        if (k > 1) { emit(m); }
      }
      const LocalResult lr = local_step(prob, i, st, inbox[ii]);
      if (lr.status != conic::SolveStatus::Optimal) {
        res.status            = lr.status == conic::SolveStatus::Infeasible ? AdmmStatus::Infeasible
                                                                            : AdmmStatus::NumericalFailure;
        res.iterations        = k;
        res.solution.scheme   = scheme;
        res.solution.horizon  = T;
        res.solution.status   = lr.status == conic::SolveStatus::Infeasible ? conic::SolveStatus::Infeasible
                                                                            : conic::SolveStatus::NumericalFailure;
        return res;
      }
      st.copies[ii] = lr.blocks;
      inputs[ii]    = lr.u;
    }

    // Holders send w + v to owners; owners average.
    const std::vector<Vector> previous_z = st.consensus;
    for (Index j = 0; j < M; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      if (!prob.pattern.shared(j)) {
        st.consensus[jj] = st.copies[jj][static_cast<std::size_t>(maps.topology.position(j, j))];
        continue;
      }
      Vector sum = Vector::Zero(prob.pattern.block_size[jj]);
      for (Index i : prob.pattern.holders[jj]) {
        const auto pos = static_cast<std::size_t>(maps.topology.position(i, j));
        AdmmMessage m{AdmmMessage::Kind::Copy, i, j, j, k,
                      st.copies[static_cast<std::size_t>(i)][pos] + st.duals[static_cast<std::size_t>(i)][pos]};
        emit(m);
        sum += m.values;
      }
      st.consensus[jj] = sum / static_cast<double>(prob.pattern.holders[jj].size());
    }
    for (Index i = 0; i < M; ++i) {
      const auto & nb = maps.neighbors(i);
      for (std::size_t p = 0; p < nb.size(); ++p) {
        if (!prob.pattern.shared(nb[p])) { continue; }
        auto & v = st.duals[static_cast<std::size_t>(i)][p];
        v += st.copies[static_cast<std::size_t>(i)][p] - st.consensus[static_cast<std::size_t>(nb[p])];
      }
    }

    const Residuals r = residuals(prob, st, previous_z);
    st.primal_history.push_back(r.primal);
    st.dual_history.push_back(r.dual);
    res.iterations   = k;
    res.disagreement = r.primal;
    bool any_shared  = false;
    for (Index j = 0; j < M; ++j) { any_shared = any_shared || prob.pattern.shared(j); }
    if (!any_shared || (r.primal <= opt.eps_primal && r.dual <= opt.eps_dual)) {
      res.status = AdmmStatus::Converged;
      break;
    }
    inbox = consensus_messages(k);
  }

  // Assemble the reported solution from the owners.
  OcpSolution & sol = res.solution;
  sol.scheme        = scheme;
  sol.horizon       = T;
  sol.iterations    = res.iterations;
  sol.status = res.status == AdmmStatus::Converged ? conic::SolveStatus::Optimal : conic::SolveStatus::NumericalFailure;
  const GlobalModel g = assemble_global(sys);
  Matrix X(maps.state_dim(), T + 1);
  X.col(0) = x0;
  Matrix U(maps.input_dim(), T);
  for (Index i = 0; i < M; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    U.middleRows(maps.input_offsets[ii], maps.input_dims[ii]) = inputs[ii];
  }
  for (Index t = 0; t < T; ++t) { X.col(t + 1) = g.A * X.col(t) + g.B * U.col(t); }
  for (Index j = 0; j < M; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Index n = sys[j].state_dim();
    sol.x.push_back(X.middleRows(maps.state_offsets[jj], n));
    sol.u.push_back(inputs[jj]);
    const Vector & own = st.copies[jj][static_cast<std::size_t>(maps.topology.position(j, j))];
    TerminalSet set{prob.pinned ? Vector(Vector::Zero(n)) : Vector(own.tail(n)), std::max(0.0, own(n * T))};
    sol.sets.push_back(set);
  }
  sol.J                = evaluate_cost(sol.x, sol.u, sys, ti);
  sol.solver_objective = sol.J;
  return res;
}

}  // namespace dmpc
