#pragma once

/**
 * @file
 * @brief Subsystem dynamics, neighbor topology and the selection-map algebra.
 *
 * A distributed system is a collection of subsystems with local dynamics
 * \f[ x_i^+ = A_{N_i} x_{N_i} + B_i u_i \f]
 * where \f$x_{N_i}\f$ stacks the states of the neighbors of subsystem i
 * (itself included) in ascending index order. Binary selection matrices
 * U_i, W_{N_i}, V_i map global vectors to local ones.
 */

#include "linalg.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace dmpc {

/// Local dynamics, polyhedral constraints and cost weights of one subsystem.
struct SubsystemModel
{
  Index id{0};
  Matrix A;  ///< n_i x n_{N_i}
  Matrix B;  ///< n_i x m_i
  Matrix G;  ///< q_i x n_{N_i}, state rows over the neighborhood
  Vector g;  ///< q_i
  Matrix H;  ///< r_i x m_i, input rows
  Vector h;  ///< r_i
  Matrix Q;  ///< n_{N_i} x n_{N_i}, symmetric PSD
  Matrix R;  ///< m_i x m_i, symmetric PD

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
  Index neighborhood_dim() const { return A.cols(); }
  Index state_rows() const { return G.rows(); }
  Index input_rows() const { return H.rows(); }
};

/// Neighbor lists (0-based). Each list is sorted, duplicate free and contains its owner.
struct Topology
{
  std::vector<std::vector<Index>> neighbors;

  Index size() const { return static_cast<Index>(neighbors.size()); }

  bool contains(Index i, Index j) const
  {
    const auto & n = neighbors.at(static_cast<std::size_t>(i));
    return std::binary_search(n.begin(), n.end(), j);
  }

  /// Position of j inside N_i, or -1.
  Index position(Index i, Index j) const
  {
    const auto & n  = neighbors.at(static_cast<std::size_t>(i));
    const auto   it = std::lower_bound(n.begin(), n.end(), j);
    return (it != n.end() && *it == j) ? static_cast<Index>(it - n.begin()) : -1;
  }
};

/// Sorts every neighbor list and inserts the owner when missing.
inline Topology normalized(Topology topo)
{
  for (std::size_t i = 0; i < topo.neighbors.size(); ++i) {
    auto & n = topo.neighbors[i];
    n.push_back(static_cast<Index>(i));
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return topo;
}

inline void validate(const Topology & topo)
{
  require(topo.size() > 0, "topology: at least one subsystem is required");
  for (Index i = 0; i < topo.size(); ++i) {
    const auto & n = topo.neighbors[static_cast<std::size_t>(i)];
    const std::string who = "topology: subsystem " + std::to_string(i + 1);
    require(std::is_sorted(n.begin(), n.end()), who + " neighbor list is not sorted");
    require(std::adjacent_find(n.begin(), n.end()) == n.end(), who + " neighbor list has duplicates");
    require(topo.contains(i, i), who + " is missing from its own neighborhood");
    for (Index j : n) { require(j >= 0 && j < topo.size(), who + " has an out-of-range neighbor"); }
  }
}

/**
 * @brief Binary lifting matrices relating local and global vectors.
 *
 * `T[i][p]` extracts the block of neighbor `topology.neighbors[i][p]` from x_{N_i}.
 */
struct SelectionMaps
{
  Topology topology;
  std::vector<Index> state_dims, input_dims;
  std::vector<Index> state_offsets, input_offsets;
  std::vector<Matrix> U, W, V;
  std::vector<std::vector<Matrix>> T;

  Index subsystems() const { return topology.size(); }
  Index state_dim() const { return state_offsets.back() + state_dims.back(); }
  Index input_dim() const { return input_offsets.back() + input_dims.back(); }
  Index neighborhood_dim(Index i) const { return W[static_cast<std::size_t>(i)].rows(); }
  const std::vector<Index> & neighbors(Index i) const { return topology.neighbors[static_cast<std::size_t>(i)]; }

  /// Row offset of neighbor j's block inside x_{N_i}.
  Index neighborhood_offset(Index i, Index j) const
  {
    Index off = 0;
    for (Index k : neighbors(i)) {
      if (k == j) { return off; }
      off += state_dims[static_cast<std::size_t>(k)];
    }
    throw ValidationError("subsystem " + std::to_string(j + 1) + " is not a neighbor of " + std::to_string(i + 1));
  }

  const Matrix & extractor(Index i, Index j) const
  {
    const Index p = topology.position(i, j);
    require(p >= 0, "subsystem " + std::to_string(j + 1) + " is not a neighbor of " + std::to_string(i + 1));
    return T[static_cast<std::size_t>(i)][static_cast<std::size_t>(p)];
  }
};

inline SelectionMaps build_selection_maps(const Topology & topology,
                                          const std::vector<Index> & state_dims,
                                          const std::vector<Index> & input_dims)
{
  validate(topology);
  const auto M = static_cast<std::size_t>(topology.size());
  require(state_dims.size() == M && input_dims.size() == M, "selection maps: one dimension per subsystem required");
  for (std::size_t i = 0; i < M; ++i) {
    require(state_dims[i] > 0, "selection maps: subsystem " + std::to_string(i + 1) + " has non-positive state dimension");
    require(input_dims[i] > 0, "selection maps: subsystem " + std::to_string(i + 1) + " has non-positive input dimension");
  }

  SelectionMaps maps;
  maps.topology   = topology;
  maps.state_dims = state_dims;
  maps.input_dims = input_dims;
  maps.state_offsets.assign(M, 0);
  maps.input_offsets.assign(M, 0);
  for (std::size_t i = 1; i < M; ++i) {
    maps.state_offsets[i] = maps.state_offsets[i - 1] + state_dims[i - 1];
    maps.input_offsets[i] = maps.input_offsets[i - 1] + input_dims[i - 1];
  }
  const Index n = maps.state_dim();
  const Index m = maps.input_dim();

  for (std::size_t i = 0; i < M; ++i) {
    Matrix U = Matrix::Zero(state_dims[i], n);
    U.middleCols(maps.state_offsets[i], state_dims[i]).setIdentity();
    Matrix V = Matrix::Zero(input_dims[i], m);
    V.middleCols(maps.input_offsets[i], input_dims[i]).setIdentity();

    const auto & nb = topology.neighbors[i];
    Index nn = 0;
    for (Index j : nb) { nn += state_dims[static_cast<std::size_t>(j)]; }
    Matrix W = Matrix::Zero(nn, n);
    std::vector<Matrix> extractors;
    Index row = 0;
    for (Index j : nb) {
      const auto js = static_cast<std::size_t>(j);
      W.block(row, maps.state_offsets[js], state_dims[js], state_dims[js]).setIdentity();
      Matrix Tij = Matrix::Zero(state_dims[js], nn);
      Tij.middleCols(row, state_dims[js]).setIdentity();
      extractors.push_back(std::move(Tij));
      row += state_dims[js];
    }
    maps.U.push_back(std::move(U));
    maps.V.push_back(std::move(V));
    maps.W.push_back(std::move(W));
    maps.T.push_back(std::move(extractors));
  }
  return maps;
}

/// W · blockdiag(blocks) · Wᵀ, the neighborhood restriction of a block-diagonal matrix.
inline Matrix lift_block_diagonal(const std::vector<Matrix> & blocks, const Matrix & W)
{
  Index total = 0;
  for (const auto & b : blocks) {
    require(b.rows() == b.cols(), "lift_block_diagonal: blocks must be square");
    require(is_symmetric(b, 1e-10), "lift_block_diagonal: blocks must be symmetric");
    total += b.rows();
  }
  require(W.cols() == total, "lift_block_diagonal: map has " + std::to_string(W.cols()) + " columns but blocks span "
                               + std::to_string(total));
  return W * block_diagonal(blocks) * W.transpose();
}

/// T_ijᵀ P_j T_ij: neighbor j's matrix embedded in the coordinates of x_{N_i}.
inline Matrix neighbor_embed(const Matrix & Pj, Index j, const SelectionMaps & maps, Index i)
{
  require(i >= 0 && i < maps.subsystems(), "neighbor_embed: subsystem index out of range");
  const Matrix & Tij = maps.extractor(i, j);
  require(Pj.rows() == Tij.rows() && Pj.cols() == Tij.rows(), "neighbor_embed: block has wrong dimension");
  return Tij.transpose() * Pj * Tij;
}

/// Subsystems, topology and their selection maps, validated together.
struct DistributedSystem
{
  std::vector<SubsystemModel> subsystems;
  SelectionMaps maps;

  Index size() const { return static_cast<Index>(subsystems.size()); }
  const SubsystemModel & operator[](Index i) const { return subsystems[static_cast<std::size_t>(i)]; }
};

struct ModelChecks
{
  /// Require g > 0 and h > 0 elementwise (origin strictly inside the constraints).
  bool positive_bounds = true;
};

inline void validate(const SubsystemModel & s, Index neighborhood_dim, const ModelChecks & checks = {})
{
  const std::string who = "subsystem " + std::to_string(s.id + 1) + ": ";
  const Index n = s.state_dim(), m = s.input_dim(), nn = neighborhood_dim;
  require(n > 0 && m > 0, who + "state and input dimensions must be positive");
  require(s.A.cols() == nn, who + "A has " + std::to_string(s.A.cols()) + " columns, neighborhood dimension is "
                              + std::to_string(nn));
  require(s.B.rows() == n, who + "B row count differs from A");
  require(s.G.cols() == nn, who + "G must act on the neighborhood state");
  require(s.g.size() == s.G.rows(), who + "g length differs from G rows");
  require(s.H.cols() == m, who + "H must act on the local input");
  require(s.h.size() == s.H.rows(), who + "h length differs from H rows");
  require(s.Q.rows() == nn && s.Q.cols() == nn, who + "Q must be n_Ni x n_Ni");
  require(s.R.rows() == m && s.R.cols() == m, who + "R must be m_i x m_i");
  require(is_symmetric(s.Q, 1e-10) && min_eigenvalue(s.Q) >= -1e-10, who + "Q must be symmetric positive semidefinite");
  require(is_symmetric(s.R, 1e-10) && min_eigenvalue(s.R) > 0.0, who + "R must be symmetric positive definite");
  if (checks.positive_bounds) {
    require((s.g.array() > 0.0).all(), who + "state bounds g must be strictly positive");
    require((s.h.array() > 0.0).all(), who + "input bounds h must be strictly positive");
  }
}

inline DistributedSystem make_system(std::vector<SubsystemModel> subsystems, const Topology & topology,
                                     const ModelChecks & checks = {})
{
  require(static_cast<Index>(subsystems.size()) == topology.size(),
          "system: topology and subsystem list have different sizes");
  std::vector<Index> nx, nu;
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    subsystems[i].id = static_cast<Index>(i);
    nx.push_back(subsystems[i].state_dim());
    nu.push_back(subsystems[i].input_dim());
  }
  DistributedSystem sys{std::move(subsystems), build_selection_maps(topology, nx, nu)};
  for (Index i = 0; i < sys.size(); ++i) { validate(sys[i], sys.maps.neighborhood_dim(i), checks); }
  return sys;
}

/// Global dynamics and cost obtained by summing the lifted local pieces.
struct GlobalModel
{
  Matrix A, B, Q, R;
};

inline GlobalModel assemble_global(const DistributedSystem & sys)
{
  const auto & mp = sys.maps;
  const Index n = mp.state_dim(), m = mp.input_dim();
  GlobalModel g{Matrix::Zero(n, n), Matrix::Zero(n, m), Matrix::Zero(n, n), Matrix::Zero(m, m)};
  for (Index i = 0; i < sys.size(); ++i) {
    const auto   k = static_cast<std::size_t>(i);
    const auto & s = sys[i];
    g.A += mp.U[k].transpose() * s.A * mp.W[k];
    g.B += mp.U[k].transpose() * s.B * mp.V[k];
    g.Q += mp.W[k].transpose() * s.Q * mp.W[k];
    g.R += mp.V[k].transpose() * s.R * mp.V[k];
  }
  return g;
}

}  // namespace dmpc
