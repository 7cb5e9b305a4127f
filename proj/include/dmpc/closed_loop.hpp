#pragma once

/**
 * @file
 * @brief Receding-horizon simulation and feasibility sweeps.
 */

#include "admm.hpp"
#include "online_ocp.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <ostream>
#include <thread>
#include <vector>

namespace dmpc {

enum class SolveMode
{
  Central,
  Admm,
};

inline const char * to_string(SolveMode m) { return m == SolveMode::Central ? "central" : "admm"; }

inline SolveMode parse_mode(std::string s)
{
  for (auto & ch : s) { ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch))); }
  if (s == "central" || s == "centralized") { return SolveMode::Central; }
  if (s == "admm") { return SolveMode::Admm; }
  throw ValidationError("unknown mode '" + s + "' (expected central or admm)");
}

/// Status tag used in traces and reports.
inline const char * status_tag(conic::SolveStatus s)
{
  switch (s) {
    case conic::SolveStatus::Optimal: return "OPTIMAL";
    case conic::SolveStatus::Infeasible: return "INFEASIBLE";
    default: return "NUMFAIL";
  }
}

struct ControllerOptions
{
  SolveMode mode{SolveMode::Central};
  OcpOptions ocp{};
  AdmmOptions admm{};
  /// Receives every ADMM message; ignored in central mode.
  MessageSink admm_trace{};
};

/// One OCP solve in the requested mode.
inline OcpSolution solve_once(Scheme scheme, const Vector & x0, Index T, const TerminalIngredients & ti,
                              const DistributedSystem & sys, const ControllerOptions & opt = {})
{
  if (opt.mode == SolveMode::Central) { return solve_ocp(scheme, x0, T, ti, sys, opt.ocp); }
  AdmmOptions a = opt.admm;
  a.pin_center  = a.pin_center || opt.ocp.pin_center;
  a.solver      = opt.ocp.solver;
  return run_consensus(scheme, x0, T, ti, sys, a, opt.admm_trace).solution;
}

struct StepRecord
{
  Index t{0};
  Vector x;  ///< state at time t
  Vector u;  ///< applied input u*(0); empty when the step failed
  conic::SolveStatus status{conic::SolveStatus::NumericalFailure};
  double J{0.0};
  std::vector<Vector> c;
  std::vector<double> a;
};

struct SimTrace
{
  Scheme scheme{Scheme::Asym};
  Index horizon{0};
  SolveMode mode{SolveMode::Central};
  std::vector<StepRecord> steps;
  Vector final_state;     ///< state after the last applied input
  bool aborted{false};    ///< the run stopped at a step without an optimal solution
  double stage_cost{0.0}; ///< Σ_t x(t)ᵀQx(t) + u(t)ᵀRu(t) over applied steps

  Index infeasible_steps() const
  {
    return static_cast<Index>(std::count_if(steps.begin(), steps.end(),
                                            [](const StepRecord & s) { return s.status != conic::SolveStatus::Optimal; }));
  }
};

/**
 * @brief Applies u*(0) of a fresh OCP solve at every step.
 *
 * The plant is the model itself. A step without an optimal solution is
 * recorded and ends the run, since no input is defined for it.
 */
inline SimTrace run(Scheme scheme, const Vector & x0, Index T, Index steps, const TerminalIngredients & ti,
                    const DistributedSystem & sys, const ControllerOptions & opt = {})
{
  require(steps >= 1, "run: steps must be at least 1");
  require(x0.size() == sys.maps.state_dim(), "run: initial state has the wrong dimension");
  const GlobalModel g = assemble_global(sys);
  SimTrace trace;
  trace.scheme  = scheme;
  trace.horizon = T;
  trace.mode    = opt.mode;
  Vector x      = x0;
  for (Index t = 0; t < steps; ++t) {
    const OcpSolution sol = solve_once(scheme, x, T, ti, sys, opt);
    StepRecord rec;
    rec.t      = t;
    rec.x      = x;
    rec.status = sol.status;
    if (!sol.feasible()) {
      trace.steps.push_back(std::move(rec));
      trace.aborted = true;
      break;
    }
    rec.u = sol.input(0);
    rec.J = sol.J;
    for (const auto & s : sol.sets) {
      rec.c.push_back(s.c);
      rec.a.push_back(s.a);
    }
    trace.stage_cost += x.dot(g.Q * x) + rec.u.dot(g.R * rec.u);
    x = g.A * x + g.B * rec.u;
    trace.steps.push_back(std::move(rec));
  }
  trace.final_state = x;
  return trace;
}

/// CSV with header t,x1..xn,u1..um,status,J,c1..cn,a1..aM; failed steps leave u, J, c and a empty.
inline void write_csv(std::ostream & os, const SimTrace & trace, const DistributedSystem & sys)
{
  const Index n = sys.maps.state_dim(), m = sys.maps.input_dim(), M = sys.size();
  os << "t";
  for (Index k = 1; k <= n; ++k) { os << ",x" << k; }
  for (Index k = 1; k <= m; ++k) { os << ",u" << k; }
  os << ",status,J";
  for (Index k = 1; k <= n; ++k) { os << ",c" << k; }
  for (Index k = 1; k <= M; ++k) { os << ",a" << k; }
  os << "\n";

  const auto old_flags = os.flags();
  const auto old_prec  = os.precision();
  os << std::setprecision(12);
  for (const auto & r : trace.steps) {
    const bool ok = r.status == conic::SolveStatus::Optimal;
    os << r.t;
    for (Index k = 0; k < n; ++k) { os << "," << r.x(k); }
    for (Index k = 0; k < m; ++k) {
      os << ",";
      if (ok) { os << r.u(k); }
    }
    os << "," << status_tag(r.status) << ",";
    if (ok) { os << r.J; }
    for (Index j = 0; j < M; ++j) {
      for (Index k = 0; k < sys[j].state_dim(); ++k) {
        os << ",";
        if (ok) { os << r.c[static_cast<std::size_t>(j)](k); }
      }
    }
    for (Index j = 0; j < M; ++j) {
      os << ",";
      if (ok) { os << r.a[static_cast<std::size_t>(j)]; }
    }
    os << "\n";
  }
  os.flags(old_flags);
  os.precision(old_prec);
}

struct SweepPoint
{
  Vector x0;
  conic::SolveStatus status{conic::SolveStatus::NumericalFailure};
  double J{0.0};
};

struct FeasibilityMap
{
  Scheme scheme{Scheme::Asym};
  Index horizon{0};
  std::vector<SweepPoint> points;

  Index count(conic::SolveStatus s) const
  {
    return static_cast<Index>(std::count_if(points.begin(), points.end(), [s](const SweepPoint & p) { return p.status == s; }));
  }
  Index feasible() const { return count(conic::SolveStatus::Optimal); }
};

/// Tensor grid with `per_axis` points per coordinate over [lo, hi]^dim, first coordinate slowest.
inline std::vector<Vector> box_grid(Index dim, double lo, double hi, Index per_axis)
{
  require(dim >= 1 && per_axis >= 1, "box_grid: empty grid");
  require(hi >= lo, "box_grid: upper limit below lower limit");
  std::vector<Vector> out;
  std::vector<Index> idx(static_cast<std::size_t>(dim), 0);
  const double step = per_axis > 1 ? (hi - lo) / static_cast<double>(per_axis - 1) : 0.0;
  for (;;) {
    Vector p(dim);
    for (Index d = 0; d < dim; ++d) { p(d) = lo + step * static_cast<double>(idx[static_cast<std::size_t>(d)]); }
    out.push_back(p);
    Index d = dim - 1;
    while (d >= 0 && ++idx[static_cast<std::size_t>(d)] == per_axis) {
      idx[static_cast<std::size_t>(d)] = 0;
      --d;
    }
    if (d < 0) { break; }
  }
  return out;
}

/**
 * @brief Solves the OCP at every grid point; `jobs` worker threads share the grid.
 *
 * Results are stored by grid index, so the output does not depend on `jobs`.
 */
inline FeasibilityMap feasibility_sweep(Scheme scheme, const std::vector<Vector> & grid, Index T,
                                        const TerminalIngredients & ti, const DistributedSystem & sys,
                                        const ControllerOptions & opt = {}, unsigned jobs = 1)
{
  FeasibilityMap map;
  map.scheme  = scheme;
  map.horizon = T;
  map.points.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    require(grid[k].size() == sys.maps.state_dim(), "feasibility_sweep: grid point has the wrong dimension");
    map.points[k].x0 = grid[k];
  }
  ControllerOptions local = opt;
  local.admm_trace        = {};
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < grid.size(); k = next++) {
      const OcpSolution sol = solve_once(scheme, grid[k], T, ti, sys, local);
      map.points[k].status  = sol.status;
      map.points[k].J       = sol.feasible() ? sol.J : 0.0;
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(grid.size(), 1))));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) { pool.emplace_back(worker); }
    for (auto & th : pool) { th.join(); }
  }
  return map;
}

/// CSV with header x1..xn,status,J.
inline void write_csv(std::ostream & os, const FeasibilityMap & map)
{
  const Index n = map.points.empty() ? 0 : map.points.front().x0.size();
  for (Index k = 1; k <= n; ++k) { os << "x" << k << ","; }
  os << "status,J\n";
  const auto old_flags = os.flags();
  const auto old_prec  = os.precision();
  os << std::setprecision(12);
  for (const auto & p : map.points) {
    for (Index k = 0; k < n; ++k) { os << p.x0(k) << ","; }
    os << status_tag(p.status) << ",";
    if (p.status == conic::SolveStatus::Optimal) { os << p.J; }
    os << "\n";
  }
  os.flags(old_flags);
  os.precision(old_prec);
}

}  // namespace dmpc
