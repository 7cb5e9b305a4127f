#pragma once

/**
 * @file
 * @brief JSON scenarios, terminal ingredients and solutions.
 *
 * Matrices are row-major nested arrays. A bare number is accepted wherever a
 * 1x1 matrix or a length-1 vector is expected. Neighbor indices in files are
 * 1-based.
 */

#include "offline_synthesis.hpp"
#include "online_ocp.hpp"
#include "system_model.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace dmpc {

using json = nlohmann::json;

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace io {

/// `cols` fixes the width of an empty matrix.
inline Matrix to_matrix(const json & j, const std::string & what, Index cols = 0)
{
  if (j.is_number()) { return Matrix::Constant(1, 1, j.get<double>()); }
  if (!j.is_array()) { throw IoError(what + ": expected a matrix"); }
  if (j.empty()) { return Matrix::Zero(0, cols); }
  if (!j.front().is_array()) {
    Matrix m(1, static_cast<Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
      if (!j[c].is_number()) { throw IoError(what + ": matrix entries must be numbers"); }
      m(0, static_cast<Index>(c)) = j[c].get<double>();
    }
    return m;
  }
  const auto rows = static_cast<Index>(j.size());
  const auto width = static_cast<Index>(j.front().size());
  Matrix m(rows, width);
  for (Index r = 0; r < rows; ++r) {
    const auto & row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != width) { throw IoError(what + ": ragged matrix rows"); }
    for (Index c = 0; c < width; ++c) {
      const auto & e = row[static_cast<std::size_t>(c)];
      if (!e.is_number()) { throw IoError(what + ": matrix entries must be numbers"); }
      m(r, c) = e.get<double>();
    }
  }
  return m;
}

inline Vector to_vector(const json & j, const std::string & what)
{
  if (j.is_number()) { return Vector::Constant(1, j.get<double>()); }
  if (!j.is_array()) { throw IoError(what + ": expected a vector"); }
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) { throw IoError(what + ": vector entries must be numbers"); }
    v(static_cast<Index>(k)) = j[k].get<double>();
  }
  return v;
}

inline json from_matrix(const Matrix & m)
{
  json out = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) { row.push_back(m(r, c)); }
    out.push_back(std::move(row));
  }
  return out;
}

inline json from_vector(const Vector & v)
{
  json out = json::array();
  for (Index k = 0; k < v.size(); ++k) { out.push_back(v(k)); }
  return out;
}

inline const json & field(const json & obj, const char * key, const std::string & where)
{
  if (!obj.is_object() || !obj.contains(key)) { throw IoError(where + ": missing key '" + key + "'"); }
  return obj.at(key);
}

inline json read_file(const std::string & path)
{
  std::ifstream in(path);
  if (!in) { throw IoError("cannot open '" + path + "'"); }
  try {
    return json::parse(in);
  } catch (const json::parse_error & e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_file(const std::string & path, const json & j)
{
  std::ofstream out(path);
  if (!out) { throw IoError("cannot write '" + path + "'"); }
  out << j.dump(2) << "\n";
  if (!out) { throw IoError("error while writing '" + path + "'"); }
}

}  // namespace io

struct Scenario
{
  DistributedSystem system;
  Index horizon{2};
  std::optional<Vector> x0;
};

inline Scenario parse_scenario(const json & j)
{
  using io::field;
  const json & list = field(j, "subsystems", "scenario");
  if (!list.is_array() || list.empty()) { throw IoError("scenario: 'subsystems' must be a non-empty array"); }
  std::vector<SubsystemModel> subs;
  Topology topo;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json & s  = list[i];
    const auto where = "subsystem " + std::to_string(i + 1);
    SubsystemModel m;
    m.A = io::to_matrix(field(s, "A_Ni", where), where + " A_Ni");
    m.B = io::to_matrix(field(s, "B", where), where + " B");
    m.G = io::to_matrix(field(s, "G_Ni", where), where + " G_Ni", m.A.cols());
    m.g = io::to_vector(field(s, "g_Ni", where), where + " g_Ni");
    m.H = io::to_matrix(field(s, "H", where), where + " H", m.B.cols());
    m.h = io::to_vector(field(s, "h", where), where + " h");
    m.Q = io::to_matrix(field(s, "Q_Ni", where), where + " Q_Ni");
    m.R = io::to_matrix(field(s, "R", where), where + " R");
    std::vector<Index> nb;
    for (const auto & k : field(s, "neighbors", where)) {
      if (!k.is_number_integer()) { throw IoError(where + ": neighbor indices must be integers"); }
      const auto one_based = k.get<Index>();
      if (one_based < 1 || one_based > static_cast<Index>(list.size())) {
        throw IoError(where + ": neighbor index " + std::to_string(one_based) + " out of range");
      }
      nb.push_back(one_based - 1);
    }
    topo.neighbors.push_back(std::move(nb));
    subs.push_back(std::move(m));
  }
  Scenario sc{make_system(std::move(subs), normalized(topo)), 2, std::nullopt};
  if (j.contains("horizon")) {
    if (!j.at("horizon").is_number_integer() || j.at("horizon").get<Index>() < 1) {
      throw IoError("scenario: 'horizon' must be a positive integer");
    }
    sc.horizon = j.at("horizon").get<Index>();
  }
  if (j.contains("x0")) {
    Vector x0 = io::to_vector(j.at("x0"), "scenario x0");
    if (x0.size() != sc.system.maps.state_dim()) { throw IoError("scenario: 'x0' has the wrong dimension"); }
    sc.x0 = std::move(x0);
  }
  return sc;
}

inline Scenario load_scenario(const std::string & path) { return parse_scenario(io::read_file(path)); }

inline json scenario_to_json(const DistributedSystem & sys, Index horizon, const std::optional<Vector> & x0 = {})
{
  json list = json::array();
  for (Index i = 0; i < sys.size(); ++i) {
    const auto & s = sys[i];
    json nb        = json::array();
    for (Index j : sys.maps.neighbors(i)) { nb.push_back(j + 1); }
    list.push_back({{"A_Ni", io::from_matrix(s.A)}, {"B", io::from_matrix(s.B)}, {"G_Ni", io::from_matrix(s.G)},
                    {"g_Ni", io::from_vector(s.g)}, {"H", io::from_matrix(s.H)}, {"h", io::from_vector(s.h)},
                    {"Q_Ni", io::from_matrix(s.Q)}, {"R", io::from_matrix(s.R)}, {"neighbors", nb}});
  }
  json out{{"subsystems", list}, {"horizon", horizon}};
  if (x0) { out["x0"] = io::from_vector(*x0); }
  return out;
}

inline json ingredients_to_json(const TerminalIngredients & ti)
{
  json P = json::array(), K = json::array();
  for (const auto & p : ti.P) { P.push_back(io::from_matrix(p)); }
  for (const auto & k : ti.K) { K.push_back(io::from_matrix(k)); }
  return {{"P", P}, {"K", K}};
}

/// Reads ingredients and checks them against the system they will be used with.
inline TerminalIngredients ingredients_from_json(const json & j, const DistributedSystem & sys)
{
  const json & P = io::field(j, "P", "ingredients");
  const json & K = io::field(j, "K", "ingredients");
  if (!P.is_array() || !K.is_array() || static_cast<Index>(P.size()) != sys.size()
      || static_cast<Index>(K.size()) != sys.size()) {
    throw IoError("ingredients: expected one P and one K per subsystem");
  }
  TerminalIngredients ti;
  for (Index i = 0; i < sys.size(); ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const auto tag = "ingredients subsystem " + std::to_string(i + 1);
    Matrix p = io::to_matrix(P[ii], tag + " P");
    Matrix k = io::to_matrix(K[ii], tag + " K");
    if (p.rows() != sys[i].state_dim() || p.cols() != sys[i].state_dim()) { throw IoError(tag + ": P has the wrong shape"); }
    if (k.rows() != sys[i].input_dim() || k.cols() != sys.maps.neighborhood_dim(i)) {
      throw IoError(tag + ": K has the wrong shape");
    }
    if (!is_symmetric(p, 1e-9) || min_eigenvalue(p) <= 0.0) { throw IoError(tag + ": P is not positive definite"); }
    ti.P.push_back(std::move(p));
    ti.K.push_back(std::move(k));
  }
  return ti;
}

/// Trajectories are time-major: x[t] is the state of the subsystem at step t.
inline json solution_to_json(const OcpSolution & sol, const TerminalIngredients * ti = nullptr)
{
  json out{{"scheme", to_string(sol.scheme)},
           {"status", sol.status == conic::SolveStatus::Optimal      ? "OPTIMAL"
                      : sol.status == conic::SolveStatus::Infeasible ? "INFEASIBLE"
                                                                      : "NUMFAIL"},
           {"horizon", sol.horizon}};
  if (!sol.feasible()) { return out; }
  out["J"]  = sol.J;
  json list = json::array();
  for (std::size_t i = 0; i < sol.x.size(); ++i) {
    json s{{"x", io::from_matrix(sol.x[i].transpose())},
           {"u", io::from_matrix(sol.u[i].transpose())},
           {"c", io::from_vector(sol.sets[i].c)},
           {"a", sol.sets[i].a}};
    if (ti) { s["P"] = io::from_matrix(ti->P[i]); }
    list.push_back(std::move(s));
  }
  out["subsystems"] = list;
  return out;
}

}  // namespace dmpc
