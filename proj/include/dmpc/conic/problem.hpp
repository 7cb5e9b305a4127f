#pragma once

/**
 * @file
 * @brief Conic problem container: linear equalities, linear inequalities,
 *        LMIs and a convex quadratic-plus-linear objective.
 */

#include "affine_expr.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace dmpc::conic {

enum class Sign
{
  Free,
  Nonnegative,
};

/// vᵀ·weight·v for an affine column vector v.
struct QuadraticTerm
{
  AffineMatrixExpr vec;
  Matrix weight;
};

struct PsdConstraint
{
  AffineMatrixExpr expr;
  std::string name;
};

/**
 * @brief minimize Σ vᵀWv + linear  s.t.  eq = 0, ineq >= 0, lmi ⪰ 0.
 */
class SdpProblem
{
public:
  Var add_variable(std::string name, Sign sign = Sign::Free)
  {
    Var v{static_cast<Index>(names_.size())};
    names_.push_back(std::move(name));
    if (sign == Sign::Nonnegative) { add_inequality(LinearExpr(v)); }
    return v;
  }

  std::vector<Var> add_variables(Index count, const std::string & prefix, Sign sign = Sign::Free)
  {
    std::vector<Var> out;
    for (Index k = 0; k < count; ++k) { out.push_back(add_variable(prefix + "[" + std::to_string(k) + "]", sign)); }
    return out;
  }

  /// expr == 0
  void add_equality(LinearExpr expr)
  {
    check_vars(expr);
    equalities_.push_back(std::move(expr));
  }

  /// Every entry of a matrix expression == 0.
  void add_equality(const AffineMatrixExpr & expr)
  {
    for (Index r = 0; r < expr.rows(); ++r) {
      for (Index c = 0; c < expr.cols(); ++c) { add_equality(expr.entry(r, c)); }
    }
  }

  /// expr >= 0
  void add_inequality(LinearExpr expr)
  {
    check_vars(expr);
    inequalities_.push_back(std::move(expr));
  }

  /// Every entry of a matrix expression >= 0.
  void add_inequality(const AffineMatrixExpr & expr)
  {
    for (Index r = 0; r < expr.rows(); ++r) {
      for (Index c = 0; c < expr.cols(); ++c) { add_inequality(expr.entry(r, c)); }
    }
  }

  /// expr ⪰ 0
  void add_psd(AffineMatrixExpr expr, std::string name = {})
  {
    require(expr.rows() == expr.cols(), "add_psd: expression must be square");
    require(expr.is_symmetric(1e-10), "add_psd: expression '" + name + "' must be symmetric");
    for (const auto & kv : expr.coefficients()) { check_var(kv.first); }
    psd_.push_back({std::move(expr), std::move(name)});
  }

  void add_objective(const LinearExpr & linear)
  {
    check_vars(linear);
    linear_ += linear;
  }

  /// Adds vᵀ·weight·v; weight must be symmetric PSD.
  void add_quadratic(AffineMatrixExpr vec, Matrix weight)
  {
    require(vec.cols() == 1, "add_quadratic: expression must be a column vector");
    require(weight.rows() == vec.rows() && weight.cols() == vec.rows(), "add_quadratic: weight shape mismatch");
    require(is_symmetric(weight, 1e-10), "add_quadratic: weight must be symmetric");
    require(min_eigenvalue(weight) >= -1e-10, "add_quadratic: weight must be positive semidefinite");
    for (const auto & kv : vec.coefficients()) { check_var(kv.first); }
    quadratic_.push_back({std::move(vec), std::move(weight)});
  }

  Index num_variables() const { return static_cast<Index>(names_.size()); }
  const std::string & name(Var v) const { return names_.at(static_cast<std::size_t>(v.id)); }
  const std::vector<LinearExpr> & equalities() const { return equalities_; }
  const std::vector<LinearExpr> & inequalities() const { return inequalities_; }
  const std::vector<PsdConstraint> & psd_constraints() const { return psd_; }
  const LinearExpr & linear_objective() const { return linear_; }
  const std::vector<QuadraticTerm> & quadratic_terms() const { return quadratic_; }

  double objective_value(const Assignment & x) const
  {
    double v = linear_.evaluate(x);
    for (const auto & q : quadratic_) {
      const Vector w = q.vec.evaluate(x).col(0);
      v += w.dot(q.weight * w);
    }
    return v;
  }

  /// Plain-text dump for offline debugging. The layout is not stable.
  void dump(std::ostream & os) const
  {
    os << "variables " << names_.size() << "\n";
    for (std::size_t k = 0; k < names_.size(); ++k) { os << "  x" << k << " " << names_[k] << "\n"; }
    auto lin = [&os](const LinearExpr & e) {
      os << e.constant();
      for (auto [id, c] : e.terms()) { os << " + " << c << "*x" << id; }
      os << "\n";
    };
    os << "objective_linear ";
    lin(linear_);
    os << "quadratic_terms " << quadratic_.size() << "\n";
    os << "equalities " << equalities_.size() << "\n";
    for (const auto & e : equalities_) {
      os << "  ";
      lin(e);
    }
    os << "inequalities " << inequalities_.size() << "\n";
    for (const auto & e : inequalities_) {
      os << "  ";
      lin(e);
    }
    os << "lmis " << psd_.size() << "\n";
    for (const auto & p : psd_) {
      os << "lmi " << p.name << " dim " << p.expr.rows() << "\nconstant\n" << p.expr.constant() << "\n";
      for (const auto & [id, c] : p.expr.coefficients()) { os << "coef x" << id << "\n" << c << "\n"; }
    }
  }

private:
  void check_var(Index id) const
  {
    require(id >= 0 && id < num_variables(), "SdpProblem: reference to undeclared variable " + std::to_string(id));
  }
  void check_vars(const LinearExpr & e) const
  {
    for (const auto & kv : e.terms()) { check_var(kv.first); }
  }

  std::vector<std::string> names_;
  std::vector<LinearExpr> equalities_;
  std::vector<LinearExpr> inequalities_;
  std::vector<PsdConstraint> psd_;
  LinearExpr linear_;
  std::vector<QuadraticTerm> quadratic_;
};

/// Linear objective plus the Schur-complement constraint replacing the quadratic part.
struct EpigraphLift
{
  LinearExpr objective;
  std::optional<PsdConstraint> constraint;
};

/**
 * @brief Lifts Σ vᵀWv into an epigraph variable `t`.
 *
 * With L stacking the symmetric square roots of every weight applied to its v,
 * the constraint [[t, (Lv)ᵀ], [Lv, I]] ⪰ 0 is equivalent to t >= Σ vᵀWv.
 */
inline EpigraphLift quadratic_epigraph(const SdpProblem & problem, Var t)
{
  EpigraphLift lift;
  lift.objective = problem.linear_objective();
  if (problem.quadratic_terms().empty()) { return lift; }

  std::vector<AffineMatrixExpr> factors;
  Index rows = 0;
  for (const auto & q : problem.quadratic_terms()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(q.weight));
    if (es.eigenvalues().size() > 0 && es.eigenvalues()(0) < -1e-10) {
      throw ValidationError("quadratic_epigraph: weight is not positive semidefinite");
    }
    // Keep only the range of W so the Schur block stays small.
    const Vector ev = es.eigenvalues();
    std::vector<Index> keep;
    const double cutoff = 1e-12 * std::max(1.0, max_abs(ev));
    for (Index k = 0; k < ev.size(); ++k) {
      if (ev(k) > cutoff) { keep.push_back(k); }
    }
    if (keep.empty()) { continue; }
    Matrix L(static_cast<Index>(keep.size()), q.weight.rows());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      L.row(static_cast<Index>(r)) = std::sqrt(ev(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
    }
    factors.push_back(L * q.vec);
    rows += L.rows();
  }
  if (rows == 0) { return lift; }

  AffineMatrixExpr stacked(rows, 1);
  Index r = 0;
  for (const auto & f : factors) {
    Matrix place = Matrix::Zero(rows, f.rows());
    place.middleRows(r, f.rows()).setIdentity();
    stacked += place * f;
    r += f.rows();
  }
  BlockBuilder b({1, rows});
  b.set(0, 0, AffineMatrixExpr::term(t, Matrix::Ones(1, 1)));
  b.set(1, 0, stacked);
  b.set(1, 1, Matrix::Identity(rows, rows));
  lift.constraint = PsdConstraint{b.build(), "epigraph"};
  lift.objective += LinearExpr(t);
  return lift;
}

}  // namespace dmpc::conic
