#pragma once

/**
 * @file
 * @brief Scalar and matrix expressions affine in scalar decision variables.
 */

#include "../linalg.hpp"

#include <map>
#include <string>
#include <vector>

namespace dmpc::conic {

/// Handle to a scalar decision variable of an SdpProblem.
struct Var
{
  Index id{-1};

  friend bool operator==(Var a, Var b) { return a.id == b.id; }
  friend bool operator<(Var a, Var b) { return a.id < b.id; }
};

/// Value of every variable, indexed by Var::id.
using Assignment = Vector;

class MissingVariable : public std::out_of_range
{
public:
  using std::out_of_range::out_of_range;
};

inline double value_of(const Assignment & x, Index id)
{
  if (id < 0 || id >= x.size()) { throw MissingVariable("assignment has no value for variable " + std::to_string(id)); }
  return x(id);
}

/// constant + Σ coef·var
class LinearExpr
{
public:
  LinearExpr() = default;
  LinearExpr(double constant) : constant_(constant) {}  // NOLINT(implicit)
  LinearExpr(Var v) { terms_[v.id] = 1.0; }             // NOLINT(implicit)

  double constant() const { return constant_; }
  const std::map<Index, double> & terms() const { return terms_; }

  double coefficient(Var v) const
  {
    auto it = terms_.find(v.id);
    return it == terms_.end() ? 0.0 : it->second;
  }

  LinearExpr & add(Var v, double coef)
  {
    if (coef != 0.0) { terms_[v.id] += coef; }
    return *this;
  }

  LinearExpr & operator+=(const LinearExpr & o)
  {
    constant_ += o.constant_;
    for (auto [id, c] : o.terms_) { terms_[id] += c; }
    return *this;
  }
  LinearExpr & operator-=(const LinearExpr & o) { return *this += -1.0 * o; }
  LinearExpr & operator*=(double s)
  {
    constant_ *= s;
    for (auto & kv : terms_) { kv.second *= s; }
    return *this;
  }

  friend LinearExpr operator+(LinearExpr a, const LinearExpr & b) { return a += b; }
  friend LinearExpr operator-(LinearExpr a, const LinearExpr & b) { return a -= b; }
  friend LinearExpr operator*(double s, LinearExpr a) { return a *= s; }
  friend LinearExpr operator*(LinearExpr a, double s) { return a *= s; }
  friend LinearExpr operator-(LinearExpr a) { return a *= -1.0; }

  double evaluate(const Assignment & x) const
  {
    double v = constant_;
    for (auto [id, c] : terms_) { v += c * value_of(x, id); }
    return v;
  }

private:
  double constant_{0.0};
  std::map<Index, double> terms_;
};

/**
 * @brief Matrix expression constant + Σ_v v·C_v with constant coefficient matrices.
 *
 * Rectangular shapes are allowed while building; PSD constraints require the
 * final expression to be square with symmetric constant and coefficients.
 */
class AffineMatrixExpr
{
public:
  AffineMatrixExpr() = default;
  AffineMatrixExpr(Index rows, Index cols) : constant_(Matrix::Zero(rows, cols)) {}
  explicit AffineMatrixExpr(Matrix constant) : constant_(std::move(constant)) {}

  static AffineMatrixExpr zero(Index rows, Index cols) { return AffineMatrixExpr(rows, cols); }

  /// v·coef
  static AffineMatrixExpr term(Var v, Matrix coef)
  {
    AffineMatrixExpr e(coef.rows(), coef.cols());
    e.add_term(v, coef);
    return e;
  }

  /// Column vector whose k-th entry is vars[k].
  static AffineMatrixExpr column(const std::vector<Var> & vars)
  {
    const auto n = static_cast<Index>(vars.size());
    AffineMatrixExpr e(n, 1);
    for (Index k = 0; k < n; ++k) {
      Matrix unit    = Matrix::Zero(n, 1);
      unit(k, 0)     = 1.0;
      e.add_term(vars[static_cast<std::size_t>(k)], unit);
    }
    return e;
  }

  Index rows() const { return constant_.rows(); }
  Index cols() const { return constant_.cols(); }
  const Matrix & constant() const { return constant_; }
  const std::map<Index, Matrix> & coefficients() const { return coeffs_; }

  AffineMatrixExpr & add_term(Var v, const Matrix & coef)
  {
    require(coef.rows() == rows() && coef.cols() == cols(), "AffineMatrixExpr: coefficient shape mismatch");
    auto it = coeffs_.find(v.id);
    if (it == coeffs_.end()) {
      coeffs_.emplace(v.id, coef);
    } else {
      it->second += coef;
    }
    return *this;
  }

  AffineMatrixExpr & operator+=(const AffineMatrixExpr & o)
  {
    require(o.rows() == rows() && o.cols() == cols(), "AffineMatrixExpr: shape mismatch in sum");
    constant_ += o.constant_;
    for (const auto & [id, c] : o.coeffs_) { add_term(Var{id}, c); }
    return *this;
  }
  AffineMatrixExpr & operator-=(const AffineMatrixExpr & o) { return *this += (-1.0) * o; }
  AffineMatrixExpr & operator+=(const Matrix & m)
  {
    require(m.rows() == rows() && m.cols() == cols(), "AffineMatrixExpr: shape mismatch in sum");
    constant_ += m;
    return *this;
  }
  AffineMatrixExpr & operator*=(double s)
  {
    constant_ *= s;
    for (auto & kv : coeffs_) { kv.second *= s; }
    return *this;
  }

  friend AffineMatrixExpr operator+(AffineMatrixExpr a, const AffineMatrixExpr & b) { return a += b; }
  friend AffineMatrixExpr operator-(AffineMatrixExpr a, const AffineMatrixExpr & b) { return a -= b; }
  friend AffineMatrixExpr operator+(AffineMatrixExpr a, const Matrix & b) { return a += b; }
  friend AffineMatrixExpr operator-(AffineMatrixExpr a, const Matrix & b) { return a += Matrix(-b); }
  friend AffineMatrixExpr operator*(double s, AffineMatrixExpr a) { return a *= s; }

  /// Constant left multiplication L·expr.
  friend AffineMatrixExpr operator*(const Matrix & L, const AffineMatrixExpr & e)
  {
    require(L.cols() == e.rows(), "AffineMatrixExpr: shape mismatch in left product");
    AffineMatrixExpr out(L * e.constant_);
    for (const auto & [id, c] : e.coeffs_) { out.coeffs_.emplace(id, L * c); }
    return out;
  }

  /// Constant right multiplication expr·R.
  friend AffineMatrixExpr operator*(const AffineMatrixExpr & e, const Matrix & R)
  {
    require(e.cols() == R.rows(), "AffineMatrixExpr: shape mismatch in right product");
    AffineMatrixExpr out(e.constant_ * R);
    for (const auto & [id, c] : e.coeffs_) { out.coeffs_.emplace(id, c * R); }
    return out;
  }

  AffineMatrixExpr transpose() const
  {
    AffineMatrixExpr out(Matrix(constant_.transpose()));
    for (const auto & [id, c] : coeffs_) { out.coeffs_.emplace(id, c.transpose()); }
    return out;
  }

  AffineMatrixExpr block(Index r, Index c, Index nr, Index nc) const
  {
    AffineMatrixExpr out(Matrix(constant_.block(r, c, nr, nc)));
    for (const auto & [id, m] : coeffs_) { out.coeffs_.emplace(id, m.block(r, c, nr, nc)); }
    return out;
  }

  /// Scalar entry as a LinearExpr.
  LinearExpr entry(Index r, Index c) const
  {
    LinearExpr out(constant_(r, c));
    for (const auto & [id, m] : coeffs_) { out.add(Var{id}, m(r, c)); }
    return out;
  }

  bool is_symmetric(double tol = 1e-12) const
  {
    if (!dmpc::is_symmetric(constant_, tol)) { return false; }
    for (const auto & kv : coeffs_) {
      if (!dmpc::is_symmetric(kv.second, tol)) { return false; }
    }
    return true;
  }

  /// Exact affine evaluation.
  Matrix evaluate(const Assignment & x) const
  {
    Matrix out = constant_;
    for (const auto & [id, c] : coeffs_) { out += value_of(x, id) * c; }
    return out;
  }

private:
  Matrix constant_;
  std::map<Index, Matrix> coeffs_;
};

inline Matrix eval_expr(const AffineMatrixExpr & expr, const Assignment & x) { return expr.evaluate(x); }

/// Scalar expression lifted to a 1x1 matrix expression.
inline AffineMatrixExpr as_matrix(const LinearExpr & e)
{
  AffineMatrixExpr out(Matrix::Constant(1, 1, e.constant()));
  for (auto [id, c] : e.terms()) { out.add_term(Var{id}, Matrix::Constant(1, 1, c)); }
  return out;
}

/// Stacks expressions with equal column counts on top of each other.
inline AffineMatrixExpr vstack(const std::vector<AffineMatrixExpr> & parts)
{
  require(!parts.empty(), "vstack: nothing to stack");
  Index rows = 0;
  for (const auto & e : parts) {
    require(e.cols() == parts.front().cols(), "vstack: column counts differ");
    rows += e.rows();
  }
  AffineMatrixExpr out(rows, parts.front().cols());
  Index r = 0;
  for (const auto & e : parts) {
    Matrix place = Matrix::Zero(rows, e.rows());
    place.middleRows(r, e.rows()).setIdentity();
    out += place * e;
    r += e.rows();
  }
  return out;
}

/**
 * @brief Assembles a symmetric block matrix expression.
 *
 * Setting block (r, c) with r != c also writes its transpose into (c, r).
 */
class BlockBuilder
{
public:
  explicit BlockBuilder(std::vector<Index> sizes) : sizes_(std::move(sizes))
  {
    offsets_.push_back(0);
    for (Index s : sizes_) { offsets_.push_back(offsets_.back() + s); }
    expr_ = AffineMatrixExpr::zero(offsets_.back(), offsets_.back());
  }

  BlockBuilder & set(std::size_t r, std::size_t c, const AffineMatrixExpr & e)
  {
    require(e.rows() == sizes_.at(r) && e.cols() == sizes_.at(c), "BlockBuilder: block shape mismatch");
    place(r, c, e);
    if (r != c) { place(c, r, e.transpose()); }
    return *this;
  }

  BlockBuilder & set(std::size_t r, std::size_t c, const Matrix & m) { return set(r, c, AffineMatrixExpr(m)); }

  AffineMatrixExpr build() const { return expr_; }

private:
  void place(std::size_t r, std::size_t c, const AffineMatrixExpr & e)
  {
    const Index n = offsets_.back();
    Matrix k = Matrix::Zero(n, n);
    k.block(offsets_[r], offsets_[c], e.rows(), e.cols()) = e.constant();
    expr_ += k;
    for (const auto & [id, m] : e.coefficients()) {
      Matrix coef = Matrix::Zero(n, n);
      coef.block(offsets_[r], offsets_[c], e.rows(), e.cols()) = m;
      expr_.add_term(Var{id}, coef);
    }
  }

  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  AffineMatrixExpr expr_;
};

}  // namespace dmpc::conic
