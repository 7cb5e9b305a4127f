#pragma once

/**
 * @file
 * @brief Dense linear-algebra aliases and small symmetric-matrix helpers.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmpc {

using Index  = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised for malformed models, maps, or dimension mismatches.
class ValidationError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical routine cannot produce a trustworthy answer.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string & message)
{
  if (!condition) { throw ValidationError(message); }
}

/// Largest absolute entry, 0 for empty inputs.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived> & m)
{
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline Matrix symmetrize(const Matrix & m) { return 0.5 * (m + m.transpose()); }

inline bool is_symmetric(const Matrix & m, double tol = 1e-12)
{
  if (m.rows() != m.cols()) { return false; }
  const double scale = std::max(1.0, max_abs(m));
  return max_abs(m - m.transpose()) <= tol * scale;
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
inline double min_eigenvalue(const Matrix & m)
{
  if (m.size() == 0) { return 0.0; }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const Matrix & m)
{
  if (m.size() == 0) { return 0.0; }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// Symmetric PSD square root; eigenvalues below `clip` are treated as zero.
inline Matrix sym_sqrt(const Matrix & m, double clip = 1e-12)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector ev = es.eigenvalues();
  for (Index k = 0; k < ev.size(); ++k) { ev(k) = ev(k) < clip ? 0.0 : std::sqrt(ev(k)); }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

/// Inverse symmetric square root of a positive-definite matrix.
inline Matrix sym_inv_sqrt(const Matrix & m)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector & ev = es.eigenvalues();
  if (ev.size() > 0 && ev(0) <= 0.0) { throw NumericalError("sym_inv_sqrt: matrix is not positive definite"); }
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

inline double spectral_radius(const Matrix & m)
{
  if (m.size() == 0) { return 0.0; }
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Condition number of a symmetric positive-definite matrix (infinity if not PD).
inline double spd_condition(const Matrix & m)
{
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  const Vector & ev = es.eigenvalues();
  if (ev.size() == 0) { return 1.0; }
  if (ev(0) <= 0.0) { return std::numeric_limits<double>::infinity(); }
  return ev(ev.size() - 1) / ev(0);
}

inline Matrix block_diagonal(const std::vector<Matrix> & blocks)
{
  Index rows = 0, cols = 0;
  for (const auto & b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto & b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace dmpc
