#pragma once

/**
 * @file
 * @brief Matrix-shaped decision variables built from scalar ones.
 */

#include "problem.hpp"

#include <string>

namespace dmpc::conic {

/// rows x cols matrix with one free scalar per entry.
inline AffineMatrixExpr matrix_variable(SdpProblem & p, Index rows, Index cols, const std::string & name)
{
  AffineMatrixExpr e(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const Var v = p.add_variable(name + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
      Matrix unit = Matrix::Zero(rows, cols);
      unit(r, c)  = 1.0;
      e.add_term(v, unit);
    }
  }
  return e;
}

/// n x n symmetric matrix with n(n+1)/2 free scalars.
inline AffineMatrixExpr symmetric_variable(SdpProblem & p, Index n, const std::string & name)
{
  AffineMatrixExpr e(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = r; c < n; ++c) {
      const Var v = p.add_variable(name + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
      Matrix unit = Matrix::Zero(n, n);
      unit(r, c) = unit(c, r) = 1.0;
      e.add_term(v, unit);
    }
  }
  return e;
}

/// Scalar sum of the diagonal entries.
inline LinearExpr trace(const AffineMatrixExpr & e)
{
  LinearExpr out;
  for (Index k = 0; k < std::min(e.rows(), e.cols()); ++k) { out += e.entry(k, k); }
  return out;
}

}  // namespace dmpc::conic
