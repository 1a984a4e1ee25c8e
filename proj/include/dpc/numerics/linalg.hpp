#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dpc/errors.hpp"

namespace dpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Point = Eigen::Vector2d;

namespace numerics {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite()) throw InputError(name + " contains non-finite entries");
}

/**
 * Moore-Penrose pseudoinverse through a full SVD.
 *
 * Singular values below rel_tol * sigma_max are treated as zero.
 */
inline Matrix pseudo_inverse(const Matrix& m, double rel_tol = 1e-10) {
  require_finite(m, "pseudo_inverse input");
  if (!(rel_tol > 0.0)) throw InputError("pseudo_inverse: rel_tol must be positive");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);

  Matrix s_inv = Matrix::Zero(m.cols(), m.rows());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) s_inv(i, i) = 1.0 / sv(i);
  }
  return svd.matrixV() * s_inv * svd.matrixU().transpose();
}

/// Numerical rank at tolerance rel_tol * sigma_max.
inline Eigen::Index rank(const Matrix& m, double rel_tol = 1e-10) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * sv(0)) ++r;
  }
  return r;
}

/// Orthonormal basis of the null space of m (columns), from the SVD.
inline Matrix null_space(const Matrix& m, double rel_tol = 1e-10) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  Eigen::Index r = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > rel_tol * sv(0)) ++r;
    }
  }
  return svd.matrixV().rightCols(n - r);
}

/// A^k by repeated multiplication; k = 0 gives the identity.
inline Matrix matrix_power(const Matrix& a, int k) {
  if (a.rows() != a.cols()) throw InputError("matrix_power: matrix must be square");
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) out = out * a;
  return out;
}

}  // namespace numerics
}  // namespace dpc
