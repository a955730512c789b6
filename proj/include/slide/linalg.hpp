#pragma once

// Dense helpers shared by the solvers: SVD with a deterministic sign
// convention, orthonormalization, pseudo-inverse and truncation.

#include "slide/types.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace slide {

template <typename Scalar>
struct ThinSvd {
  Matrix<Scalar> U;
  Vector<Scalar> singular;
  Matrix<Scalar> V;
};

// Index of the entry with the largest magnitude; ties go to the lowest row.
template <typename Derived>
Index dominant_index(const Eigen::MatrixBase<Derived>& v) {
  Index best = 0;
  auto best_abs = std::abs(v(0));
  for (Index i = 1; i < v.size(); ++i) {
    const auto a = std::abs(v(i));
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  return best;
}

// Flip paired columns so that each column of `left` has a positive dominant
// entry. `right` may be empty.
template <typename Scalar>
void fix_signs(Matrix<Scalar>& left, Matrix<Scalar>& right) {
  for (Index j = 0; j < left.cols(); ++j) {
    if (left.rows() == 0) break;
    if (left(dominant_index(left.col(j)), j) < Scalar(0)) {
      left.col(j) *= Scalar(-1);
      if (right.cols() > j) right.col(j) *= Scalar(-1);
    }
  }
}

template <typename Derived>
ThinSvd<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  ThinSvd<Scalar> out;
  if (m.rows() == 0 || m.cols() == 0) {
    const Index k = std::min(m.rows(), m.cols());
    out.U = Matrix<Scalar>::Zero(m.rows(), k);
    out.V = Matrix<Scalar>::Zero(m.cols(), k);
    out.singular = Vector<Scalar>::Zero(k);
    return out;
  }
  Matrix<Scalar> dense = m;
  if (std::min(dense.rows(), dense.cols()) <= 32) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU();
    out.V = svd.matrixV();
    out.singular = svd.singularValues();
  } else {
    Eigen::BDCSVD<Matrix<Scalar>> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = svd.matrixU();
    out.V = svd.matrixV();
    out.singular = svd.singularValues();
  }
  fix_signs(out.U, out.V);
  return out;
}

template <typename Derived>
typename Derived::Scalar spectral_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  Matrix<Scalar> dense = m;
  if (std::min(dense.rows(), dense.cols()) <= 32) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(dense);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Matrix<Scalar>> svd(dense);
  return svd.singularValues()(0);
}

// Orthonormal basis of the columns of `m` via Householder QR, same sign
// convention as thin_svd. Assumes full column rank.
template <typename Derived>
Matrix<typename Derived::Scalar> orthonormalize(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::HouseholderQR<Matrix<Scalar>> qr(m);
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(m.rows(), m.cols());
  Matrix<Scalar> none;
  fix_signs(q, none);
  return q;
}

// Moore-Penrose inverse; singular values at or below rel_cutoff * sigma_max
// are treated as zero.
template <typename Derived>
Matrix<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& m,
                                                typename Derived::Scalar rel_cutoff) {
  using Scalar = typename Derived::Scalar;
  const auto svd = thin_svd(m);
  Vector<Scalar> inv = Vector<Scalar>::Zero(svd.singular.size());
  if (svd.singular.size() > 0) {
    const Scalar cutoff = rel_cutoff * svd.singular(0);
    for (Index k = 0; k < svd.singular.size(); ++k) {
      if (svd.singular(k) > cutoff) inv(k) = Scalar(1) / svd.singular(k);
    }
  }
  return svd.V * inv.asDiagonal() * svd.U.transpose();
}

// Best rank-k approximation in Frobenius norm.
template <typename Derived>
Matrix<typename Derived::Scalar> truncated_reconstruction(const Eigen::MatrixBase<Derived>& m,
                                                          Index k) {
  using Scalar = typename Derived::Scalar;
  if (k <= 0) return Matrix<Scalar>::Zero(m.rows(), m.cols());
  const auto svd = thin_svd(m);
  k = std::min<Index>(k, svd.singular.size());
  return svd.U.leftCols(k) * svd.singular.head(k).asDiagonal() * svd.V.leftCols(k).transpose();
}

// The r leading left singular vectors of `m`, r <= min(rows, cols).
template <typename Derived>
Matrix<typename Derived::Scalar> leading_left_singular_vectors(
    const Eigen::MatrixBase<Derived>& m, Index r) {
  const auto svd = thin_svd(m);
  return svd.U.leftCols(std::min<Index>(r, svd.U.cols()));
}

// Largest absolute entry of U^T U - I.
template <typename Derived>
typename Derived::Scalar orthonormality_defect(const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  if (u.cols() == 0) return Scalar(0);
  const Matrix<Scalar> gram = u.transpose() * u;
  return (gram - Matrix<Scalar>::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

// Row-to-column assignment of a square weight matrix with the largest total
// weight (Hungarian method with potentials). Returns col_of_row.
template <typename Derived>
std::vector<Index> max_weight_assignment(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  const Index n = w.rows();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based arrays; row_of[j] is the row matched to column j.
  std::vector<Scalar> pot_row(static_cast<std::size_t>(n + 1), 0);
  std::vector<Scalar> pot_col(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> row_of(static_cast<std::size_t>(n + 1), 0);
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  auto cost = [&](Index i, Index j) { return -w(i - 1, j - 1); };
  for (Index i = 1; i <= n; ++i) {
    row_of[0] = i;
    Index j0 = 0;
    std::vector<Scalar> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = row_of[static_cast<std::size_t>(j0)];
      Scalar delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const Scalar cur = cost(i0, j) - pot_row[static_cast<std::size_t>(i0)] - pot_col[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          pot_row[static_cast<std::size_t>(row_of[uj])] += delta;
          pot_col[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      row_of[static_cast<std::size_t>(j0)] = row_of[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> col_of(static_cast<std::size_t>(n), 0);
  for (Index j = 1; j <= n; ++j) col_of[static_cast<std::size_t>(row_of[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return col_of;
}

}  // namespace slide
