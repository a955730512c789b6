#pragma once

// Least-squares fit of X = U V(S)^T with orthonormal U and block-sparse V for
// a given structure S, followed by a per-pattern rotation that makes the
// decomposition identifiable.

#include "slide/linalg.hpp"
#include "slide/pmf.hpp"
#include "slide/preprocess.hpp"
#include "slide/structure.hpp"

#include <optional>
#include <string>
#include <vector>

namespace slide {

template <typename Scalar>
struct SlideModel {
  StructureMatrix structure;
  Matrix<Scalar> U;  // n x r, orthonormal columns
  Matrix<Scalar> V;  // p x r, zero block wherever S is zero
  std::vector<Index> p;
  std::vector<Scalar> residual_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;

  Index n() const { return U.rows(); }
  Index r() const { return U.cols(); }

  Matrix<Scalar> loadings(Index view) const {
    const auto offsets = block_offsets(p);
    const auto i = static_cast<std::size_t>(view);
    return V.middleRows(offsets[i], p[i]);
  }

  /// U V_i^T, on the scale the model was fitted on.
  Matrix<Scalar> fitted_signal(Index view) const { return U * loadings(view).transpose(); }

  Vector<Scalar> column_norms() const { return V.colwise().norm().transpose(); }
};

template <typename Scalar>
struct FitOptions {
  Scalar eps = Scalar(1e-6);
  int max_iter = 1000;
};

template <typename Scalar>
struct VarianceReport {
  std::vector<Index> view_rank;
  std::vector<Scalar> view_fraction;
  Index total_rank = 0;
  Scalar overall_fraction = 0;
};

template <typename Scalar>
SlideModel<Scalar> zero_model(const StructureMatrix& s, Index n, const std::vector<Index>& p) {
  SlideModel<Scalar> model;
  model.structure = StructureMatrix(s.d());
  model.p = p;
  Index total = 0;
  for (auto pi : p) total += pi;
  model.U = Matrix<Scalar>(n, 0);
  model.V = Matrix<Scalar>(total, 0);
  model.converged = true;
  return model;
}

namespace detail {

// V = (X^T U) restricted to the support of S.
template <typename Scalar>
void masked_loadings(const Matrix<Scalar>& xtu, const StructureMatrix& s,
                     const std::vector<Index>& offsets, Matrix<Scalar>& v) {
  v = xtu;
  for (Index j = 0; j < s.r(); ++j) {
    for (int i = 0; i < s.d(); ++i) {
      if (!s.has(i, j)) {
        const auto k = static_cast<std::size_t>(i);
        v.block(offsets[k], j, offsets[k + 1] - offsets[k], 1).setZero();
      }
    }
  }
}

}  // namespace detail

/// Rotate each pattern's columns so that, within a pattern, V's columns are
/// orthogonal with descending norms. U V^T and the zero blocks are unchanged.
template <typename Scalar>
void orthogonalize_blocks(Matrix<Scalar>& u, Matrix<Scalar>& v, const StructureMatrix& s) {
  for (const auto& [pattern, count] : s.rank_by_pattern()) {
    const auto [lo, hi] = s.pattern_range(pattern);
    const Index width = hi - lo;
    // U_b V_b^T = (U_b W) L Q^T with V_b = Q L W^T, so rotating both blocks by
    // W realizes the SVD of the pattern's signal without touching zero rows.
    Eigen::JacobiSVD<Matrix<Scalar>> svd(v.middleCols(lo, width), Eigen::ComputeThinV);
    const Matrix<Scalar> w = svd.matrixV();
    Matrix<Scalar> ub = u.middleCols(lo, width) * w;
    Matrix<Scalar> vb = v.middleCols(lo, width) * w;
    fix_signs(ub, vb);
    u.middleCols(lo, width) = ub;
    v.middleCols(lo, width) = vb;
  }
}

namespace detail {

// The r leading left singular vectors of X, placed on the columns of S so
// that the energy they capture inside their patterns is largest. When the
// components are exactly singular vectors, singular-value order alone can
// put them on the wrong patterns, and that start is a fixed point of the
// alternating updates.
template <typename Scalar>
Matrix<Scalar> matched_singular_start(const Matrix<Scalar>& x, const StructureMatrix& s,
                                      const std::vector<Index>& offsets) {
  const Index r = s.r();
  const Matrix<Scalar> u = leading_left_singular_vectors(x, r);
  const Matrix<Scalar> xtu = x.transpose() * u;
  Matrix<Scalar> captured = Matrix<Scalar>::Zero(r, r);  // vector k on column l
  for (Index i = 0; i < s.d(); ++i) {
    const Index rows = offsets[static_cast<std::size_t>(i) + 1] - offsets[static_cast<std::size_t>(i)];
    const Matrix<Scalar> energy =
        xtu.middleRows(offsets[static_cast<std::size_t>(i)], rows).colwise().squaredNorm();
    for (Index l = 0; l < r; ++l) {
      if (s.has(static_cast<int>(i), l)) captured.col(l) += energy.transpose();
    }
  }
  const auto col_of = max_weight_assignment(captured);
  Scalar best = 0;
  for (Index k = 0; k < r; ++k) best += captured(k, col_of[static_cast<std::size_t>(k)]);
  // Keep singular-value order unless the matching is strictly better.
  const Scalar tol = Scalar(1e-12) * std::max(Scalar(1), std::abs(best));
  if (captured.trace() >= best - tol) return u;
  Matrix<Scalar> out(u.rows(), r);
  for (Index k = 0; k < r; ++k) out.col(col_of[static_cast<std::size_t>(k)]) = u.col(k);
  return out;
}

}  // namespace detail

/// Alternating least squares for a fixed structure. Starts from the r leading
/// left singular vectors of X, matched to patterns, unless `u0` is given; stops when the squared
/// change of U V^T falls below eps.
template <typename Scalar>
SlideModel<Scalar> fit_with_structure(const MultiViewData<Scalar>& data,
                                      const StructureMatrix& s,
                                      const std::optional<std::type_identity_t<Matrix<Scalar>>>& u0 = std::nullopt,
                                      const FitOptions<Scalar>& opts = {}) {
  if (s.d() != data.d()) {
    throw Error(ErrorCode::DimensionMismatch, "structure has " + std::to_string(s.d()) +
                                                  " views, data has " + std::to_string(data.d()));
  }
  const Matrix<Scalar> x = concatenate(data);
  const auto p = data.p();
  const auto offsets = block_offsets(p);
  if (s.empty()) return zero_model<Scalar>(s, x.rows(), p);
  const Index r = s.r();
  if (r > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::BadRank, "structure rank " + std::to_string(r) +
                                        " exceeds min(n, p) = " +
                                        std::to_string(std::min(x.rows(), x.cols())));
  }

  SlideModel<Scalar> model;
  model.structure = s;
  model.p = p;
  if (u0) {
    if (u0->rows() != x.rows() || u0->cols() != r) {
      throw Error(ErrorCode::DimensionMismatch, "initial U must be n x r");
    }
    model.U = *u0;
  } else {
    model.U = detail::matched_singular_start(x, s, offsets);
  }

  const Scalar x_norm2 = x.squaredNorm();
  Matrix<Scalar> xtu = x.transpose() * model.U;
  detail::masked_loadings(xtu, s, offsets, model.V);
  // Residual with V optimal for U: ||X||^2 - ||V||^2.
  model.residual_trace.push_back(x_norm2 - model.V.squaredNorm());

  for (int k = 1; k <= opts.max_iter; ++k) {
    const Matrix<Scalar> m = x * model.V;
    Matrix<Scalar> u_next = procrustes_update(m, model.U);
    Matrix<Scalar> v_next;
    xtu.noalias() = x.transpose() * u_next;
    detail::masked_loadings(xtu, s, offsets, v_next);
    if (!u_next.allFinite() || !v_next.allFinite()) {
      throw Error(ErrorCode::NonFinite, "non-finite iterate in structured fit");
    }
    // ||U'V'^T - U V^T||^2 through r x r products.
    const Matrix<Scalar> cross = (model.U.transpose() * u_next) * (v_next.transpose() * model.V);
    const Scalar change =
        std::max(Scalar(0), v_next.squaredNorm() + model.V.squaredNorm() - 2 * cross.trace());
    model.U = std::move(u_next);
    model.V = std::move(v_next);
    model.residual_trace.push_back(x_norm2 - model.V.squaredNorm());
    model.iterations = k;
    if (change < opts.eps) {
      model.converged = true;
      break;
    }
  }

  std::vector<Index> dead;
  for (Index j = 0; j < r; ++j) {
    if (model.V.col(j).squaredNorm() == 0) dead.push_back(j);
  }
  if (!dead.empty()) {
    model.warnings.push_back(std::to_string(dead.size()) +
                             " fitted component(s) collapsed to zero and were dropped");
    std::vector<Index> keep;
    for (Index j = 0; j < r; ++j) {
      if (std::find(dead.begin(), dead.end(), j) == dead.end()) keep.push_back(j);
    }
    model.structure = s.without_columns(dead);
    Matrix<Scalar> u = model.U(Eigen::all, keep);
    Matrix<Scalar> v = model.V(Eigen::all, keep);
    model.U = std::move(u);
    model.V = std::move(v);
  }

  orthogonalize_blocks(model.U, model.V, model.structure);

  // Linear independence of each view's loadings within a pattern.
  for (const auto& [pattern, count] : model.structure.rank_by_pattern()) {
    const auto [lo, hi] = model.structure.pattern_range(pattern);
    for (int i = 0; i < model.structure.d(); ++i) {
      if (!pattern_has(pattern, model.structure.d(), i)) continue;
      const auto k = static_cast<std::size_t>(i);
      Eigen::JacobiSVD<Matrix<Scalar>> svd(model.V.block(offsets[k], lo, p[k], hi - lo));
      const auto sv = svd.singularValues();
      if (sv.size() < hi - lo || sv(sv.size() - 1) <= Scalar(1e-10)) {
        model.warnings.push_back("loadings of view " + std::to_string(i + 1) + " for pattern " +
                                 pattern_string(pattern, model.structure.d()) +
                                 " are not linearly independent");
      }
    }
  }
  return model;
}

template <typename Scalar>
VarianceReport<Scalar> variance_explained(const SlideModel<Scalar>& model,
                                          const MultiViewData<Scalar>& data) {
  VarianceReport<Scalar> report;
  Scalar explained = 0;
  Scalar total = 0;
  const auto d = data.d();
  for (Index i = 0; i < d; ++i) {
    const auto& x = data.views[static_cast<std::size_t>(i)];
    const Scalar part = model.r() == 0 ? Scalar(0) : model.fitted_signal(i).squaredNorm();
    const Scalar whole = x.squaredNorm();
    report.view_fraction.push_back(whole > 0 ? part / whole : Scalar(0));
    report.view_rank.push_back(model.r() == 0 ? 0 : model.structure.view_rank(static_cast<int>(i)));
    explained += part;
    total += whole;
  }
  report.total_rank = model.r();
  report.overall_fraction = total > 0 ? explained / total : Scalar(0);
  return report;
}

}  // namespace slide
