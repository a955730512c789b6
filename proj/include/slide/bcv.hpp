#pragma once

// Structure selection by bi-cross-validation adapted to multi-view data.
//
// Rows are split into k_r folds shared by all views and each view's columns
// into k_c folds. Holding out row fold a and column fold b removes one block
// X_i^11 from every view at once. The model is fitted on the standardized
// held-in block X^22, back-scaled and back-centered, and used to predict
// X_i^11 from X^12 (held-out rows, held-in columns, all views) and X_i^21
// (held-in rows, held-out columns of view i):
//
//   err = sum_i ||X_i^11 - X^12 Vh (Vh^T Vh)^+ Uh^T X_i^21||_F^2
//               / ||X_i^11 - column means||_F^2
//
// with Uh = [1/sqrt(n_r), U] and Vh = [X^22^T 1 / sqrt(n_r), V'], V'_i equal
// to V_i times the Frobenius scale of the centered X_i^22.

#include "slide/fit.hpp"
#include "slide/linalg.hpp"
#include "slide/parallel.hpp"
#include "slide/preprocess.hpp"
#include "slide/structure.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace slide {

struct FoldPlan {
  /// Sorted sample indices of each row fold.
  std::vector<std::vector<Index>> row_folds;
  /// column_folds[view][fold]: sorted column indices within the view.
  std::vector<std::vector<std::vector<Index>>> column_folds;
  std::uint64_t seed = 0;

  int k_r() const { return static_cast<int>(row_folds.size()); }
  int k_c() const { return column_folds.empty() ? 0 : static_cast<int>(column_folds.front().size()); }
  int holdouts() const { return k_r() * k_c(); }
};

/// Balanced random partitions (fold sizes differ by at most one). Rows are
/// shuffled once for all views, columns independently per view.
FoldPlan make_folds(Index n, const std::vector<Index>& p, int k_r, int k_c, std::uint64_t seed);

/// Indices of 0..n-1 not in `fold` (which must be sorted).
std::vector<Index> complement(Index n, const std::vector<Index>& fold);

template <typename Scalar>
struct BcvOptions {
  FitOptions<Scalar> fit;
  /// Insert (Uh^T Uh)^+ into the prediction, as in the single-matrix BCV.
  bool gram_corrected = false;
  int threads = 1;
};

template <typename Scalar>
struct HoldoutResult {
  Scalar error = 0;
  std::vector<Scalar> view_errors;
  std::vector<bool> skipped_views;
  /// The structure was cut to the rank the held-in block supports.
  bool truncated = false;
  Index fitted_rank = 0;
  std::vector<std::string> warnings;
};

template <typename Scalar>
struct BcvReport {
  std::vector<StructureMatrix> candidates;
  /// candidates x holdouts; holdout h = row_fold * k_c + column_fold.
  Matrix<Scalar> fold_errors;
  std::vector<Scalar> total_errors;
  std::size_t selected = 0;
  FoldPlan folds;
  std::vector<std::vector<bool>> truncated;
  std::vector<std::string> warnings;
};

template <typename Scalar>
HoldoutResult<Scalar> bcv_error_one_holdout(const RawViews<Scalar>& raw, const FoldPlan& plan,
                                            int row_fold, int col_fold,
                                            const StructureMatrix& s,
                                            const BcvOptions<Scalar>& opts = {}) {
  validate(raw);
  const auto d = static_cast<std::size_t>(raw.d());
  if (static_cast<std::size_t>(s.d()) != d || plan.column_folds.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "structure, plan and views disagree on d");
  }
  const Index n = raw.n();
  const auto& rows_out = plan.row_folds.at(static_cast<std::size_t>(row_fold));
  const auto rows_in = complement(n, rows_out);
  const auto n_r = static_cast<Index>(rows_in.size());

  RawViews<Scalar> held_in;
  held_in.view_names = raw.view_names;
  std::vector<Matrix<Scalar>> x11(d), x12(d), x21(d);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& x = raw.views[i];
    const auto& cols_out = plan.column_folds[i].at(static_cast<std::size_t>(col_fold));
    const auto cols_in = complement(x.cols(), cols_out);
    x11[i] = x(rows_out, cols_out);
    x12[i] = x(rows_out, cols_in);
    x21[i] = x(rows_in, cols_out);
    held_in.views.push_back(x(rows_in, cols_in));
  }
  const auto data22 = center_and_scale(held_in);

  HoldoutResult<Scalar> result;
  StructureMatrix fit_s = s;
  const Index feasible = std::min(n_r, data22.total_p());
  if (s.r() > feasible) {
    fit_s = s.truncated(feasible);
    result.truncated = true;
  }
  const auto model = fit_with_structure(data22, fit_s, std::nullopt, opts.fit);
  result.fitted_rank = model.r();
  result.warnings = model.warnings;

  const Index r = model.r();
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(Scalar(n_r));
  Matrix<Scalar> u_hat(n_r, r + 1);
  u_hat.col(0).setConstant(inv_sqrt);
  u_hat.rightCols(r) = model.U;

  const Matrix<Scalar> x22 = concatenate(held_in.views);
  Matrix<Scalar> v_hat(x22.cols(), r + 1);
  v_hat.col(0) = x22.colwise().sum().transpose() * inv_sqrt;
  const auto offsets = block_offsets(data22.p());
  for (std::size_t i = 0; i < d; ++i) {
    const Index rows = offsets[i + 1] - offsets[i];
    v_hat.block(offsets[i], 1, rows, r) =
        model.V.middleRows(offsets[i], rows) * data22.frobenius_scales[i];
  }

  const Matrix<Scalar> gram = v_hat.transpose() * v_hat;
  Matrix<Scalar> left = concatenate(x12) * v_hat * pseudo_inverse(gram, Scalar(1e-10));
  if (opts.gram_corrected) {
    const Matrix<Scalar> ugram = u_hat.transpose() * u_hat;
    left = left * pseudo_inverse(ugram, Scalar(1e-10));
  }

  result.view_errors.assign(d, Scalar(0));
  result.skipped_views.assign(d, false);
  for (std::size_t i = 0; i < d; ++i) {
    const Matrix<Scalar> prediction = left * (u_hat.transpose() * x21[i]);
    const Matrix<Scalar> centered = x11[i].rowwise() - x11[i].colwise().mean();
    const Scalar denom = centered.squaredNorm();
    const Scalar floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * x11[i].norm();
    if (!(denom > floor * floor) || denom == Scalar(0)) {
      result.skipped_views[i] = true;
      result.warnings.push_back("held-out block of view " + std::to_string(i + 1) +
                                " has zero centered variance; skipped");
      continue;
    }
    result.view_errors[i] = (x11[i] - prediction).squaredNorm() / denom;
    result.error += result.view_errors[i];
  }
  if (!std::isfinite(result.error)) {
    throw Error(ErrorCode::NonFinite, "non-finite holdout error");
  }
  return result;
}

/// Evaluates every candidate on every holdout of one shared fold plan and
/// picks the smallest total error; ties go to fewer components, then fewer
/// ones in S.
template <typename Scalar>
BcvReport<Scalar> select_structure(const RawViews<Scalar>& raw,
                                   const std::vector<StructureMatrix>& candidates, int k_r = 3,
                                   int k_c = 3, std::uint64_t seed = 0,
                                   const BcvOptions<Scalar>& opts = {}) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidate structures");
  validate(raw);

  BcvReport<Scalar> report;
  report.candidates = candidates;
  report.folds = make_folds(raw.n(), raw.p(), k_r, k_c, seed);
  const auto m = candidates.size();
  const auto holdouts = static_cast<std::size_t>(report.folds.holdouts());
  report.fold_errors = Matrix<Scalar>::Zero(static_cast<Index>(m), static_cast<Index>(holdouts));
  report.truncated.assign(m, std::vector<bool>(holdouts, false));

  struct Cell {
    HoldoutResult<Scalar> result;
    std::string failure;
  };
  std::vector<Cell> cells(m * holdouts);
  parallel_for(cells.size(), opts.threads, [&](std::size_t idx) {
    const auto c = idx / holdouts;
    const auto h = static_cast<int>(idx % holdouts);
    try {
      cells[idx].result = bcv_error_one_holdout(raw, report.folds, h / k_c, h % k_c,
                                                candidates[c], opts);
    } catch (const Error& e) {
      cells[idx].failure = e.what();
    }
  });

  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  for (std::size_t c = 0; c < m; ++c) {
    Scalar total = 0;
    for (std::size_t h = 0; h < holdouts; ++h) {
      const auto& cell = cells[c * holdouts + h];
      const auto row = static_cast<Index>(c);
      const auto col = static_cast<Index>(h);
      if (!cell.failure.empty()) {
        report.fold_errors(row, col) = inf;
        total = inf;
        report.warnings.push_back("candidate " + std::to_string(c) + " holdout " +
                                  std::to_string(h) + " failed: " + cell.failure);
        continue;
      }
      report.fold_errors(row, col) = cell.result.error;
      report.truncated[c][h] = cell.result.truncated;
      total += cell.result.error;
      for (std::size_t i = 0; i < cell.result.skipped_views.size(); ++i) {
        if (cell.result.skipped_views[i]) {
          report.warnings.push_back("candidate " + std::to_string(c) + " holdout " +
                                    std::to_string(h) + ": view " + std::to_string(i + 1) +
                                    " skipped (zero denominator)");
        }
      }
    }
    report.total_errors.push_back(total);
  }

  auto better = [&](std::size_t a, std::size_t b) {
    if (report.total_errors[a] != report.total_errors[b]) {
      return report.total_errors[a] < report.total_errors[b];
    }
    if (candidates[a].r() != candidates[b].r()) return candidates[a].r() < candidates[b].r();
    return candidates[a].ones() < candidates[b].ones();
  };
  std::size_t best = 0;
  for (std::size_t c = 1; c < m; ++c) {
    if (better(c, best)) best = c;
  }
  if (!std::isfinite(report.total_errors[best])) {
    throw Error(ErrorCode::EmptyCandidates, "every candidate failed cross-validation");
  }
  report.selected = best;
  return report;
}

template <typename Scalar>
BcvReport<Scalar> select_structure(const RawViews<Scalar>& raw,
                                   const CandidateSet<Scalar>& candidates, int k_r = 3,
                                   int k_c = 3, std::uint64_t seed = 0,
                                   const BcvOptions<Scalar>& opts = {}) {
  return select_structure(raw, candidates.structures, k_r, k_c, seed, opts);
}

}  // namespace slide
