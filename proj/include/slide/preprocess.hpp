#pragma once

#include "slide/types.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace slide {

/// Matched views on the same n samples, as ingested.
template <typename Scalar>
struct RawViews {
  std::vector<Matrix<Scalar>> views;
  std::vector<std::string> view_names;

  Index n() const { return views.empty() ? 0 : views.front().rows(); }
  Index d() const { return static_cast<Index>(views.size()); }
  std::vector<Index> p() const {
    std::vector<Index> out;
    for (const auto& v : views) out.push_back(v.cols());
    return out;
  }
};

/// Column-centered views with unit Frobenius norm, plus what is needed to undo it.
template <typename Scalar>
struct MultiViewData {
  std::vector<Matrix<Scalar>> views;
  std::vector<RowVector<Scalar>> column_means;
  std::vector<Scalar> frobenius_scales;
  std::vector<std::string> view_names;

  Index n() const { return views.empty() ? 0 : views.front().rows(); }
  Index d() const { return static_cast<Index>(views.size()); }
  std::vector<Index> p() const {
    std::vector<Index> out;
    for (const auto& v : views) out.push_back(v.cols());
    return out;
  }
  Index total_p() const {
    Index total = 0;
    for (const auto& v : views) total += v.cols();
    return total;
  }
};

/// Offsets of each view's column block in the concatenated matrix; size d+1.
inline std::vector<Index> block_offsets(const std::vector<Index>& p) {
  std::vector<Index> offsets(p.size() + 1, 0);
  std::partial_sum(p.begin(), p.end(), offsets.begin() + 1);
  return offsets;
}

template <typename Scalar>
void validate(const RawViews<Scalar>& raw) {
  if (raw.views.empty()) {
    throw Error(ErrorCode::DimensionMismatch, "at least one view is required");
  }
  if (!raw.view_names.empty() && raw.view_names.size() != raw.views.size()) {
    throw Error(ErrorCode::DimensionMismatch, "view_names must match the number of views");
  }
  const Index n = raw.views.front().rows();
  if (n < 2) throw Error(ErrorCode::DimensionMismatch, "views need at least 2 rows");
  for (std::size_t i = 0; i < raw.views.size(); ++i) {
    if (raw.views[i].rows() != n) {
      throw Error(ErrorCode::DimensionMismatch,
                  "view " + std::to_string(i) + " has " + std::to_string(raw.views[i].rows()) +
                      " rows, expected " + std::to_string(n));
    }
    if (raw.views[i].cols() < 1) {
      throw Error(ErrorCode::DimensionMismatch, "view " + std::to_string(i) + " has no columns");
    }
    if (!raw.views[i].allFinite()) {
      throw Error(ErrorCode::NonFinite, "view " + std::to_string(i) + " has non-finite entries");
    }
  }
}

/// Column-center each view with the arithmetic mean, then divide it by its
/// Frobenius norm. A view that centers to zero is rejected.
template <typename Scalar>
MultiViewData<Scalar> center_and_scale(const RawViews<Scalar>& raw) {
  validate(raw);
  MultiViewData<Scalar> out;
  out.view_names = raw.view_names;
  if (out.view_names.empty()) {
    for (std::size_t i = 0; i < raw.views.size(); ++i) {
      out.view_names.push_back("view" + std::to_string(i + 1));
    }
  }
  for (std::size_t i = 0; i < raw.views.size(); ++i) {
    const auto& x = raw.views[i];
    RowVector<Scalar> means = x.colwise().mean();
    Matrix<Scalar> centered = x.rowwise() - means;
    const Scalar norm = centered.norm();
    // Rounding in the mean leaves O(eps) residue on constant columns.
    const Scalar floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * x.norm();
    if (!(norm > floor) || norm == Scalar(0)) {
      throw Error(ErrorCode::ZeroView,
                  "view '" + out.view_names[i] + "' is identically zero after centering");
    }
    out.views.push_back(centered / norm);
    out.column_means.push_back(std::move(means));
    out.frobenius_scales.push_back(norm);
  }
  return out;
}

/// Undo center_and_scale for one view.
template <typename Scalar>
Matrix<Scalar> restore_view(const MultiViewData<Scalar>& data, Index i) {
  const auto k = static_cast<std::size_t>(i);
  Matrix<Scalar> out = data.views[k] * data.frobenius_scales[k];
  out.rowwise() += data.column_means[k];
  return out;
}

/// X = [X_1 ... X_d].
template <typename Scalar>
Matrix<Scalar> concatenate(const std::vector<Matrix<Scalar>>& views) {
  if (views.empty()) return {};
  Index total = 0;
  for (const auto& v : views) total += v.cols();
  Matrix<Scalar> x(views.front().rows(), total);
  Index offset = 0;
  for (const auto& v : views) {
    x.middleCols(offset, v.cols()) = v;
    offset += v.cols();
  }
  return x;
}

template <typename Scalar>
Matrix<Scalar> concatenate(const MultiViewData<Scalar>& data) {
  return concatenate(data.views);
}

}  // namespace slide
