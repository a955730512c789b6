#pragma once

// Penalized matrix factorization
//
//   minimize  sum_i [ 1/2 ||X_i - U V_i^T||_F^2 + lambda sum_j ||V_ij||_2 ]
//   subject to U^T U = I
//
// solved by alternating a closed-form group soft-threshold for V with an
// orthogonal Procrustes step for U, and the candidate-structure path built
// from the supports of V over a logarithmic lambda grid.

#include "slide/linalg.hpp"
#include "slide/parallel.hpp"
#include "slide/preprocess.hpp"
#include "slide/rng.hpp"
#include "slide/structure.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace slide {

template <typename Scalar>
struct PmfSolution {
  Matrix<Scalar> U;
  Matrix<Scalar> V;
  Scalar lambda = 0;
  std::vector<Scalar> objective_trace;
  int iterations = 0;
  bool converged = false;
};

template <typename Scalar>
struct LambdaGrid {
  std::vector<Scalar> values;
  Scalar lambda_max = 0;
};

template <typename Scalar>
struct CandidateSet {
  std::vector<StructureMatrix> structures;
  std::vector<std::vector<Scalar>> generating_lambda;
  std::vector<std::string> warnings;

  std::size_t size() const { return structures.size(); }
};

template <typename Scalar>
struct PmfOptions {
  Scalar eps = Scalar(1e-6);
  int max_iter = 1000;
  /// Number of solves per lambda; the first starts from the leading singular
  /// vectors, the rest from seeded random orthonormal matrices.
  int restarts = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// max_i sigma_max(X_i); every lambda at or above it zeroes V.
template <typename Scalar>
Scalar lambda_max(const MultiViewData<Scalar>& data) {
  Scalar best = 0;
  for (const auto& x : data.views) best = std::max(best, spectral_norm(x));
  return best;
}

template <typename Scalar>
LambdaGrid<Scalar> make_grid(const MultiViewData<Scalar>& data, int length = 50,
                             Scalar min_lambda = Scalar(0.01)) {
  const Scalar top = lambda_max(data);
  if (length < 2) throw Error(ErrorCode::BadGrid, "grid length must be at least 2");
  if (!(min_lambda > 0) || !(min_lambda < top)) {
    throw Error(ErrorCode::BadGrid, "grid minimum must lie in (0, lambda_max)");
  }
  LambdaGrid<Scalar> grid;
  grid.lambda_max = top;
  const Scalar lo = std::log(min_lambda);
  const Scalar step = (std::log(top) - lo) / Scalar(length - 1);
  for (int k = 0; k < length; ++k) grid.values.push_back(std::exp(lo + step * Scalar(k)));
  grid.values.front() = min_lambda;
  grid.values.back() = top;
  return grid;
}

/// max(0, 1 - lambda/||g||) g. Norms within 64 ulps of lambda count as
/// being at the threshold, so lambda = sigma_max(X_i) zeroes exactly even
/// though the singular value and the norm are rounded differently.
template <typename Derived>
Vector<typename Derived::Scalar> group_soft_threshold(const Eigen::MatrixBase<Derived>& g,
                                                      typename Derived::Scalar lambda) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm = g.norm();
  const Scalar slack = Scalar(1) + Scalar(64) * std::numeric_limits<Scalar>::epsilon();
  if (norm <= lambda * slack) return Vector<Scalar>::Zero(g.size());
  return (Scalar(1) - lambda / norm) * g;
}

/// argmax trace(U^T M) over U with orthonormal columns: U = R Q^T from the
/// thin SVD M = R L Q^T. Throws RankDeficient when M loses column rank.
template <typename Derived>
Matrix<typename Derived::Scalar> procrustes_align(const Eigen::MatrixBase<Derived>& m,
                                                  typename Derived::Scalar rel_tol = 1e-12) {
  const auto svd = thin_svd(m);
  if (svd.singular.size() == 0) return Matrix<typename Derived::Scalar>(m.rows(), 0);
  const auto top = svd.singular(0);
  if (!(top > 0) || svd.singular(svd.singular.size() - 1) < rel_tol * top) {
    throw Error(ErrorCode::RankDeficient, "Procrustes input is rank deficient");
  }
  return svd.U * svd.V.transpose();
}

namespace detail {

// Orthonormal columns spanning `basis` (assumed orthonormal) first, then
// `extra` completion columns orthogonal to it, preferring directions of `seed`.
template <typename Scalar>
Matrix<Scalar> complete_basis(const Matrix<Scalar>& basis, const Matrix<Scalar>& seed,
                              Index extra) {
  const Index n = basis.rows();
  Matrix<Scalar> stacked(n, basis.cols() + seed.cols() + n);
  stacked << basis, seed, Matrix<Scalar>::Identity(n, n);
  Eigen::HouseholderQR<Matrix<Scalar>> qr(stacked);
  const Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(n, basis.cols() + extra);
  return q.rightCols(extra);
}

// Polar factor M (M^T M)^{-1/2} from the eigendecomposition of the Gram
// matrix, about twice as fast as a thin SVD of M. Only used while M is well
// conditioned (sigma_min / sigma_max > 1e-5); one Newton-Schulz step then
// restores orthonormality to rounding level.
template <typename Scalar>
std::optional<Matrix<Scalar>> polar_from_gram(const Matrix<Scalar>& m) {
  const Index r = m.cols();
  if (r == 0 || m.rows() < r) return std::nullopt;
  const Matrix<Scalar> gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(gram);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const auto& values = eig.eigenvalues();
  const Scalar top = values(r - 1);
  if (!(top > 0) || !(values(0) > Scalar(1e-10) * top)) return std::nullopt;
  const Matrix<Scalar>& w = eig.eigenvectors();
  const Matrix<Scalar> inv_root = w * values.cwiseSqrt().cwiseInverse().asDiagonal() * w.transpose();
  Matrix<Scalar> u = m * inv_root;
  const Matrix<Scalar> defect = u.transpose() * u;
  u = u * (Scalar(1.5) * Matrix<Scalar>::Identity(r, r) - Scalar(0.5) * defect);
  return u;
}

}  // namespace detail

/// Procrustes U-update that tolerates rank loss. Columns of M that are
/// exactly zero (dead components) keep a completion built from their previous
/// U columns; singular directions below rel_tol * sigma_max are completed
/// arbitrarily. Any completion attains the same maximum of trace(U^T M).
template <typename Scalar>
Matrix<Scalar> procrustes_update(const Matrix<Scalar>& m, const Matrix<Scalar>& u_prev,
                                 Scalar rel_tol = Scalar(1e-12)) {
  std::vector<Index> live;
  std::vector<Index> dead;
  for (Index j = 0; j < m.cols(); ++j) {
    (m.col(j).squaredNorm() > 0 ? live : dead).push_back(j);
  }
  if (live.empty()) return u_prev;

  const Matrix<Scalar> sub = m(Eigen::all, live);
  if (auto fast = detail::polar_from_gram(sub)) {
    if (dead.empty()) return *fast;
    Matrix<Scalar> u(m.rows(), m.cols());
    u(Eigen::all, live) = *fast;
    u(Eigen::all, dead) = detail::complete_basis<Scalar>(*fast, u_prev(Eigen::all, dead),
                                                         static_cast<Index>(dead.size()));
    return u;
  }
  const auto svd = thin_svd(sub);
  const Scalar cutoff = rel_tol * svd.singular(0);
  Index rank = 0;
  while (rank < svd.singular.size() && svd.singular(rank) > cutoff) ++rank;

  Matrix<Scalar> left = svd.U;
  const auto live_count = static_cast<Index>(live.size());
  if (rank < live_count || orthonormality_defect(left) > Scalar(1e-10)) {
    const Matrix<Scalar> kept = left.leftCols(rank);
    left.rightCols(live_count - rank) =
        detail::complete_basis<Scalar>(kept, u_prev(Eigen::all, live), live_count - rank);
  }
  const Matrix<Scalar> u_live = left * svd.V.transpose();

  Matrix<Scalar> u(m.rows(), m.cols());
  u(Eigen::all, live) = u_live;
  if (!dead.empty()) {
    u(Eigen::all, dead) = detail::complete_basis<Scalar>(
        u_live, u_prev(Eigen::all, dead), static_cast<Index>(dead.size()));
  }
  return u;
}

namespace detail {

template <typename Scalar>
Scalar penalty_of(const Matrix<Scalar>& v, const std::vector<Index>& offsets) {
  Scalar penalty = 0;
  for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
    const Index rows = offsets[i + 1] - offsets[i];
    for (Index j = 0; j < v.cols(); ++j) penalty += v.block(offsets[i], j, rows, 1).norm();
  }
  return penalty;
}

}  // namespace detail

/// Value of the penalized objective at (U, V), evaluated directly.
template <typename Scalar>
Scalar pmf_objective(const Matrix<Scalar>& x, const std::vector<Index>& offsets,
                     const Matrix<Scalar>& u, const Matrix<Scalar>& v, Scalar lambda) {
  return (x - u * v.transpose()).squaredNorm() / 2 + lambda * detail::penalty_of(v, offsets);
}

/// One run of the alternating algorithm at a fixed lambda. With no `u0`,
/// starts from the min(n, p) leading left singular vectors of X.
template <typename Scalar>
PmfSolution<Scalar> solve_pmf(const MultiViewData<Scalar>& data, Scalar lambda,
                              const std::optional<std::type_identity_t<Matrix<Scalar>>>& u0 = std::nullopt,
                              Scalar eps = Scalar(1e-6), int max_iter = 1000) {
  if (lambda < 0) throw Error(ErrorCode::BadGrid, "lambda must be nonnegative");
  const Matrix<Scalar> x = concatenate(data);
  const auto offsets = block_offsets(data.p());
  const Scalar x_norm2 = x.squaredNorm();

  PmfSolution<Scalar> sol;
  sol.lambda = lambda;
  if (u0) {
    if (u0->rows() != x.rows() || u0->cols() > std::min(x.rows(), x.cols())) {
      throw Error(ErrorCode::DimensionMismatch, "initial U has incompatible dimensions");
    }
    if (orthonormality_defect(*u0) > Scalar(1e-8)) {
      throw Error(ErrorCode::DimensionMismatch, "initial U must have orthonormal columns");
    }
    sol.U = *u0;
  } else {
    sol.U = leading_left_singular_vectors(x, std::min(x.rows(), x.cols()));
  }
  const Index r = sol.U.cols();

  Matrix<Scalar> xtu = x.transpose() * sol.U;
  sol.V = xtu;
  // ||X - U V^T||^2 = ||X||^2 - 2 tr(V^T X^T U) + ||V||^2 for orthonormal U.
  auto objective = [&](const Matrix<Scalar>& v, Scalar cross) {
    return (x_norm2 - 2 * cross + v.squaredNorm()) / 2 + lambda * detail::penalty_of(v, offsets);
  };
  Scalar f_prev = objective(sol.V, sol.V.cwiseProduct(xtu).sum());
  sol.objective_trace.push_back(f_prev);

  for (int k = 1; k <= max_iter; ++k) {
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
      const Index rows = offsets[i + 1] - offsets[i];
      for (Index j = 0; j < r; ++j) {
        sol.V.block(offsets[i], j, rows, 1) =
            group_soft_threshold(xtu.block(offsets[i], j, rows, 1), lambda);
      }
    }
    const Matrix<Scalar> m = x * sol.V;
    sol.U = procrustes_update(m, sol.U);
    xtu.noalias() = x.transpose() * sol.U;
    const Scalar f = objective(sol.V, sol.U.cwiseProduct(m).sum());
    if (!std::isfinite(f) || !sol.U.allFinite()) {
      throw Error(ErrorCode::NonFinite, "non-finite iterate in penalized factorization");
    }
    sol.objective_trace.push_back(f);
    sol.iterations = k;
    if (f_prev - f < eps) {
      sol.converged = true;
      break;
    }
    f_prev = f;
  }
  return sol;
}

/// Canonical structure of the support of V: view i is active in column j iff
/// the block V_ij has any nonzero entry. All-zero columns are dropped.
template <typename Scalar>
StructureMatrix support_structure(const Matrix<Scalar>& v, const std::vector<Index>& p) {
  const auto offsets = block_offsets(p);
  const int d = static_cast<int>(p.size());
  std::vector<Pattern> columns;
  for (Index j = 0; j < v.cols(); ++j) {
    Pattern pattern = 0;
    for (int i = 0; i < d; ++i) {
      const auto lo = offsets[static_cast<std::size_t>(i)];
      if (v.block(lo, j, p[static_cast<std::size_t>(i)], 1).squaredNorm() > 0) {
        pattern |= pattern_bit(d, i);
      }
    }
    columns.push_back(pattern);
  }
  return StructureMatrix::from_patterns(d, std::move(columns));
}

/// Random matrix with orthonormal columns, deterministic in `seed`.
template <typename Scalar>
Matrix<Scalar> random_orthonormal(Index n, Index r, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix<Scalar> g = rng.normal_matrix(n, r).template cast<Scalar>();
  return orthonormalize(g);
}

template <typename Scalar>
struct RestartResult {
  PmfSolution<Scalar> best;
  std::vector<StructureMatrix> supports;
};

/// Solve from the default start plus (restarts - 1) random starts; keep the
/// lowest objective and every run's support.
template <typename Scalar>
RestartResult<Scalar> solve_pmf_restarts(const MultiViewData<Scalar>& data, Scalar lambda,
                                         const PmfOptions<Scalar>& opts,
                                         std::uint64_t stream = 0) {
  RestartResult<Scalar> out;
  const auto p = data.p();
  const Index r = std::min(data.n(), data.total_p());
  bool have = false;
  for (int run = 0; run < std::max(1, opts.restarts); ++run) {
    std::optional<Matrix<Scalar>> start;
    if (run > 0) {
      start = random_orthonormal<Scalar>(data.n(), r,
                                         derive_seed(opts.seed, stream * 1000003ULL + run));
    }
    auto sol = solve_pmf(data, lambda, start, opts.eps, opts.max_iter);
    out.supports.push_back(support_structure(sol.V, p));
    if (!have || sol.objective_trace.back() < out.best.objective_trace.back()) {
      out.best = std::move(sol);
      have = true;
    }
  }
  return out;
}

/// Candidate structures along the lambda path, deduplicated and ordered by
/// the smallest lambda that produced them.
template <typename Scalar>
CandidateSet<Scalar> extract_candidates(const MultiViewData<Scalar>& data,
                                        const LambdaGrid<Scalar>& grid,
                                        const PmfOptions<Scalar>& opts = {}) {
  std::vector<Scalar> lambdas = grid.values;
  std::sort(lambdas.begin(), lambdas.end());

  struct Slot {
    std::vector<StructureMatrix> supports;
    std::string failure;
  };
  std::vector<Slot> slots(lambdas.size());
  parallel_for(lambdas.size(), opts.threads, [&](std::size_t k) {
    try {
      slots[k].supports = solve_pmf_restarts(data, lambdas[k], opts, k).supports;
    } catch (const Error& e) {
      slots[k].failure = e.what();
    }
  });

  CandidateSet<Scalar> out;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    if (!slots[k].failure.empty()) {
      out.warnings.push_back("lambda " + std::to_string(static_cast<double>(lambdas[k])) +
                             " skipped: " + slots[k].failure);
      continue;
    }
    for (const auto& s : slots[k].supports) {
      std::size_t hit = out.structures.size();
      for (std::size_t c = 0; c < out.structures.size(); ++c) {
        if (equivalent(out.structures[c], s)) {
          hit = c;
          break;
        }
      }
      if (hit == out.structures.size()) {
        out.structures.push_back(s);
        out.generating_lambda.emplace_back();
      }
      auto& lams = out.generating_lambda[hit];
      if (lams.empty() || lams.back() != lambdas[k]) lams.push_back(lambdas[k]);
    }
  }
  return out;
}

}  // namespace slide
