#include "slide/bcv.hpp"

#include "slide/rng.hpp"

#include <algorithm>

namespace slide {

namespace {

std::vector<std::vector<Index>> balanced_partition(Index n, int k, Rng& rng) {
  const auto perm = rng.permutation(n);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  const Index base = n / k;
  const Index extra = n % k;
  std::size_t pos = 0;
  for (Index f = 0; f < k; ++f) {
    const Index size = base + (f < extra ? 1 : 0);
    auto& fold = folds[static_cast<std::size_t>(f)];
    fold.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                perm.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(size)));
    std::sort(fold.begin(), fold.end());
    pos += static_cast<std::size_t>(size);
  }
  return folds;
}

}  // namespace

FoldPlan make_folds(Index n, const std::vector<Index>& p, int k_r, int k_c, std::uint64_t seed) {
  if (k_r < 2 || n < 2 * static_cast<Index>(k_r)) {
    throw Error(ErrorCode::TooFewSamples, "need k_r >= 2 and n >= 2 k_r (n = " +
                                              std::to_string(n) + ", k_r = " +
                                              std::to_string(k_r) + ")");
  }
  if (k_c < 2) throw Error(ErrorCode::TooFewColumns, "need k_c >= 2");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < k_c) {
      throw Error(ErrorCode::TooFewColumns, "view " + std::to_string(i + 1) + " has " +
                                                std::to_string(p[i]) + " columns, fewer than k_c");
    }
  }
  FoldPlan plan;
  plan.seed = seed;
  Rng rng(seed);
  plan.row_folds = balanced_partition(n, k_r, rng);
  for (Index pi : p) plan.column_folds.push_back(balanced_partition(pi, k_c, rng));
  return plan;
}

std::vector<Index> complement(Index n, const std::vector<Index>& fold) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n) - fold.size());
  std::size_t k = 0;
  for (Index i = 0; i < n; ++i) {
    if (k < fold.size() && fold[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace slide
