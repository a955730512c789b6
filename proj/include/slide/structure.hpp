#pragma once

// Binary block-sparsity patterns S (d x r) and their equivalence classes.
//
// A pattern is one column of S, stored as a bitmask in which view 0 is the
// most significant of the d low bits. Canonical order sorts patterns by the
// number of views they touch (descending), then by mask value (descending),
// so for d = 3 the order is 111, 110, 101, 011, 100, 010, 001.

#include "slide/types.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slide {

using Pattern = std::uint32_t;
using BigInt = boost::multiprecision::cpp_int;

inline constexpr int kMaxViews = 31;

constexpr bool pattern_has(Pattern p, int d, int view) {
  return ((p >> (d - 1 - view)) & 1u) != 0;
}

constexpr Pattern pattern_bit(int d, int view) { return Pattern{1} << (d - 1 - view); }

constexpr Pattern full_pattern(int d) { return (Pattern{1} << d) - 1; }

int pattern_weight(Pattern p);

/// Strict weak order implementing the canonical pattern order.
bool canonical_less(Pattern a, Pattern b);

std::string pattern_string(Pattern p, int d);

/// The 2^d - 1 nonzero patterns in canonical order.
struct PatternSet {
  int d = 0;
  std::vector<Pattern> patterns;
};

PatternSet pattern_set(int d);

class StructureMatrix {
 public:
  StructureMatrix() = default;
  explicit StructureMatrix(int d);

  /// Drops zero patterns and sorts the rest canonically.
  static StructureMatrix from_patterns(int d, std::vector<Pattern> columns);

  /// Accepts "111,110,100"; an empty string is the r = 0 structure and then
  /// needs `d` > 0. When `d` > 0 the token width must match it.
  static StructureMatrix parse(std::string_view text, int d = 0);

  int d() const { return d_; }
  Index r() const { return static_cast<Index>(columns_.size()); }
  bool empty() const { return columns_.empty(); }
  const std::vector<Pattern>& columns() const { return columns_; }
  Pattern column(Index j) const { return columns_[static_cast<std::size_t>(j)]; }
  bool has(int view, Index j) const { return pattern_has(column(j), d_, view); }

  /// Distinct patterns with multiplicities, in canonical order.
  std::vector<std::pair<Pattern, Index>> rank_by_pattern() const;
  Index multiplicity(Pattern p) const;

  /// Number of components touching a view.
  Index view_rank(int view) const;
  /// Number of ones in S.
  Index ones() const;

  /// Column index range [first, last) of pattern p.
  std::pair<Index, Index> pattern_range(Pattern p) const;

  Eigen::MatrixXi to_matrix() const;
  std::string encode() const;

  /// Keeps the first `r` canonical columns.
  StructureMatrix truncated(Index r) const;
  /// Removes the listed column positions.
  StructureMatrix without_columns(const std::vector<Index>& drop) const;

  friend bool operator==(const StructureMatrix&, const StructureMatrix&) = default;

 private:
  int d_ = 0;
  std::vector<Pattern> columns_;
};

struct Canonicalized {
  StructureMatrix structure;
  /// permutation[k] is the input column that became canonical column k.
  std::vector<Index> permutation;
};

/// Canonical form of a raw 0/1 matrix.
Canonicalized canonicalize(const Eigen::MatrixXi& raw);

/// True iff the two structures define the same decomposition up to column
/// permutation and zero columns.
bool equivalent(const StructureMatrix& a, const StructureMatrix& b);

/// Number of distinct structures with at most r columns:
/// binomial(r + 2^d - 1, 2^d - 1).
BigInt count_structures(int d, Index r);

/// Every canonical structure with at most r columns. Throws TooLarge when the
/// count exceeds `limit`.
std::vector<StructureMatrix> enumerate_structures(int d, Index r, std::uint64_t limit = 1'000'000);

}  // namespace slide
