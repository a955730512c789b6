#include "slide/structure.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <stdexcept>

namespace slide {

int pattern_weight(Pattern p) { return std::popcount(p); }

bool canonical_less(Pattern a, Pattern b) {
  const int wa = pattern_weight(a);
  const int wb = pattern_weight(b);
  if (wa != wb) return wa > wb;
  return a > b;
}

std::string pattern_string(Pattern p, int d) {
  std::string s(static_cast<std::size_t>(d), '0');
  for (int i = 0; i < d; ++i) {
    if (pattern_has(p, d, i)) s[static_cast<std::size_t>(i)] = '1';
  }
  return s;
}

namespace {

void check_d(int d) {
  if (d < 1 || d > kMaxViews) {
    throw Error(ErrorCode::DimensionMismatch,
                "view count must be in [1, " + std::to_string(kMaxViews) + "], got " +
                    std::to_string(d));
  }
}

}  // namespace

PatternSet pattern_set(int d) {
  check_d(d);
  if (d > 24) throw Error(ErrorCode::TooLarge, "pattern set too large to materialize");
  PatternSet set{d, {}};
  set.patterns.resize(full_pattern(d));
  std::iota(set.patterns.begin(), set.patterns.end(), Pattern{1});
  std::sort(set.patterns.begin(), set.patterns.end(), canonical_less);
  return set;
}

StructureMatrix::StructureMatrix(int d) : d_(d) { check_d(d); }

StructureMatrix StructureMatrix::from_patterns(int d, std::vector<Pattern> columns) {
  StructureMatrix s(d);
  const Pattern mask = full_pattern(d);
  for (Pattern p : columns) {
    if ((p & ~mask) != 0) {
      throw Error(ErrorCode::DimensionMismatch, "pattern has bits beyond d views");
    }
  }
  std::erase(columns, Pattern{0});
  std::stable_sort(columns.begin(), columns.end(), canonical_less);
  s.columns_ = std::move(columns);
  return s;
}

StructureMatrix StructureMatrix::parse(std::string_view text, int d) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    return v;
  };
  text = trim(text);
  if (text.empty()) {
    if (d <= 0) throw Error(ErrorCode::Parse, "empty structure needs an explicit view count");
    return StructureMatrix(d);
  }
  std::vector<Pattern> columns;
  int width = d;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto token = trim(text.substr(start, end - start));
    if (token.empty()) throw Error(ErrorCode::Parse, "empty token in structure string");
    if (width <= 0) width = static_cast<int>(token.size());
    if (static_cast<int>(token.size()) != width) {
      throw Error(ErrorCode::Parse, "structure token '" + std::string(token) + "' should have " +
                                        std::to_string(width) + " characters");
    }
    if (width > kMaxViews) throw Error(ErrorCode::Parse, "too many views in structure token");
    Pattern p = 0;
    for (int i = 0; i < width; ++i) {
      const char c = token[static_cast<std::size_t>(i)];
      if (c != '0' && c != '1') {
        throw Error(ErrorCode::Parse, "structure tokens may only contain 0 and 1");
      }
      if (c == '1') p |= pattern_bit(width, i);
    }
    columns.push_back(p);
    start = end + 1;
  }
  return from_patterns(width, std::move(columns));
}

std::vector<std::pair<Pattern, Index>> StructureMatrix::rank_by_pattern() const {
  std::vector<std::pair<Pattern, Index>> out;
  for (Pattern p : columns_) {
    if (!out.empty() && out.back().first == p) {
      ++out.back().second;
    } else {
      out.emplace_back(p, 1);
    }
  }
  return out;
}

Index StructureMatrix::multiplicity(Pattern p) const {
  return static_cast<Index>(std::count(columns_.begin(), columns_.end(), p));
}

Index StructureMatrix::view_rank(int view) const {
  Index count = 0;
  for (Pattern p : columns_) count += pattern_has(p, d_, view) ? 1 : 0;
  return count;
}

Index StructureMatrix::ones() const {
  Index count = 0;
  for (Pattern p : columns_) count += pattern_weight(p);
  return count;
}

std::pair<Index, Index> StructureMatrix::pattern_range(Pattern p) const {
  const auto [lo, hi] = std::equal_range(columns_.begin(), columns_.end(), p, canonical_less);
  return {static_cast<Index>(lo - columns_.begin()), static_cast<Index>(hi - columns_.begin())};
}

Eigen::MatrixXi StructureMatrix::to_matrix() const {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(d_, r());
  for (Index j = 0; j < r(); ++j) {
    for (int i = 0; i < d_; ++i) m(i, j) = has(i, j) ? 1 : 0;
  }
  return m;
}

std::string StructureMatrix::encode() const {
  std::string out;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (j) out += ',';
    out += pattern_string(columns_[j], d_);
  }
  return out;
}

StructureMatrix StructureMatrix::truncated(Index r) const {
  StructureMatrix s(d_);
  const auto keep = static_cast<std::size_t>(std::clamp<Index>(r, 0, this->r()));
  s.columns_.assign(columns_.begin(), columns_.begin() + static_cast<std::ptrdiff_t>(keep));
  return s;
}

StructureMatrix StructureMatrix::without_columns(const std::vector<Index>& drop) const {
  std::vector<Pattern> kept;
  for (Index j = 0; j < r(); ++j) {
    if (std::find(drop.begin(), drop.end(), j) == drop.end()) kept.push_back(column(j));
  }
  return from_patterns(d_, std::move(kept));
}

Canonicalized canonicalize(const Eigen::MatrixXi& raw) {
  const int d = static_cast<int>(raw.rows());
  check_d(d);
  std::vector<std::pair<Pattern, Index>> cols;
  for (Index j = 0; j < raw.cols(); ++j) {
    Pattern p = 0;
    for (int i = 0; i < d; ++i) {
      const int v = raw(i, j);
      if (v != 0 && v != 1) throw std::invalid_argument("structure entries must be 0 or 1");
      if (v == 1) p |= pattern_bit(d, i);
    }
    if (p != 0) cols.emplace_back(p, j);
  }
  std::stable_sort(cols.begin(), cols.end(),
                   [](const auto& a, const auto& b) { return canonical_less(a.first, b.first); });
  Canonicalized out;
  std::vector<Pattern> patterns;
  for (const auto& [p, j] : cols) {
    patterns.push_back(p);
    out.permutation.push_back(j);
  }
  out.structure = StructureMatrix::from_patterns(d, std::move(patterns));
  return out;
}

bool equivalent(const StructureMatrix& a, const StructureMatrix& b) {
  if (a.d() != b.d()) {
    throw Error(ErrorCode::DimensionMismatch, "structures have different view counts");
  }
  return a.columns() == b.columns();
}

BigInt count_structures(int d, Index r) {
  if (d < 1) throw Error(ErrorCode::DimensionMismatch, "d must be at least 1");
  if (r < 0) throw Error(ErrorCode::DimensionMismatch, "r must be nonnegative");
  if (d > 62) throw Error(ErrorCode::Overflow, "2^d - 1 does not fit in 64 bits");
  // binomial(r + m, m) with m = 2^d - 1, evaluated as binomial(r + m, r)
  // through exact running products.
  const BigInt m = (BigInt(1) << d) - 1;
  BigInt result = 1;
  for (Index k = 1; k <= r; ++k) {
    result *= m + k;
    result /= k;
  }
  return result;
}

namespace {

void enumerate_rec(const std::vector<Pattern>& patterns, std::size_t from, Index remaining,
                   std::vector<Pattern>& current, int d, std::vector<StructureMatrix>& out) {
  out.push_back(StructureMatrix::from_patterns(d, current));
  if (remaining == 0) return;
  for (std::size_t k = from; k < patterns.size(); ++k) {
    current.push_back(patterns[k]);
    enumerate_rec(patterns, k, remaining - 1, current, d, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<StructureMatrix> enumerate_structures(int d, Index r, std::uint64_t limit) {
  const BigInt count = count_structures(d, r);
  if (count > BigInt(limit)) {
    throw Error(ErrorCode::TooLarge, "refusing to enumerate " + count.str() + " structures");
  }
  const auto set = pattern_set(d);
  std::vector<StructureMatrix> out;
  out.reserve(count.convert_to<std::size_t>());
  std::vector<Pattern> current;
  enumerate_rec(set.patterns, 0, r, current, d, out);
  return out;
}

}  // namespace slide
