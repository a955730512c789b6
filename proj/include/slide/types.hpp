#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace slide {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

enum class ErrorCode {
  DimensionMismatch,
  ZeroView,
  Overflow,
  TooLarge,
  BadGrid,
  RankDeficient,
  NonFinite,
  TooFewSamples,
  TooFewColumns,
  SingularGram,
  ZeroDenominator,
  ZeroSignal,
  UnsupportedViews,
  BadRank,
  EmptyCandidates,
  Parse,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroView: return "ZeroView";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::BadGrid: return "BadGrid";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::TooFewColumns: return "TooFewColumns";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::UnsupportedViews: return "UnsupportedViews";
    case ErrorCode::BadRank: return "BadRank";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace slide
