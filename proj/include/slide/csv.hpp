#pragma once

// Minimal numeric CSV input and output.

#include "slide/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace slide {

struct CsvTable {
  Eigen::MatrixXd values;
  /// Empty when the file had no header row.
  std::vector<std::string> header;
};

/// A first row with any token that does not parse as a number is a header.
/// Ragged rows and unparsable cells raise ErrorCode::Parse.
CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::string& path);

void write_csv(std::ostream& out, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header = {});
void write_csv(const std::string& path, const Eigen::MatrixXd& m,
               const std::vector<std::string>& header = {});

}  // namespace slide
