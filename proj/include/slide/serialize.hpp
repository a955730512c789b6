#pragma once

// JSON and CSV forms of models, reports and experiment results. Non-finite
// numbers are written as null.

#include "slide/bcv.hpp"
#include "slide/fit.hpp"
#include "slide/pmf.hpp"
#include "slide/simulate.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace slide {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j);

Json model_to_json(const SlideModel<double>& model, const std::vector<std::string>& view_names = {});
/// Inverse of model_to_json; U, V, p and the structure round-trip exactly.
SlideModel<double> model_from_json(const Json& j);

Json candidates_to_json(const CandidateSet<double>& candidates, const LambdaGrid<double>& grid);
Json bcv_report_to_json(const BcvReport<double>& report);
Json variance_to_json(const VarianceReport<double>& report,
                      const std::vector<std::string>& view_names);

Json config_to_json(const ExperimentConfig& config);
Json replication_to_json(const ReplicationRecord& rec);
Json experiment_to_json(const ExperimentResult& result);

/// One row per replication.
void write_replications_csv(std::ostream& out, const ExperimentResult& result);
/// key,count rows, most frequent first.
void write_frequency_csv(std::ostream& out, const std::string& key_name,
                         const std::vector<std::pair<std::string, int>>& rows);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace slide
