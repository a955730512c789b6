#include "slide/serialize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace slide {

namespace {

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json numbers(const std::vector<double>& xs) {
  Json out = Json::array();
  for (double x : xs) out.push_back(number(x));
  return out;
}

std::string quoted(const std::string& s) { return '"' + s + '"'; }

std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::Parse, "matrix must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows == 0 ? 0 : static_cast<Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw Error(ErrorCode::Parse, "ragged matrix row " + std::to_string(i));
    }
    for (Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

Json model_to_json(const SlideModel<double>& model, const std::vector<std::string>& view_names) {
  Json j;
  j["structure"] = model.structure.encode();
  j["d"] = model.structure.d();
  j["n"] = model.n();
  j["p"] = model.p;
  if (!view_names.empty()) j["view_names"] = view_names;
  Json ranks = Json::array();
  for (const auto& [pattern, count] : model.structure.rank_by_pattern()) {
    ranks.push_back({{"pattern", pattern_string(pattern, model.structure.d())}, {"rank", count}});
  }
  j["rank_by_pattern"] = ranks;
  j["iterations"] = model.iterations;
  j["converged"] = model.converged;
  j["residual_trace"] = numbers(model.residual_trace);
  j["warnings"] = model.warnings;
  j["U"] = matrix_to_json(model.U);
  j["V"] = matrix_to_json(model.V);
  return j;
}

SlideModel<double> model_from_json(const Json& j) {
  try {
    SlideModel<double> model;
    const int d = j.at("d").get<int>();
    model.structure = StructureMatrix::parse(j.at("structure").get<std::string>(), d);
    model.p = j.at("p").get<std::vector<Index>>();
    const Index n = j.at("n").get<Index>();
    model.U = matrix_from_json(j.at("U"));
    model.V = matrix_from_json(j.at("V"));
    Index total = 0;
    for (auto pi : model.p) total += pi;
    if (model.U.size() == 0) model.U.resize(n, 0);
    if (model.V.size() == 0) model.V.resize(total, 0);
    if (model.U.cols() != model.structure.r() || model.V.cols() != model.structure.r() ||
        model.V.rows() != total || model.U.rows() != n) {
      throw Error(ErrorCode::DimensionMismatch, "model matrices do not match its structure");
    }
    model.iterations = j.value("iterations", 0);
    model.converged = j.value("converged", false);
    for (const auto& x : j.value("residual_trace", Json::array())) {
      model.residual_trace.push_back(x.is_null() ? std::nan("") : x.get<double>());
    }
    model.warnings = j.value("warnings", std::vector<std::string>{});
    return model;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bad model JSON: ") + e.what());
  }
}

Json candidates_to_json(const CandidateSet<double>& candidates, const LambdaGrid<double>& grid) {
  Json j;
  j["lambda_max"] = number(grid.lambda_max);
  j["grid"] = numbers(grid.values);
  Json list = Json::array();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& s = candidates.structures[k];
    list.push_back({{"structure", s.encode()},
                    {"rank", s.r()},
                    {"lambdas", numbers(candidates.generating_lambda[k])}});
  }
  j["candidates"] = list;
  j["warnings"] = candidates.warnings;
  return j;
}

Json bcv_report_to_json(const BcvReport<double>& report) {
  Json j;
  j["k_r"] = report.folds.k_r();
  j["k_c"] = report.folds.k_c();
  j["fold_seed"] = report.folds.seed;
  j["row_folds"] = report.folds.row_folds;
  j["column_folds"] = report.folds.column_folds;
  Json list = Json::array();
  for (std::size_t c = 0; c < report.candidates.size(); ++c) {
    std::vector<double> errors;
    for (Index h = 0; h < report.fold_errors.cols(); ++h) {
      errors.push_back(report.fold_errors(static_cast<Index>(c), h));
    }
    std::vector<int> truncated;
    for (std::size_t h = 0; h < report.truncated[c].size(); ++h) {
      if (report.truncated[c][h]) truncated.push_back(static_cast<int>(h));
    }
    list.push_back({{"structure", report.candidates[c].encode()},
                    {"total_error", number(report.total_errors[c])},
                    {"fold_errors", numbers(errors)},
                    {"truncated_holdouts", truncated}});
  }
  j["candidates"] = list;
  j["selected"] = report.selected;
  j["selected_structure"] = report.candidates[report.selected].encode();
  j["warnings"] = report.warnings;
  return j;
}

Json variance_to_json(const VarianceReport<double>& report,
                      const std::vector<std::string>& view_names) {
  Json views = Json::array();
  for (std::size_t i = 0; i < report.view_rank.size(); ++i) {
    views.push_back({{"name", i < view_names.size() ? view_names[i] : "view" + std::to_string(i + 1)},
                     {"rank", report.view_rank[i]},
                     {"fraction", number(report.view_fraction[i])}});
  }
  Json j;
  j["views"] = views;
  j["total_rank"] = report.total_rank;
  j["overall_fraction"] = number(report.overall_fraction);
  return j;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["generator"] = generator_name(c.generator);
  j["scenario"] = c.scenario;
  j["case2_signal"] = c.case2_signal == Case2Signal::Correlated ? "correlated" : "as-printed";
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["k_r"] = c.k_r;
  j["k_c"] = c.k_c;
  j["grid_length"] = c.grid_length;
  j["grid_min"] = c.grid_min;
  j["eps_pmf"] = c.eps_pmf;
  j["eps_fit"] = c.eps_fit;
  j["max_iter"] = c.max_iter;
  j["restarts"] = c.restarts;
  j["compute_best"] = c.compute_best;
  j["compute_onestep"] = c.compute_onestep;
  return j;
}

Json replication_to_json(const ReplicationRecord& rec) {
  Json j;
  j["index"] = rec.index;
  j["seed"] = rec.seed;
  j["ok"] = rec.ok;
  if (!rec.ok) {
    j["error"] = rec.error;
    return j;
  }
  j["truth"] = rec.truth.encode();
  j["selected"] = rec.selected.encode();
  j["rank_profile"] = rec.rank_profile();
  j["selected_is_truth"] = rec.selected_is_truth;
  j["truth_in_candidates"] = rec.truth_in_candidates;
  j["candidate_count"] = rec.candidate_count;
  j["loss_slide"] = number(rec.loss_slide);
  j["loss_best"] = number(rec.loss_best);
  j["best_structure"] = rec.best_structure;
  j["loss_onestep"] = number(rec.loss_onestep);
  j["warnings"] = rec.warnings;
  return j;
}

Json experiment_to_json(const ExperimentResult& result) {
  Json j;
  j["config"] = config_to_json(result.config);
  j["succeeded"] = result.succeeded();
  j["selected_truth_count"] = result.selected_truth_count();
  j["mean_loss_slide"] = number(result.mean_loss_slide());
  j["mean_loss_best"] = number(result.mean_loss_best());
  j["mean_loss_onestep"] = number(result.mean_loss_onestep());
  Json freq = Json::array();
  for (const auto& [key, count] : result.selection_frequency()) {
    freq.push_back({{"structure", key}, {"count", count}});
  }
  j["selection_frequency"] = freq;
  Json profiles = Json::array();
  for (const auto& [key, count] : result.rank_profile_frequency()) {
    profiles.push_back({{"profile", key}, {"count", count}});
  }
  j["rank_profile_frequency"] = profiles;
  Json totals = Json::array();
  for (const auto& [rank, count] : result.total_rank_frequency()) {
    totals.push_back({{"rank", rank}, {"count", count}});
  }
  j["total_rank_frequency"] = totals;
  Json per_view = Json::array();
  for (const auto& counts : result.view_rank_frequency()) {
    Json v = Json::array();
    for (const auto& [rank, count] : counts) v.push_back({{"rank", rank}, {"count", count}});
    per_view.push_back(v);
  }
  j["view_rank_frequency"] = per_view;
  Json reps = Json::array();
  for (const auto& rec : result.replications) reps.push_back(replication_to_json(rec));
  j["replications"] = reps;
  return j;
}

void write_replications_csv(std::ostream& out, const ExperimentResult& result) {
  out << "index,seed,ok,truth,selected,rank_profile,total_rank,selected_is_truth,"
         "truth_in_candidates,candidate_count,loss_slide,loss_best,best_structure,"
         "loss_onestep,error\n";
  for (const auto& rec : result.replications) {
    out << rec.index << ',' << rec.seed << ',' << (rec.ok ? 1 : 0) << ',';
    if (rec.ok) {
      out << quoted(rec.truth.encode()) << ',' << quoted(rec.selected.encode()) << ','
          << quoted(rec.rank_profile()) << ',' << rec.selected.r() << ','
          << (rec.selected_is_truth ? 1 : 0) << ',' << (rec.truth_in_candidates ? 1 : 0) << ','
          << rec.candidate_count << ',' << csv_number(rec.loss_slide) << ','
          << csv_number(rec.loss_best) << ',' << quoted(rec.best_structure) << ','
          << csv_number(rec.loss_onestep) << ",\n";
    } else {
      std::string msg = rec.error;
      for (auto& ch : msg) {
        if (ch == '"') ch = '\'';
      }
      out << ",,,,,,,,,,," << quoted(msg) << '\n';
    }
  }
}

void write_frequency_csv(std::ostream& out, const std::string& key_name,
                         const std::vector<std::pair<std::string, int>>& rows) {
  out << key_name << ",count\n";
  for (const auto& [key, count] : rows) out << quoted(key) << ',' << count << '\n';
}

void write_json(const std::string& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace slide
