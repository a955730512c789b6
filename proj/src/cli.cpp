#include "slide/cli.hpp"

#include "slide/bcv.hpp"
#include "slide/csv.hpp"
#include "slide/fit.hpp"
#include "slide/pmf.hpp"
#include "slide/preprocess.hpp"
#include "slide/serialize.hpp"
#include "slide/simulate.hpp"
#include "slide/structure.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

namespace slide {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

struct RunConfig {
  std::string command;
  std::vector<std::string> views;
  std::string out_dir = "slide_out";
  int grid_length = 50;
  double grid_min = 0.01;
  int k_r = 3;
  int k_c = 3;
  double eps_pmf = 1e-6;
  double eps_fit = 1e-6;
  int max_iter = 1000;
  int restarts = 1;
  std::optional<std::uint64_t> seed;
  std::string structure;
  bool structure_given = false;
  int threads = 1;

  std::string generator = "case1";
  int scenario = 1;
  std::string case2_signal = "correlated";
  int replications = 100;
  bool no_best = false;
  bool no_onestep = false;

  int count_d = 0;
  int count_r = 0;
};

struct SeedChoice {
  std::uint64_t value;
  std::string source;
};

SeedChoice resolve_seed(const RunConfig& cfg) {
  if (cfg.seed) return {*cfg.seed, "flag"};
  if (const char* env = std::getenv("SLIDE_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return {v, "SLIDE_SEED"};
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("SLIDE_SEED", "not an unsigned integer: " + std::string(env));
  }
  return {kDefaultSeed, "default"};
}

Json fit_config_json(const RunConfig& cfg) {
  Json j;
  j["grid_length"] = cfg.grid_length;
  j["grid_min"] = cfg.grid_min;
  j["k_r"] = cfg.k_r;
  j["k_c"] = cfg.k_c;
  j["eps_pmf"] = cfg.eps_pmf;
  j["eps_fit"] = cfg.eps_fit;
  j["max_iter"] = cfg.max_iter;
  j["restarts"] = cfg.restarts;
  j["threads"] = cfg.threads;
  return j;
}

Json manifest(const RunConfig& cfg, const SeedChoice& seed) {
  Json j;
  j["program"] = "slide";
  j["version"] = SLIDE_VERSION;
  j["command"] = cfg.command;
  j["seed"] = seed.value;
  j["seed_source"] = seed.source;
  return j;
}

std::string view_name(const std::string& path) { return fs::path(path).stem().string(); }

RawViews<double> load_views(const std::vector<std::string>& paths) {
  RawViews<double> raw;
  for (const auto& path : paths) {
    auto table = read_csv(path);
    raw.views.push_back(std::move(table.values));
    raw.view_names.push_back(view_name(path));
  }
  validate(raw);
  return raw;
}

std::string summary_text(const SlideModel<double>& model, const VarianceReport<double>& var,
                         const std::vector<std::string>& names, bool selected) {
  std::ostringstream os;
  const int d = model.structure.d();
  os << (selected ? "selected structure: " : "fixed structure: ")
     << (model.structure.empty() ? "(empty)" : model.structure.encode()) << '\n';
  os << "total rank: " << model.r() << '\n';
  os << "pattern ranks:\n";
  for (Pattern p : pattern_set(d).patterns) {
    os << "  " << pattern_string(p, d) << "  " << model.structure.multiplicity(p) << '\n';
  }
  os << std::fixed << std::setprecision(4);
  os << "variance explained:\n";
  for (std::size_t i = 0; i < var.view_rank.size(); ++i) {
    os << "  " << names[i] << "  rank " << var.view_rank[i] << "  fraction "
       << var.view_fraction[i] << '\n';
  }
  os << "  overall  fraction " << var.overall_fraction << '\n';
  for (const auto& w : model.warnings) os << "warning: " << w << '\n';
  return os.str();
}

int cmd_decompose(const RunConfig& cfg, const SeedChoice& seed, std::ostream& out) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  Json man = manifest(cfg, seed);
  man["inputs"] = cfg.views;
  man["config"] = fit_config_json(cfg);
  if (cfg.structure_given) man["config"]["structure"] = cfg.structure;
  std::vector<std::string> outputs;

  try {
    const auto raw = load_views(cfg.views);
    if (raw.d() < 2 && cfg.command == "decompose") {
      throw Error(ErrorCode::DimensionMismatch, "decompose needs at least two views");
    }
    const auto data = center_and_scale(raw);

    StructureMatrix s(raw.d());
    bool selected = false;
    if (cfg.structure_given) {
      s = StructureMatrix::parse(cfg.structure, static_cast<int>(raw.d()));
    } else {
      const auto grid = make_grid(data, cfg.grid_length, cfg.grid_min);
      PmfOptions<double> pmf;
      pmf.eps = cfg.eps_pmf;
      pmf.max_iter = cfg.max_iter;
      pmf.restarts = cfg.restarts;
      pmf.seed = derive_seed(seed.value, 1);
      pmf.threads = cfg.threads;
      const auto candidates = extract_candidates(data, grid, pmf);
      write_json((dir / "candidates.json").string(), candidates_to_json(candidates, grid));
      outputs.push_back("candidates.json");

      BcvOptions<double> bcv;
      bcv.fit.eps = cfg.eps_fit;
      bcv.fit.max_iter = cfg.max_iter;
      bcv.threads = cfg.threads;
      const auto report =
          select_structure(raw, candidates, cfg.k_r, cfg.k_c, derive_seed(seed.value, 2), bcv);
      write_json((dir / "bcv_report.json").string(), bcv_report_to_json(report));
      outputs.push_back("bcv_report.json");
      s = candidates.structures[report.selected];
      selected = true;
    }

    FitOptions<double> fit;
    fit.eps = cfg.eps_fit;
    fit.max_iter = cfg.max_iter;
    const auto model = fit_with_structure(data, s, std::nullopt, fit);
    Json mj = model_to_json(model, raw.view_names);
    Json means = Json::array();
    for (const auto& m : data.column_means) means.push_back(matrix_to_json(m).front());
    mj["column_means"] = means;
    mj["frobenius_scales"] = data.frobenius_scales;
    write_json((dir / "model.json").string(), mj);
    outputs.push_back("model.json");

    const auto var = variance_explained(model, data);
    write_json((dir / "variance.json").string(), variance_to_json(var, raw.view_names));
    outputs.push_back("variance.json");

    const auto text = summary_text(model, var, raw.view_names, selected);
    write_text((dir / "summary.txt").string(), text);
    outputs.push_back("summary.txt");
    out << text;

    man["status"] = "ok";
    man["outputs"] = outputs;
    write_json((dir / "manifest.json").string(), man);
    return 0;
  } catch (...) {
    man["status"] = "failed";
    man["outputs"] = outputs;
    man["partial"] = !outputs.empty();
    try {
      throw;
    } catch (const std::exception& e) {
      man["error"] = e.what();
    }
    try {
      write_json((dir / "manifest.json").string(), man);
    } catch (const std::exception&) {
    }
    throw;
  }
}

int cmd_simulate(const RunConfig& cfg, const SeedChoice& seed, std::ostream& out) {
  ExperimentConfig ec;
  ec.generator = parse_generator(cfg.generator);
  ec.scenario = cfg.scenario;
  ec.case2_signal =
      cfg.case2_signal == "as-printed" ? Case2Signal::AsPrinted : Case2Signal::Correlated;
  ec.replications = cfg.replications;
  ec.seed = seed.value;
  ec.k_r = cfg.k_r;
  ec.k_c = cfg.k_c;
  ec.grid_length = cfg.grid_length;
  ec.grid_min = cfg.grid_min;
  ec.eps_pmf = cfg.eps_pmf;
  ec.eps_fit = cfg.eps_fit;
  ec.max_iter = cfg.max_iter;
  ec.restarts = cfg.restarts;
  ec.threads = cfg.threads;
  ec.compute_best = !cfg.no_best;
  ec.compute_onestep = !cfg.no_onestep;

  const auto result = run_experiment(ec);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_json((dir / "experiment.json").string(), experiment_to_json(result));
  {
    std::ostringstream os;
    write_replications_csv(os, result);
    write_text((dir / "replications.csv").string(), os.str());
  }
  {
    std::ostringstream os;
    write_frequency_csv(os, "structure", result.selection_frequency());
    write_text((dir / "selection.csv").string(), os.str());
  }
  {
    std::ostringstream os;
    write_frequency_csv(os, "rank_profile", result.rank_profile_frequency());
    write_text((dir / "rank_profiles.csv").string(), os.str());
  }
  Json man = manifest(cfg, seed);
  man["config"] = config_to_json(ec);
  man["config"]["threads"] = cfg.threads;
  man["status"] = "ok";
  man["outputs"] = {"experiment.json", "replications.csv", "selection.csv", "rank_profiles.csv"};
  write_json((dir / "manifest.json").string(), man);

  out << "replications: " << result.succeeded() << " of " << result.replications.size()
      << " succeeded\n";
  out << "true structure selected: " << result.selected_truth_count() << '\n';
  out << "mean loss slide " << result.mean_loss_slide() << "  best "
      << result.mean_loss_best() << "  onestep " << result.mean_loss_onestep() << '\n';
  out << "rank profiles:\n";
  for (const auto& [profile, count] : result.rank_profile_frequency()) {
    out << "  " << std::setw(4) << count << "  " << profile << '\n';
  }
  for (const auto& rec : result.replications) {
    if (!rec.ok) out << "replication " << rec.index << " failed: " << rec.error << '\n';
  }
  return 0;
}

void add_fit_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--grid-length", cfg.grid_length, "number of lambda values")
      ->check(CLI::Range(2, 100000));
  sub->add_option("--grid-min", cfg.grid_min, "smallest lambda")
      ->check(CLI::PositiveNumber);
  sub->add_option("--kr", cfg.k_r, "row folds for cross-validation")->check(CLI::Range(2, 1000));
  sub->add_option("--kc", cfg.k_c, "column folds for cross-validation")
      ->check(CLI::Range(2, 1000));
  sub->add_option("--eps-pmf", cfg.eps_pmf, "convergence tolerance of the penalized solver")
      ->check(CLI::PositiveNumber);
  sub->add_option("--eps-fit", cfg.eps_fit, "convergence tolerance of the structured fit")
      ->check(CLI::PositiveNumber);
  sub->add_option("--max-iter", cfg.max_iter, "iteration cap")->check(CLI::Range(1, 100000000));
  sub->add_option("--restarts", cfg.restarts, "starts per lambda")->check(CLI::Range(1, 10000));
  sub->add_option("--threads", cfg.threads, "worker threads")->check(CLI::Range(1, 1024));
  sub->add_option("--out", cfg.out_dir, "output directory");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::uint64_t seed_flag = 0;

  CLI::App app{"Structured decomposition of multi-view data"};
  app.set_version_flag("--version", SLIDE_VERSION);
  app.set_config("--config", "", "key = value file; flags override it");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  auto* seed_opt = app.add_option("--seed", seed_flag, "master seed (else SLIDE_SEED, else 1)");
  app.fallthrough();

  auto* decompose = app.add_subcommand("decompose", "select a structure and fit it");
  decompose->add_option("--views", cfg.views, "one CSV file per view")->required()->check(
      CLI::ExistingFile);
  decompose->add_option("--structure", cfg.structure, "fixed structure, e.g. 11,10; skips selection");
  add_fit_options(decompose, cfg);

  auto* fit = app.add_subcommand("fit", "fit a given structure");
  fit->add_option("--views", cfg.views, "one CSV file per view")->required()->check(
      CLI::ExistingFile);
  fit->add_option("--structure", cfg.structure, "structure, e.g. 11,10")->required();
  add_fit_options(fit, cfg);

  auto* simulate = app.add_subcommand("simulate", "run a simulation study");
  simulate->add_option("--generator", cfg.generator, "case1, case2 or threeview")
      ->check(CLI::IsMember({"case1", "case2", "threeview"}));
  simulate->add_option("--scenario", cfg.scenario, "case1 scenario")->check(CLI::Range(1, 3));
  simulate->add_option("--case2-signal", cfg.case2_signal, "correlated or as-printed")
      ->check(CLI::IsMember({"correlated", "as-printed"}));
  simulate->add_option("--reps", cfg.replications, "replications")->check(CLI::Range(1, 1000000));
  simulate->add_flag("--no-best", cfg.no_best, "skip fitting every candidate");
  simulate->add_flag("--no-onestep", cfg.no_onestep, "skip the one-step baseline");
  add_fit_options(simulate, cfg);

  auto* count = app.add_subcommand("count-structures", "number of distinct structures");
  count->add_option("d", cfg.count_d, "views")->required()->check(CLI::Range(1, 1 << 20));
  count->add_option("r", cfg.count_r, "rank")->required()->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) cfg.seed = seed_flag;

  try {
    if (count->parsed()) {
      out << count_structures(cfg.count_d, cfg.count_r) << '\n';
      return 0;
    }
    SeedChoice seed{};
    try {
      seed = resolve_seed(cfg);
    } catch (const CLI::ValidationError& e) {
      err << e.what() << '\n';
      return 2;
    }
    if (decompose->parsed() || fit->parsed()) {
      cfg.command = decompose->parsed() ? "decompose" : "fit";
      cfg.structure_given = fit->parsed() || decompose->count("--structure") > 0;
      return cmd_decompose(cfg, seed, out);
    }
    cfg.command = "simulate";
    return cmd_simulate(cfg, seed, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace slide
