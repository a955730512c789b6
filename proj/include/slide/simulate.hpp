#pragma once

// Simulation designs with planted shared, partially-shared and individual
// structure, the signal-recovery loss, the one-step PCA baseline, and an
// exact constructive decomposition of noiseless signals.

#include "slide/bcv.hpp"
#include "slide/fit.hpp"
#include "slide/pmf.hpp"
#include "slide/preprocess.hpp"
#include "slide/structure.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace slide {

struct GroundTruth {
  std::vector<Eigen::MatrixXd> signals;
  StructureMatrix structure;
  /// n x r scores, orthonormal, column-centered.
  Eigen::MatrixXd scores;
  /// p x r loadings in canonical column order; Z = scores * loadings^T.
  Eigen::MatrixXd loadings;
  std::vector<double> sigmas;
  std::uint64_t seed = 0;
};

struct Simulated {
  RawViews<double> raw;
  GroundTruth truth;
};

/// How the second view's signal is formed in the two-view rank-one design.
enum class Case2Signal {
  Correlated,  // Z_2 = u_2 v_2^T with u_1^T u_2 = c
  AsPrinted,   // Z_2 = u_1 v_2^T
};

struct PlantedDesign {
  Index n = 100;
  std::vector<Index> p;
  /// One pattern per score column, in the order the columns are drawn.
  std::vector<Pattern> column_patterns;
  /// Diagonal scale of each score column.
  std::vector<double> strengths;
  /// Per-view multiplier c_i.
  std::vector<double> view_scales;
  bool add_noise = true;
};

/// Draws U (uniform, centered, orthonormalized) and block-sparse W (uniform,
/// orthonormalized without leaving the sparsity pattern), forms
/// Z_i = c_i U D W_i^T and adds N(0, sigma_i^2) noise calibrated to SNR 1.
Simulated gen_planted(const PlantedDesign& design, std::uint64_t seed);

/// Two views, ranks shared 2 / individual 2 + 2; scenario 1: p = (25, 25),
/// c = (1, 1); 2: p = (25, 25), c = (0.5, 1.5); 3: p = (25, 150), c = (1, 1).
Simulated gen_case1(int scenario, std::uint64_t seed, bool add_noise = true);

/// Two rank-one views whose scores have correlation c.
Simulated gen_case2(std::uint64_t seed, Case2Signal mode = Case2Signal::Correlated,
                    double correlation = 0.8, Index p1 = 25, Index p2 = 25,
                    bool add_noise = true);

/// Weight of the first score in u_2 = (a u~_1 + (1-a) u~_2)/sqrt(a^2 + (1-a)^2).
double case2_alpha(double correlation);

/// Three views of 100 columns; every one of the seven patterns has rank 2.
Simulated gen_threeview(std::uint64_t seed, bool add_noise = true);

/// Gram-Schmidt that keeps each column inside its pattern: blocks of the
/// same view are made mutually orthogonal, then each column is normalized.
Eigen::MatrixXd block_orthonormalize(const Eigen::MatrixXd& w, const std::vector<Index>& p,
                                     const std::vector<Pattern>& column_patterns);

/// sum_i ||Z_i - Zhat_i||_F^2 / ||Z_i||_F^2.
double frobenius_loss(const std::vector<Eigen::MatrixXd>& truth,
                      const std::vector<Eigen::MatrixXd>& estimate);

/// sigma_i with ||Z_i||_F^2 / (sigma_i^2 n p_i) = 1.
double noise_sigma(const Eigen::MatrixXd& signal);

/// Shared part from the rank-r0 SVD of the concatenated data, then a rank-r_i
/// SVD of each view's residual. Estimates are on the scale of `data`.
std::vector<Eigen::MatrixXd> onestep_baseline(const MultiViewData<double>& data,
                                              Index shared_rank,
                                              const std::vector<Index>& individual_ranks);

/// Constructive decomposition of noiseless signals (d <= 3): individual
/// scores first, then pairwise, then global, each from the part of the
/// remaining signal orthogonal to the other views.
SlideModel<double> exact_decompose(const std::vector<Eigen::MatrixXd>& signals,
                                   double rel_tol = 1e-10);

/// Back-scaled U V_i^T for every view.
std::vector<Eigen::MatrixXd> estimated_signals(const SlideModel<double>& model,
                                               const MultiViewData<double>& data);

enum class Generator { Case1, Case2, ThreeView };

Generator parse_generator(const std::string& name);
std::string generator_name(Generator g);

struct ExperimentConfig {
  Generator generator = Generator::Case1;
  int scenario = 1;
  Case2Signal case2_signal = Case2Signal::Correlated;
  int replications = 100;
  std::uint64_t seed = 1;
  int k_r = 3;
  int k_c = 3;
  int grid_length = 50;
  double grid_min = 0.01;
  double eps_pmf = 1e-6;
  double eps_fit = 1e-6;
  int max_iter = 1000;
  int restarts = 1;
  int threads = 1;
  /// Fit every candidate to find the loss-minimizing one (SLIDE_best).
  bool compute_best = true;
  bool compute_onestep = true;
};

struct ReplicationRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  StructureMatrix truth;
  StructureMatrix selected;
  std::string best_structure;
  std::size_t candidate_count = 0;
  bool truth_in_candidates = false;
  bool selected_is_truth = false;
  double loss_slide = 0;
  double loss_best = 0;
  double loss_onestep = 0;
  std::vector<std::string> warnings;

  /// Multiplicity of every pattern in canonical order, e.g. "11:2 10:2 01:2".
  std::string rank_profile() const;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicationRecord> replications;

  int succeeded() const;
  int selected_truth_count() const;
  /// Encoded selected structure -> count, most frequent first.
  std::vector<std::pair<std::string, int>> selection_frequency() const;
  std::vector<std::pair<std::string, int>> rank_profile_frequency() const;
  std::map<Index, int> total_rank_frequency() const;
  std::vector<std::map<Index, int>> view_rank_frequency() const;
  double mean_loss_slide() const;
  double mean_loss_best() const;
  double mean_loss_onestep() const;
};

Simulated generate(const ExperimentConfig& config, std::uint64_t seed);

ReplicationRecord run_replication(const ExperimentConfig& config, int index);

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace slide
