#include "slide/simulate.hpp"

#include "slide/linalg.hpp"
#include "slide/parallel.hpp"
#include "slide/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace slide {

namespace {

Eigen::MatrixXd centered_orthonormal_scores(Rng& rng, Index n, Index r) {
  Eigen::MatrixXd raw = rng.uniform_matrix(n, r);
  raw.rowwise() -= raw.colwise().mean();
  return orthonormalize(raw);
}

// Orthonormal basis of col(m), dropping directions with singular value at or
// below `cutoff`.
Eigen::MatrixXd column_basis(const Eigen::MatrixXd& m, double cutoff) {
  if (m.cols() == 0) return Eigen::MatrixXd(m.rows(), 0);
  const auto svd = thin_svd(m);
  Index k = 0;
  while (k < svd.singular.size() && svd.singular(k) > cutoff) ++k;
  return svd.U.leftCols(k);
}

}  // namespace

Eigen::MatrixXd block_orthonormalize(const Eigen::MatrixXd& w, const std::vector<Index>& p,
                                     const std::vector<Pattern>& column_patterns) {
  const auto offsets = block_offsets(p);
  const int d = static_cast<int>(p.size());
  if (static_cast<Index>(column_patterns.size()) != w.cols() || offsets.back() != w.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "loadings layout does not match p and patterns");
  }
  Eigen::MatrixXd out = w;
  for (Index j = 0; j < out.cols(); ++j) {
    const Pattern pj = column_patterns[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      const auto lo = offsets[static_cast<std::size_t>(i)];
      const auto rows = p[static_cast<std::size_t>(i)];
      if (!pattern_has(pj, d, i)) {
        out.col(j).segment(lo, rows).setZero();
        continue;
      }
      // Two passes of classical Gram-Schmidt against earlier blocks of view i.
      for (int pass = 0; pass < 2; ++pass) {
        for (Index q = 0; q < j; ++q) {
          if (!pattern_has(column_patterns[static_cast<std::size_t>(q)], d, i)) continue;
          const Eigen::VectorXd prev = out.col(q).segment(lo, rows);
          const double nn = prev.squaredNorm();
          if (nn == 0) continue;
          out.col(j).segment(lo, rows) -= (prev.dot(out.col(j).segment(lo, rows)) / nn) * prev;
        }
      }
    }
    const double norm = out.col(j).norm();
    if (!(norm > 0)) {
      throw Error(ErrorCode::RankDeficient, "loadings block ran out of dimensions");
    }
    out.col(j) /= norm;
  }
  return out;
}

Simulated gen_planted(const PlantedDesign& design, std::uint64_t seed) {
  const auto d = static_cast<int>(design.p.size());
  const auto r = static_cast<Index>(design.column_patterns.size());
  if (design.strengths.size() != design.column_patterns.size() ||
      design.view_scales.size() != design.p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "planted design sizes disagree");
  }
  Rng rng(seed);
  const Eigen::MatrixXd u = centered_orthonormal_scores(rng, design.n, r);

  const auto offsets = block_offsets(design.p);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(offsets.back(), r);
  for (Index j = 0; j < r; ++j) {
    for (int i = 0; i < d; ++i) {
      if (!pattern_has(design.column_patterns[static_cast<std::size_t>(j)], d, i)) continue;
      const auto k = static_cast<std::size_t>(i);
      w.block(offsets[k], j, design.p[k], 1) = rng.uniform_matrix(design.p[k], 1);
    }
  }
  w = block_orthonormalize(w, design.p, design.column_patterns);

  Eigen::VectorXd strengths(r);
  for (Index j = 0; j < r; ++j) strengths(j) = design.strengths[static_cast<std::size_t>(j)];

  // True loadings V = diag(c) W D so that Z = U V^T.
  Eigen::MatrixXd loadings = w * strengths.asDiagonal();
  for (int i = 0; i < d; ++i) {
    const auto k = static_cast<std::size_t>(i);
    loadings.middleRows(offsets[k], design.p[k]) *= design.view_scales[k];
  }

  Simulated sim;
  sim.truth.seed = seed;
  for (int i = 0; i < d; ++i) {
    const auto k = static_cast<std::size_t>(i);
    Eigen::MatrixXd z = u * loadings.middleRows(offsets[k], design.p[k]).transpose();
    const double sigma = noise_sigma(z);
    Eigen::MatrixXd x = z;
    if (design.add_noise) x += sigma * rng.normal_matrix(design.n, design.p[k]);
    sim.truth.sigmas.push_back(sigma);
    sim.truth.signals.push_back(std::move(z));
    sim.raw.views.push_back(std::move(x));
    sim.raw.view_names.push_back("view" + std::to_string(i + 1));
  }

  Eigen::MatrixXi raw_s(d, r);
  for (Index j = 0; j < r; ++j) {
    for (int i = 0; i < d; ++i) {
      raw_s(i, j) = pattern_has(design.column_patterns[static_cast<std::size_t>(j)], d, i) ? 1 : 0;
    }
  }
  const auto canon = canonicalize(raw_s);
  sim.truth.structure = canon.structure;
  sim.truth.scores = u(Eigen::all, canon.permutation);
  sim.truth.loadings = loadings(Eigen::all, canon.permutation);
  return sim;
}

Simulated gen_case1(int scenario, std::uint64_t seed, bool add_noise) {
  PlantedDesign design;
  design.add_noise = add_noise;
  switch (scenario) {
    case 1:
      design.p = {25, 25};
      design.view_scales = {1.0, 1.0};
      break;
    case 2:
      design.p = {25, 25};
      design.view_scales = {0.5, 1.5};
      break;
    case 3:
      design.p = {25, 150};
      design.view_scales = {1.0, 1.0};
      break;
    default:
      throw Error(ErrorCode::Parse, "case1 scenario must be 1, 2 or 3");
  }
  design.column_patterns = {0b11, 0b11, 0b10, 0b10, 0b01, 0b01};
  design.strengths = {1.5, 1.3, 1.0, 0.8, 1.0, 0.7};
  return gen_planted(design, seed);
}

double case2_alpha(double correlation) {
  return correlation / (correlation + std::sqrt(1.0 - correlation * correlation));
}

Simulated gen_case2(std::uint64_t seed, Case2Signal mode, double correlation, Index p1,
                    Index p2, bool add_noise) {
  if (!(correlation > 0 && correlation < 1)) {
    throw Error(ErrorCode::Parse, "score correlation must lie in (0, 1)");
  }
  const Index n = 100;
  Rng rng(seed);
  const Eigen::MatrixXd base = centered_orthonormal_scores(rng, n, 2);
  const double a = case2_alpha(correlation);
  const Eigen::VectorXd u1 = base.col(0);
  const Eigen::VectorXd u2 = (a * base.col(0) + (1 - a) * base.col(1)) / std::hypot(a, 1 - a);
  Eigen::VectorXd v1 = rng.uniform_matrix(p1, 1);
  Eigen::VectorXd v2 = rng.uniform_matrix(p2, 1);
  v1.normalize();
  v2.normalize();

  Simulated sim;
  sim.truth.seed = seed;
  sim.truth.signals.push_back(u1 * v1.transpose());
  sim.truth.signals.push_back((mode == Case2Signal::Correlated ? u2 : u1) * v2.transpose());
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& z = sim.truth.signals[i];
    const double sigma = noise_sigma(z);
    Eigen::MatrixXd x = z;
    if (add_noise) x += sigma * rng.normal_matrix(z.rows(), z.cols());
    sim.truth.sigmas.push_back(sigma);
    sim.raw.views.push_back(std::move(x));
    sim.raw.view_names.push_back("view" + std::to_string(i + 1));
  }

  if (mode == Case2Signal::Correlated) {
    // u_1 = c u_2 + sqrt(1 - c^2) w with w orthogonal to u_2: u_2 is shared and
    // w carries the rest of view 1, the same split exact_decompose finds.
    const double c = u1.dot(u2);
    const double s = std::sqrt(1 - c * c);
    sim.truth.structure = StructureMatrix::parse("11,10");
    sim.truth.scores.resize(n, 2);
    sim.truth.scores.col(0) = u2;
    sim.truth.scores.col(1) = (u1 - c * u2) / s;
    sim.truth.loadings = Eigen::MatrixXd::Zero(p1 + p2, 2);
    sim.truth.loadings.col(0).head(p1) = c * v1;
    sim.truth.loadings.col(0).tail(p2) = v2;
    sim.truth.loadings.col(1).head(p1) = s * v1;
  } else {
    sim.truth.structure = StructureMatrix::parse("11");
    sim.truth.scores = u1;
    sim.truth.loadings.resize(p1 + p2, 1);
    sim.truth.loadings << v1, v2;
  }
  return sim;
}

Simulated gen_threeview(std::uint64_t seed, bool add_noise) {
  PlantedDesign design;
  design.add_noise = add_noise;
  design.p = {100, 100, 100};
  design.view_scales = {1.0, 1.0, 1.0};
  design.column_patterns = {0b111, 0b111, 0b110, 0b110, 0b101, 0b101, 0b011,
                            0b011, 0b100, 0b100, 0b010, 0b010, 0b001, 0b001};
  design.strengths = {1.5, 1.3, 1.0, 0.8, 1.0, 0.7, 1.0, 0.5, 1.2, 0.5, 0.9, 0.8, 0.5, 0.4};
  return gen_planted(design, seed);
}

double frobenius_loss(const std::vector<Eigen::MatrixXd>& truth,
                      const std::vector<Eigen::MatrixXd>& estimate) {
  if (truth.size() != estimate.size()) {
    throw Error(ErrorCode::DimensionMismatch, "loss needs one estimate per view");
  }
  double loss = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].rows() != estimate[i].rows() || truth[i].cols() != estimate[i].cols()) {
      throw Error(ErrorCode::DimensionMismatch, "estimate shape differs from signal");
    }
    const double denom = truth[i].squaredNorm();
    if (!(denom > 0)) throw Error(ErrorCode::ZeroSignal, "signal of a view is zero");
    loss += (truth[i] - estimate[i]).squaredNorm() / denom;
  }
  return loss;
}

double noise_sigma(const Eigen::MatrixXd& signal) {
  const double norm = signal.norm();
  if (!(norm > 0)) throw Error(ErrorCode::ZeroSignal, "cannot calibrate noise to a zero signal");
  return norm / std::sqrt(static_cast<double>(signal.rows()) * static_cast<double>(signal.cols()));
}

std::vector<Eigen::MatrixXd> onestep_baseline(const MultiViewData<double>& data,
                                              Index shared_rank,
                                              const std::vector<Index>& individual_ranks) {
  const auto p = data.p();
  if (individual_ranks.size() != p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "need one individual rank per view");
  }
  const Eigen::MatrixXd x = concatenate(data);
  if (shared_rank < 0 || shared_rank > std::min(x.rows(), x.cols())) {
    throw Error(ErrorCode::BadRank, "shared rank out of range");
  }
  const Eigen::MatrixXd shared = truncated_reconstruction(x, shared_rank);
  const auto offsets = block_offsets(p);
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Index ri = individual_ranks[i];
    if (ri < 0 || ri > std::min(x.rows(), p[i])) {
      throw Error(ErrorCode::BadRank, "individual rank out of range for view " +
                                          std::to_string(i + 1));
    }
    const Eigen::MatrixXd shared_i = shared.middleCols(offsets[i], p[i]);
    const Eigen::MatrixXd residual = data.views[i] - shared_i;
    out.push_back(shared_i + truncated_reconstruction(residual, ri));
  }
  return out;
}

SlideModel<double> exact_decompose(const std::vector<Eigen::MatrixXd>& signals, double rel_tol) {
  const int d = static_cast<int>(signals.size());
  if (d < 1 || d > 3) {
    throw Error(ErrorCode::UnsupportedViews, "exact decomposition supports 1 to 3 views");
  }
  std::vector<Index> p;
  for (const auto& z : signals) p.push_back(z.cols());
  const Index n = signals.front().rows();
  for (const auto& z : signals) {
    if (z.rows() != n) throw Error(ErrorCode::DimensionMismatch, "signals differ in row count");
  }
  const auto offsets = block_offsets(p);
  const Eigen::MatrixXd z_all = concatenate(signals);
  const double cutoff = rel_tol * spectral_norm(z_all);

  std::vector<Eigen::MatrixXd> remaining = signals;

  // Patterns from individual up to global; within a size, view 1 first.
  std::vector<Pattern> order = pattern_set(d).patterns;
  std::stable_sort(order.begin(), order.end(), [](Pattern a, Pattern b) {
    if (pattern_weight(a) != pattern_weight(b)) return pattern_weight(a) < pattern_weight(b);
    return a > b;
  });

  struct Piece {
    Pattern pattern;
    Eigen::MatrixXd scores;
    Eigen::MatrixXd loadings;  // p x k
  };
  std::vector<Piece> pieces;
  if (cutoff > 0) {
    for (Pattern pattern : order) {
      std::vector<int> members;
      for (int i = 0; i < d; ++i) {
        if (pattern_has(pattern, d, i)) members.push_back(i);
      }
      std::vector<Eigen::MatrixXd> blocks;
      for (int i : members) blocks.push_back(remaining[static_cast<std::size_t>(i)]);
      Eigen::MatrixXd part = concatenate(blocks);
      for (int k = 0; k < d; ++k) {
        if (pattern_has(pattern, d, k)) continue;
        const Eigen::MatrixXd basis = column_basis(remaining[static_cast<std::size_t>(k)], cutoff);
        part -= basis * (basis.transpose() * part);
      }
      const Eigen::MatrixXd scores = column_basis(part, cutoff);
      Index col = 0;
      for (int i : members) {
        const auto pi = p[static_cast<std::size_t>(i)];
        remaining[static_cast<std::size_t>(i)] -= part.middleCols(col, pi);
        col += pi;
      }
      if (scores.cols() == 0) continue;
      const Eigen::MatrixXd compact = part.transpose() * scores;
      Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(offsets.back(), scores.cols());
      col = 0;
      for (int i : members) {
        const auto k = static_cast<std::size_t>(i);
        loadings.middleRows(offsets[k], p[k]) = compact.middleRows(col, p[k]);
        col += p[k];
      }
      pieces.push_back({pattern, scores, std::move(loadings)});
    }
  }

  std::sort(pieces.begin(), pieces.end(),
            [](const Piece& a, const Piece& b) { return canonical_less(a.pattern, b.pattern); });
  std::vector<Pattern> columns;
  Index r = 0;
  for (const auto& piece : pieces) {
    r += piece.scores.cols();
    columns.insert(columns.end(), static_cast<std::size_t>(piece.scores.cols()), piece.pattern);
  }

  SlideModel<double> model;
  model.structure = StructureMatrix::from_patterns(d, columns);
  model.p = p;
  model.U.resize(n, r);
  model.V.resize(offsets.back(), r);
  Index at = 0;
  for (const auto& piece : pieces) {
    const Index k = piece.scores.cols();
    model.U.middleCols(at, k) = piece.scores;
    model.V.middleCols(at, k) = piece.loadings;
    at += k;
  }
  model.converged = true;
  if (orthonormality_defect(model.U) > 1e-8) {
    model.warnings.push_back("constructed scores are not mutually orthogonal");
  }
  return model;
}

std::vector<Eigen::MatrixXd> estimated_signals(const SlideModel<double>& model,
                                               const MultiViewData<double>& data) {
  std::vector<Eigen::MatrixXd> out;
  for (Index i = 0; i < data.d(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (model.r() == 0) {
      out.push_back(Eigen::MatrixXd::Zero(data.n(), data.views[k].cols()));
    } else {
      out.push_back(model.fitted_signal(i) * data.frobenius_scales[k]);
    }
  }
  return out;
}

Generator parse_generator(const std::string& name) {
  if (name == "case1") return Generator::Case1;
  if (name == "case2") return Generator::Case2;
  if (name == "threeview") return Generator::ThreeView;
  throw Error(ErrorCode::Parse, "unknown generator '" + name + "'");
}

std::string generator_name(Generator g) {
  switch (g) {
    case Generator::Case1: return "case1";
    case Generator::Case2: return "case2";
    case Generator::ThreeView: return "threeview";
  }
  return "unknown";
}

std::string ReplicationRecord::rank_profile() const {
  if (selected.d() == 0) return "";
  std::string out;
  for (Pattern p : pattern_set(selected.d()).patterns) {
    if (!out.empty()) out += ' ';
    out += pattern_string(p, selected.d()) + ":" + std::to_string(selected.multiplicity(p));
  }
  return out;
}

Simulated generate(const ExperimentConfig& config, std::uint64_t seed) {
  switch (config.generator) {
    case Generator::Case1: return gen_case1(config.scenario, seed);
    case Generator::Case2: return gen_case2(seed, config.case2_signal);
    case Generator::ThreeView: return gen_threeview(seed);
  }
  throw Error(ErrorCode::Parse, "unknown generator");
}

ReplicationRecord run_replication(const ExperimentConfig& config, int index) {
  ReplicationRecord rec;
  rec.index = index;
  rec.seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  try {
    const auto sim = generate(config, rec.seed);
    rec.truth = sim.truth.structure;
    const auto data = center_and_scale(sim.raw);
    const auto grid = make_grid(data, config.grid_length, config.grid_min);

    PmfOptions<double> pmf;
    pmf.eps = config.eps_pmf;
    pmf.max_iter = config.max_iter;
    pmf.restarts = config.restarts;
    pmf.seed = derive_seed(rec.seed, 1);
    const auto candidates = extract_candidates(data, grid, pmf);
    rec.warnings = candidates.warnings;
    rec.candidate_count = candidates.size();
    for (const auto& s : candidates.structures) {
      if (equivalent(s, rec.truth)) rec.truth_in_candidates = true;
    }

    BcvOptions<double> bcv;
    bcv.fit.eps = config.eps_fit;
    bcv.fit.max_iter = config.max_iter;
    const auto report =
        select_structure(sim.raw, candidates, config.k_r, config.k_c, derive_seed(rec.seed, 2), bcv);
    rec.warnings.insert(rec.warnings.end(), report.warnings.begin(), report.warnings.end());
    rec.selected = candidates.structures[report.selected];
    rec.selected_is_truth = equivalent(rec.selected, rec.truth);

    const auto model = fit_with_structure(data, rec.selected, std::nullopt, bcv.fit);
    rec.loss_slide = frobenius_loss(sim.truth.signals, estimated_signals(model, data));

    if (config.compute_best) {
      rec.loss_best = std::numeric_limits<double>::infinity();
      for (const auto& s : candidates.structures) {
        const auto m = fit_with_structure(data, s, std::nullopt, bcv.fit);
        const double loss = frobenius_loss(sim.truth.signals, estimated_signals(m, data));
        if (loss < rec.loss_best) {
          rec.loss_best = loss;
          rec.best_structure = s.encode();
        }
      }
    }
    if (config.compute_onestep) {
      const int d = rec.truth.d();
      const Index shared = rec.truth.multiplicity(full_pattern(d));
      std::vector<Index> individual;
      for (int i = 0; i < d; ++i) individual.push_back(rec.truth.view_rank(i) - shared);
      auto onestep = onestep_baseline(data, shared, individual);
      for (std::size_t i = 0; i < onestep.size(); ++i) onestep[i] *= data.frobenius_scales[i];
      rec.loss_onestep = frobenius_loss(sim.truth.signals, onestep);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.replications < 1) throw Error(ErrorCode::Parse, "need at least one replication");
  ExperimentResult result;
  result.config = config;
  result.replications.resize(static_cast<std::size_t>(config.replications));
  parallel_for(result.replications.size(), config.threads, [&](std::size_t k) {
    result.replications[k] = run_replication(config, static_cast<int>(k));
  });
  return result;
}

namespace {

std::vector<std::pair<std::string, int>> ranked(const std::map<std::string, int>& counts) {
  std::vector<std::pair<std::string, int>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

template <typename Get>
double mean_over_ok(const std::vector<ReplicationRecord>& reps, Get get) {
  double sum = 0;
  int count = 0;
  for (const auto& rec : reps) {
    if (!rec.ok) continue;
    sum += get(rec);
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / count;
}

}  // namespace

int ExperimentResult::succeeded() const {
  return static_cast<int>(std::count_if(replications.begin(), replications.end(),
                                        [](const auto& r) { return r.ok; }));
}

int ExperimentResult::selected_truth_count() const {
  return static_cast<int>(std::count_if(replications.begin(), replications.end(),
                                        [](const auto& r) { return r.ok && r.selected_is_truth; }));
}

std::vector<std::pair<std::string, int>> ExperimentResult::selection_frequency() const {
  std::map<std::string, int> counts;
  for (const auto& rec : replications) {
    if (rec.ok) ++counts[rec.selected.encode()];
  }
  return ranked(counts);
}

std::vector<std::pair<std::string, int>> ExperimentResult::rank_profile_frequency() const {
  std::map<std::string, int> counts;
  for (const auto& rec : replications) {
    if (rec.ok) ++counts[rec.rank_profile()];
  }
  return ranked(counts);
}

std::map<Index, int> ExperimentResult::total_rank_frequency() const {
  std::map<Index, int> counts;
  for (const auto& rec : replications) {
    if (rec.ok) ++counts[rec.selected.r()];
  }
  return counts;
}

std::vector<std::map<Index, int>> ExperimentResult::view_rank_frequency() const {
  std::vector<std::map<Index, int>> counts;
  for (const auto& rec : replications) {
    if (!rec.ok) continue;
    const int d = rec.selected.d();
    if (counts.size() < static_cast<std::size_t>(d)) counts.resize(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) ++counts[static_cast<std::size_t>(i)][rec.selected.view_rank(i)];
  }
  return counts;
}

double ExperimentResult::mean_loss_slide() const {
  return mean_over_ok(replications, [](const auto& r) { return r.loss_slide; });
}

double ExperimentResult::mean_loss_best() const {
  return mean_over_ok(replications, [](const auto& r) { return r.loss_best; });
}

double ExperimentResult::mean_loss_onestep() const {
  return mean_over_ok(replications, [](const auto& r) { return r.loss_onestep; });
}

}  // namespace slide
