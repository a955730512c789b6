#include <doctest.h>

#include "slide/simulate.hpp"

using namespace slide;

namespace {

Index numeric_rank(const Eigen::MatrixXd& m, double rel) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto s = svd.singularValues();
  Index k = 0;
  while (k < s.size() && s(k) > rel * s(0)) ++k;
  return k;
}

void check_truth(const Simulated& sim) {
  const auto& t = sim.truth;
  CHECK(orthonormality_defect(t.scores) < 1e-10);
  CHECK(t.scores.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
  const auto offsets = block_offsets(sim.raw.p());
  for (std::size_t i = 0; i < t.signals.size(); ++i) {
    const Eigen::MatrixXd z =
        t.scores * t.loadings.middleRows(offsets[i], sim.raw.p()[i]).transpose();
    CHECK((z - t.signals[i]).norm() < 1e-12 * t.signals[i].norm() + 1e-14);
    const double calib = t.signals[i].squaredNorm() /
                         (t.sigmas[i] * t.sigmas[i] * double(t.signals[i].size()));
    CHECK(calib == doctest::Approx(1).epsilon(1e-9));
  }
  // Loadings respect the structure.
  for (Index j = 0; j < t.structure.r(); ++j) {
    for (int i = 0; i < t.structure.d(); ++i) {
      if (!t.structure.has(i, j)) {
        const auto k = static_cast<std::size_t>(i);
        CHECK(t.loadings.block(offsets[k], j, sim.raw.p()[k], 1).isZero(0));
      }
    }
  }
}

}  // namespace

TEST_CASE("case 1 generator") {
  for (int scenario = 1; scenario <= 3; ++scenario) {
    const auto sim = gen_case1(scenario, 10 + scenario);
    CHECK(sim.raw.n() == 100);
    CHECK(sim.truth.structure.encode() == "11,11,10,10,01,01");
    check_truth(sim);
  }
  CHECK(gen_case1(3, 1).raw.p() == std::vector<Index>{25, 150});
  CHECK_THROWS_AS(gen_case1(4, 1), Error);

  // Scenario 2 scales view 1 by 0.5 and view 2 by 1.5 relative to scenario 1.
  const auto a = gen_case1(1, 5, false);
  const auto b = gen_case1(2, 5, false);
  CHECK((b.truth.signals[0] - 0.5 * a.truth.signals[0]).norm() < 1e-12);
  CHECK((b.truth.signals[1] - 1.5 * a.truth.signals[1]).norm() < 1e-12);
}

TEST_CASE("block orthonormalization keeps the sparsity and orthonormality") {
  Rng rng(1);
  const std::vector<Index> p{6, 7, 5};
  const std::vector<Pattern> pats{0b111, 0b110, 0b101, 0b011, 0b100, 0b010, 0b001, 0b111};
  Eigen::MatrixXd w = rng.uniform_matrix(18, 8);
  const Eigen::MatrixXd q = block_orthonormalize(w, p, pats);
  CHECK(orthonormality_defect(q) < 1e-12);
  const auto offsets = block_offsets(p);
  for (Index j = 0; j < 8; ++j) {
    for (int i = 0; i < 3; ++i) {
      if (!pattern_has(pats[static_cast<std::size_t>(j)], 3, i)) {
        CHECK(q.block(offsets[static_cast<std::size_t>(i)], j, p[static_cast<std::size_t>(i)], 1).isZero(0));
      }
    }
  }
}

TEST_CASE("case 2 generator") {
  CHECK(case2_alpha(0.8) == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  const auto sim = gen_case2(3);
  check_truth(sim);
  // Scores of the two views have inner product 0.8; loadings have unit norm.
  const Eigen::MatrixXd z1 = sim.truth.signals[0];
  const Eigen::MatrixXd z2 = sim.truth.signals[1];
  Eigen::JacobiSVD<Eigen::MatrixXd> s1(z1, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::JacobiSVD<Eigen::MatrixXd> s2(z2, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CHECK(std::abs(std::abs(s1.matrixU().col(0).dot(s2.matrixU().col(0))) - 0.8) < 1e-9);
  CHECK(s1.singularValues()(0) == doctest::Approx(1).epsilon(1e-12));
  CHECK(s2.singularValues()(0) == doctest::Approx(1).epsilon(1e-12));
  CHECK(sim.truth.structure.encode() == "11,10");

  const auto printed = gen_case2(3, Case2Signal::AsPrinted);
  CHECK(printed.truth.structure.encode() == "11");
  check_truth(printed);
}

TEST_CASE("three view generator") {
  const auto sim = gen_threeview(4, false);
  check_truth(sim);
  const Eigen::MatrixXd z = concatenate(sim.truth.signals);
  CHECK(numeric_rank(z, 1e-9) == 14);
  for (const auto& zi : sim.truth.signals) CHECK(numeric_rank(zi, 1e-9) == 8);
  for (Pattern p : pattern_set(3).patterns) CHECK(sim.truth.structure.multiplicity(p) == 2);
}

TEST_CASE("generators are deterministic") {
  const auto a = gen_case1(1, 99);
  const auto b = gen_case1(1, 99);
  CHECK(a.raw.views[0] == b.raw.views[0]);
  CHECK(a.raw.views[1] == b.raw.views[1]);
  CHECK(gen_case1(1, 100).raw.views[0] != a.raw.views[0]);
}

TEST_CASE("noise calibration") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(100, 25);
  z(0, 0) = 10;
  CHECK(noise_sigma(z) * noise_sigma(z) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(noise_sigma(3 * z) == doctest::Approx(3 * noise_sigma(z)).epsilon(1e-14));
  CHECK_THROWS_AS(noise_sigma(Eigen::MatrixXd::Zero(3, 3)), Error);

  // E ||E||^2 matches ||Z||^2 on average.
  const auto sim = gen_case1(1, 8, false);
  const auto& zi = sim.truth.signals[0];
  const double sigma = noise_sigma(zi);
  Rng rng(9);
  double total = 0;
  for (int k = 0; k < 200; ++k) total += (sigma * rng.normal_matrix(zi.rows(), zi.cols())).squaredNorm();
  CHECK(total / 200 == doctest::Approx(zi.squaredNorm()).epsilon(0.05));
}

TEST_CASE("frobenius loss") {
  const std::vector<Eigen::MatrixXd> z{Eigen::MatrixXd::Random(4, 3), Eigen::MatrixXd::Random(4, 2)};
  CHECK(frobenius_loss(z, z) == 0);
  const std::vector<Eigen::MatrixXd> zero{Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(4, 2)};
  CHECK(frobenius_loss(z, zero) == doctest::Approx(2));
  const std::vector<Eigen::MatrixXd> twice{2 * z[0], 2 * z[1]};
  CHECK(frobenius_loss(z, twice) == doctest::Approx(2));
  CHECK_THROWS_AS(frobenius_loss(zero, z), Error);
}

TEST_CASE("one-step baseline") {
  // A purely global signal is recovered at the true ranks.
  PlantedDesign design;
  design.n = 30;
  design.p = {8, 9};
  design.column_patterns = {0b11, 0b11};
  design.strengths = {2, 1};
  design.view_scales = {1, 1};
  design.add_noise = false;
  const auto sim = gen_planted(design, 2);
  const auto data = center_and_scale(sim.raw);
  auto est = onestep_baseline(data, 2, {0, 0});
  for (std::size_t i = 0; i < est.size(); ++i) est[i] *= data.frobenius_scales[i];
  CHECK(frobenius_loss(sim.truth.signals, est) < 1e-9);

  // Shared rank 0 is a per-view truncated SVD; individual ranks 0 is SUM-PCA.
  const auto noisy = center_and_scale(gen_case1(1, 3).raw);
  const auto per_view = onestep_baseline(noisy, 0, {2, 3});
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK((per_view[i] - truncated_reconstruction(noisy.views[i], i == 0 ? 2 : 3)).norm() < 1e-12);
  }
  const auto sum_pca = onestep_baseline(noisy, 3, {0, 0});
  const Eigen::MatrixXd joint = truncated_reconstruction(concatenate(noisy), 3);
  CHECK((sum_pca[0] - joint.leftCols(25)).norm() < 1e-12);
  CHECK_THROWS_AS(onestep_baseline(noisy, 0, {26, 0}), Error);
  CHECK_THROWS_AS(onestep_baseline(noisy, 0, {1}), Error);
}

TEST_CASE("exact decomposition recovers planted structures") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(3));
    PlantedDesign design;
    design.n = 40;
    for (int i = 0; i < d; ++i) design.p.push_back(8 + static_cast<Index>(rng.below(6)));
    const Index r = 1 + static_cast<Index>(rng.below(6));
    Pattern covered = 0;
    while (covered != full_pattern(d)) {
      design.column_patterns.clear();
      covered = 0;
      for (Index j = 0; j < r; ++j) {
        design.column_patterns.push_back(1 + static_cast<Pattern>(rng.below((1u << d) - 1)));
        covered |= design.column_patterns.back();
      }
    }
    design.strengths.assign(static_cast<std::size_t>(r), 1.0);
    for (auto& x : design.strengths) x = 0.5 + rng.uniform();
    design.view_scales.assign(static_cast<std::size_t>(d), 1.0);
    design.add_noise = false;
    const auto sim = gen_planted(design, 500 + static_cast<std::uint64_t>(trial));
    const auto model = exact_decompose(sim.truth.signals);
    CHECK(model.structure == sim.truth.structure);
    for (int i = 0; i < d; ++i) {
      CHECK((model.fitted_signal(i) - sim.truth.signals[static_cast<std::size_t>(i)]).norm() <
            1e-9 * sim.truth.signals[static_cast<std::size_t>(i)].norm());
    }
    CHECK(orthonormality_defect(model.U) < 1e-8);
  }
}

TEST_CASE("exact decomposition special cases") {
  Rng rng(4);
  const Eigen::MatrixXd u = orthonormalize(rng.normal_matrix(20, 2));
  const Eigen::MatrixXd z = u * rng.normal_matrix(2, 6);
  const auto same = exact_decompose({z, z});
  CHECK(same.structure.encode() == "11,11");

  Eigen::MatrixXd q = orthonormalize(rng.normal_matrix(20, 4));
  const auto apart = exact_decompose({q.leftCols(2) * rng.normal_matrix(2, 5),
                                      q.rightCols(2) * rng.normal_matrix(2, 5)});
  CHECK(apart.structure.encode() == "10,10,01,01");

  // Correlated rank-one views: one shared and one individual component.
  const auto toy = gen_case2(6, Case2Signal::Correlated, 0.8, 25, 25, false);
  const auto model = exact_decompose(toy.truth.signals);
  CHECK(model.r() == 2);
  CHECK(model.structure.multiplicity(0b11) == 1);
  CHECK(model.structure.multiplicity(0b10) + model.structure.multiplicity(0b01) == 1);
  CHECK(equivalent(model.structure, toy.truth.structure));

  std::vector<Eigen::MatrixXd> four(4, z);
  CHECK_THROWS_AS(exact_decompose(four), Error);
}
