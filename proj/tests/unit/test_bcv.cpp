#include <doctest.h>

#include "slide/bcv.hpp"
#include "slide/simulate.hpp"

#include <set>

using namespace slide;

namespace {

RawViews<double> random_raw(std::uint64_t seed, Index n, std::vector<Index> p) {
  Rng rng(seed);
  RawViews<double> raw;
  for (auto pi : p) raw.views.push_back(rng.normal_matrix(n, pi) + Eigen::MatrixXd::Constant(n, pi, 3));
  return raw;
}

}  // namespace

TEST_CASE("fold plans are balanced partitions") {
  const auto plan = make_folds(6, {5, 9}, 3, 2, 1);
  for (const auto& f : plan.row_folds) CHECK(f.size() == 2);
  CHECK(plan.column_folds[0][0].size() + plan.column_folds[0][1].size() == 5);
  CHECK(std::max(plan.column_folds[0][0].size(), plan.column_folds[0][1].size()) == 3);
  std::set<Index> seen;
  for (const auto& f : plan.column_folds[1]) seen.insert(f.begin(), f.end());
  CHECK(seen.size() == 9);

  const auto again = make_folds(6, {5, 9}, 3, 2, 1);
  CHECK(again.row_folds == plan.row_folds);
  CHECK(again.column_folds == plan.column_folds);
  CHECK(make_folds(6, {5, 9}, 3, 2, 2).row_folds != plan.row_folds);

  CHECK_THROWS_AS(make_folds(5, {5}, 3, 2, 0), Error);
  CHECK_THROWS_AS(make_folds(10, {5, 1}, 2, 2, 0), Error);
  CHECK_THROWS_AS(make_folds(10, {5}, 1, 2, 0), Error);
  CHECK(complement(6, {1, 4}) == std::vector<Index>{0, 2, 3, 5});
}

TEST_CASE("every cell is held out exactly once") {
  const auto plan = make_folds(11, {7, 4}, 3, 2, 9);
  for (std::size_t v = 0; v < 2; ++v) {
    const Index pv = v == 0 ? 7 : 4;
    Eigen::MatrixXi hits = Eigen::MatrixXi::Zero(11, pv);
    for (const auto& rows : plan.row_folds) {
      for (const auto& cols : plan.column_folds[v]) {
        for (Index r : rows) {
          for (Index c : cols) ++hits(r, c);
        }
      }
    }
    CHECK((hits.array() == 1).all());
  }
}

TEST_CASE("empty structure predicts held-in column means") {
  Rng rng(3);
  const Index n = 12;
  RawViews<double> raw;
  raw.views = {rng.normal_matrix(n, 6), rng.normal_matrix(n, 5)};
  const auto plan = make_folds(n, {6, 5}, 3, 2, 4);
  const auto& out = plan.row_folds[0];
  const auto in = complement(n, out);
  // Make the held-out rows of the held-in columns equal to the held-in means,
  // so the fitted regression on the mean direction is exact.
  for (std::size_t i = 0; i < 2; ++i) {
    auto& x = raw.views[i];
    const auto cols_in = complement(x.cols(), plan.column_folds[i][0]);
    for (Index c : cols_in) {
      double mean = 0;
      for (Index r : in) mean += x(r, c);
      mean /= static_cast<double>(in.size());
      for (Index r : out) x(r, c) = mean;
    }
  }
  const auto res = bcv_error_one_holdout(raw, plan, 0, 0, StructureMatrix(2));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = raw.views[i];
    const auto& cols_out = plan.column_folds[i][0];
    const Eigen::MatrixXd x11 = x(out, cols_out);
    Eigen::RowVectorXd means = Eigen::RowVectorXd::Zero(static_cast<Index>(cols_out.size()));
    for (Index r : in) means += x(Eigen::seqN(r, 1), cols_out);
    means /= static_cast<double>(in.size());
    const Eigen::MatrixXd prediction = Eigen::VectorXd::Ones(static_cast<Index>(out.size())) * means;
    const Eigen::MatrixXd centered = x11.rowwise() - x11.colwise().mean();
    CHECK(res.view_errors[i] ==
          doctest::Approx((x11 - prediction).squaredNorm() / centered.squaredNorm()).epsilon(1e-10));
  }
}

TEST_CASE("true structure beats the empty one on low-noise data") {
  PlantedDesign design;
  design.n = 60;
  design.p = {15, 15};
  design.column_patterns = {0b11, 0b10, 0b01};
  design.strengths = {2, 1.5, 1.2};
  design.view_scales = {1, 1};
  design.add_noise = false;
  auto sim = gen_planted(design, 5);
  Rng rng(6);
  for (auto& x : sim.raw.views) x += 0.01 * rng.normal_matrix(x.rows(), x.cols()) * x.norm() / std::sqrt(double(x.size()));
  const auto plan = make_folds(60, {15, 15}, 3, 3, 7);
  for (int h = 0; h < 9; ++h) {
    const double truth = bcv_error_one_holdout(sim.raw, plan, h / 3, h % 3, sim.truth.structure).error;
    const double empty = bcv_error_one_holdout(sim.raw, plan, h / 3, h % 3, StructureMatrix(2)).error;
    CHECK(truth < empty);
  }
}

TEST_CASE("joint rescaling and single-view rescaling") {
  const auto raw = random_raw(8, 18, {6, 7});
  const auto plan = make_folds(18, {6, 7}, 3, 3, 2);
  const auto s = StructureMatrix::parse("11,10");
  const auto base = bcv_error_one_holdout(raw, plan, 1, 2, s);

  auto scaled = raw;
  for (auto& x : scaled.views) x *= 3.5;
  const auto joint = bcv_error_one_holdout(scaled, plan, 1, 2, s);
  CHECK(joint.error == doctest::Approx(base.error).epsilon(1e-9));

  // One view on its own: doubling it leaves its error unchanged.
  RawViews<double> single;
  single.views = {raw.views[0]};
  const auto plan1 = make_folds(18, {6}, 3, 3, 2);
  const auto s1 = StructureMatrix::parse("1,1");
  const auto e1 = bcv_error_one_holdout(single, plan1, 0, 1, s1).error;
  single.views[0] *= 2;
  CHECK(bcv_error_one_holdout(single, plan1, 0, 1, s1).error == doctest::Approx(e1).epsilon(1e-9));
}

TEST_CASE("rank above the held-in size is truncated") {
  const auto raw = random_raw(9, 6, {3, 3});
  const auto plan = make_folds(6, {3, 3}, 3, 3, 1);
  const auto s = StructureMatrix::parse("11,11,11,10,01");
  const auto res = bcv_error_one_holdout(raw, plan, 0, 0, s);
  CHECK(res.truncated);
  CHECK(res.fitted_rank <= 4);
}

TEST_CASE("select_structure") {
  const auto sim = gen_case1(1, 31);
  const std::vector<StructureMatrix> cands{StructureMatrix(2), StructureMatrix::parse("11,11"),
                                           sim.truth.structure,
                                           StructureMatrix::parse("11,11,11,10,10,10,01,01,01")};
  const auto report = select_structure(sim.raw, cands, 3, 3, 17);
  CHECK(report.fold_errors.rows() == 4);
  CHECK(report.fold_errors.cols() == 9);
  for (std::size_t c = 0; c < cands.size(); ++c) {
    CHECK(report.total_errors[c] ==
          doctest::Approx(report.fold_errors.row(static_cast<Index>(c)).sum()).epsilon(1e-12));
    CHECK(report.total_errors[report.selected] <= report.total_errors[c]);
  }
  CHECK((report.fold_errors.array() >= 0).all());

  BcvOptions<double> threaded;
  threaded.threads = 4;
  const auto again = select_structure(sim.raw, cands, 3, 3, 17, threaded);
  CHECK(again.fold_errors == report.fold_errors);
  CHECK(again.selected == report.selected);

  const auto alone = select_structure(sim.raw, std::vector<StructureMatrix>{cands[1]}, 3, 3, 17);
  CHECK(alone.selected == 0);

  // Equivalent encodings of the same class score the same.
  Eigen::MatrixXi shuffled(2, 7);
  shuffled << 0, 1, 1, 0, 1, 0, 1,
              1, 1, 0, 0, 0, 1, 1;
  const auto perm = select_structure(sim.raw,
                                     std::vector<StructureMatrix>{canonicalize(shuffled).structure},
                                     3, 3, 17);
  CHECK(perm.total_errors[0] == doctest::Approx(report.total_errors[2]).epsilon(1e-9));

  CHECK_THROWS_AS(select_structure(sim.raw, std::vector<StructureMatrix>{}, 3, 3, 1), Error);
}

TEST_CASE("ties go to the smaller structure") {
  const auto raw = random_raw(10, 12, {4, 4});
  const auto s = StructureMatrix::parse("11");
  const auto report = select_structure(raw, std::vector<StructureMatrix>{StructureMatrix::parse("11,10"), s, s}, 3, 2, 3);
  CHECK(report.total_errors[1] == report.total_errors[2]);
  if (report.total_errors[1] <= report.total_errors[0]) CHECK(report.selected == 1);
}
