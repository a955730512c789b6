#include <doctest.h>

#include "slide/pmf.hpp"
#include "slide/simulate.hpp"

using namespace slide;

namespace {

MultiViewData<double> noise_views(std::uint64_t seed, Index n, std::vector<Index> p) {
  Rng rng(seed);
  RawViews<double> raw;
  for (auto pi : p) raw.views.push_back(rng.normal_matrix(n, pi));
  return center_and_scale(raw);
}

// Minimizes 1/2 ||g - v||^2 + lambda ||v|| by a derivative-free pattern
// search over coordinate and random directions, independent of the closed form.
Eigen::VectorXd numeric_prox(const Eigen::VectorXd& g, double lambda) {
  auto f = [&](const Eigen::VectorXd& v) { return 0.5 * (g - v).squaredNorm() + lambda * v.norm(); };
  Rng rng(99);
  const Index n = g.size();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  double step = std::max(1.0, g.norm());
  while (step > 1e-10) {
    std::vector<Eigen::VectorXd> dirs;
    for (Index k = 0; k < n; ++k) {
      dirs.push_back(Eigen::VectorXd::Unit(n, k));
      dirs.push_back(-Eigen::VectorXd::Unit(n, k));
    }
    for (int k = 0; k < 16; ++k) dirs.push_back(rng.normal_matrix(n, 1).normalized());
    bool moved = false;
    for (const auto& dir : dirs) {
      const Eigen::VectorXd trial = v + step * dir;
      if (f(trial) < f(v)) {
        v = trial;
        moved = true;
      }
    }
    if (!moved) step /= 2;
  }
  return v;
}

}  // namespace

TEST_CASE("group soft threshold examples") {
  const Eigen::Vector2d g(3, 4);
  CHECK(group_soft_threshold(g, 0.0) == g);
  CHECK(group_soft_threshold(g, 5.0).isZero(0));
  const Eigen::VectorXd got = group_soft_threshold(g, 2.5);
  CHECK(got(0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(got(1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK((numeric_prox(g, 2.5) - got).norm() < 1e-6);
  CHECK(group_soft_threshold(Eigen::Vector2d::Zero(), 1.0).isZero(0));
}

TEST_CASE("V update matches a numeric minimizer per block") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto data = noise_views(100 + trial, 6, {3, 3});
    const Eigen::MatrixXd x = concatenate(data);
    const Eigen::MatrixXd u = random_orthonormal<double>(6, 2, 200 + trial);
    const Eigen::MatrixXd xtu = x.transpose() * u;
    const double lambda = 0.05 + 0.3 * rng.uniform();
    for (Index i = 0; i < 2; ++i) {
      for (Index j = 0; j < 2; ++j) {
        const Eigen::VectorXd g = xtu.block(3 * i, j, 3, 1);
        const Eigen::VectorXd closed = group_soft_threshold(g, lambda);
        CHECK((closed - numeric_prox(g, lambda)).norm() < 1e-6);
      }
    }
  }
}

TEST_CASE("procrustes alignment") {
  Rng rng(2);
  const Eigen::MatrixXd w = orthonormalize(rng.normal_matrix(8, 3));
  CHECK((procrustes_align(w) - w).norm() < 1e-12);
  CHECK((procrustes_align(Eigen::MatrixXd(3.7 * w)) - w).norm() < 1e-12);

  const Eigen::MatrixXd m = rng.normal_matrix(8, 3);
  const Eigen::MatrixXd u = procrustes_align(m);
  const double best = (u.transpose() * m).trace();
  for (int k = 0; k < 1000; ++k) {
    const Eigen::MatrixXd other = orthonormalize(rng.normal_matrix(8, 3));
    CHECK((other.transpose() * m).trace() <= best + 1e-12);
  }

  Eigen::MatrixXd deficient = rng.normal_matrix(8, 3);
  deficient.col(2) = deficient.col(0);
  CHECK_THROWS_AS(procrustes_align(deficient), Error);
}

TEST_CASE("procrustes update completes rank-deficient input") {
  Rng rng(3);
  const Eigen::MatrixXd u_prev = orthonormalize(rng.normal_matrix(10, 4));
  Eigen::MatrixXd m = rng.normal_matrix(10, 4);
  m.col(1) = 2 * m.col(0);
  m.col(3).setZero();
  const Eigen::MatrixXd u = procrustes_update(m, u_prev);
  CHECK(orthonormality_defect(u) < 1e-12);
  // The trace attains the nuclear norm of M, the Procrustes optimum.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  CHECK((u.transpose() * m).trace() == doctest::Approx(svd.singularValues().sum()).epsilon(1e-12));
}

TEST_CASE("procrustes update agrees with the SVD form across conditioning") {
  Rng rng(4);
  for (double spread : {1.0, 1e2, 1e4, 1e6, 1e9}) {
    for (auto [rows, cols] : {std::pair<Index, Index>{12, 5}, {60, 40}, {50, 50}}) {
      // Singular values spread log-uniformly over [1, spread].
      const Eigen::MatrixXd left = orthonormalize(rng.normal_matrix(rows, cols));
      const Eigen::MatrixXd right = orthonormalize(rng.normal_matrix(cols, cols));
      Eigen::VectorXd sv(cols);
      for (Index k = 0; k < cols; ++k) {
        sv(k) = std::pow(spread, -static_cast<double>(k) / static_cast<double>(cols - 1));
      }
      const Eigen::MatrixXd m = left * sv.asDiagonal() * right.transpose();
      const Eigen::MatrixXd u_prev = orthonormalize(rng.normal_matrix(rows, cols));
      const Eigen::MatrixXd u = procrustes_update(m, u_prev);
      CHECK(orthonormality_defect(u) < 1e-13);
      CHECK((u.transpose() * m).trace() == doctest::Approx(sv.sum()).epsilon(1e-12));
      if (spread <= 1e4) CHECK((u - procrustes_align(m)).norm() < 1e-9);
    }
  }
}

TEST_CASE("lambda grid") {
  const auto data = noise_views(4, 20, {5, 6});
  const double top = lambda_max(data);
  double expected = 0;
  for (const auto& v : data.views) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
    expected = std::max(expected, svd.singularValues()(0));
  }
  CHECK(top == doctest::Approx(expected).epsilon(1e-13));
  CHECK(top <= 1 + 1e-12);

  const auto two = make_grid(data, 2, 0.01);
  CHECK(two.values == std::vector<double>{0.01, top});
  const auto grid = make_grid(data, 50, 0.01);
  REQUIRE(grid.values.size() == 50);
  const double ratio = grid.values[1] / grid.values[0];
  for (std::size_t k = 1; k + 1 < grid.values.size(); ++k) {
    CHECK(grid.values[k + 1] / grid.values[k] == doctest::Approx(ratio).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_grid(data, 50, top * 1.01), Error);
  CHECK_THROWS_AS(make_grid(data, 1, 0.01), Error);

  // With lambda_max = 1 the grid is 10^(-2 + 2k/49).
  MultiViewData<double> unit;
  unit.views = {Eigen::MatrixXd::Identity(3, 3) / 1.0};
  const auto g1 = make_grid(unit, 50, 0.01);
  for (int k = 0; k < 50; ++k) {
    CHECK(g1.values[static_cast<std::size_t>(k)] ==
          doctest::Approx(std::pow(10.0, -2.0 + 2.0 * k / 49.0)).epsilon(1e-12));
  }
}

TEST_CASE("objective trace descends and matches direct evaluation") {
  const auto data = noise_views(5, 15, {4, 6, 5});
  const Eigen::MatrixXd x = concatenate(data);
  const auto offsets = block_offsets(data.p());
  for (double lambda : {0.0, 0.05, 0.2, 0.5}) {
    const auto sol = solve_pmf(data, lambda, std::nullopt, 1e-12, 500);
    for (std::size_t k = 1; k < sol.objective_trace.size(); ++k) {
      CHECK(sol.objective_trace[k] <= sol.objective_trace[k - 1] + 1e-10);
    }
    CHECK(orthonormality_defect(sol.U) < 1e-10);
    CHECK(sol.objective_trace.back() ==
          doctest::Approx(pmf_objective(x, offsets, sol.U, sol.V, lambda)).epsilon(1e-10));
  }
}

TEST_CASE("lambda at the maximum zeroes V") {
  const auto data = noise_views(6, 12, {4, 7});
  const double top = lambda_max(data);
  const auto sol = solve_pmf(data, top);
  CHECK(sol.V.isZero(0));
  CHECK(sol.objective_trace.back() == doctest::Approx(0.5 * concatenate(data).squaredNorm()));
  CHECK(support_structure(sol.V, data.p()).r() == 0);
}

TEST_CASE("lambda zero on noiseless low rank data reaches zero") {
  Rng rng(7);
  RawViews<double> raw;
  const Eigen::MatrixXd scores = rng.normal_matrix(20, 2);
  raw.views = {scores * rng.normal_matrix(2, 6), scores * rng.normal_matrix(2, 5)};
  const auto data = center_and_scale(raw);
  const auto sol = solve_pmf(data, 0.0, std::nullopt, 1e-14, 1000);
  const Eigen::MatrixXd x = concatenate(data);
  CHECK(sol.objective_trace.back() < 1e-10);
  CHECK((sol.U * sol.V.transpose() - x).norm() < 1e-8);
}

TEST_CASE("partial optimality at convergence") {
  const auto data = noise_views(8, 15, {5, 5});
  const double lambda = 0.1;
  const auto sol = solve_pmf(data, lambda, std::nullopt, 1e-8, 5000);
  REQUIRE(sol.converged);
  const auto again = solve_pmf(data, lambda, sol.U, 1e-8, 1);
  CHECK(std::abs(again.objective_trace.back() - sol.objective_trace.back()) < 1e-8);
}

TEST_CASE("solve_pmf input checks") {
  const auto data = noise_views(9, 10, {3, 3});
  CHECK_THROWS_AS(solve_pmf(data, -1.0), Error);
  CHECK_THROWS_AS(solve_pmf(data, 0.1, Eigen::MatrixXd(Eigen::MatrixXd::Ones(10, 2))), Error);
  CHECK_THROWS_AS(solve_pmf(data, 0.1, Eigen::MatrixXd(Eigen::MatrixXd::Identity(9, 2))), Error);
}

TEST_CASE("candidate extraction") {
  const auto data = noise_views(10, 20, {6, 6});
  const auto grid = make_grid(data, 20, 0.01);
  const auto cands = extract_candidates(data, grid);
  REQUIRE(cands.size() >= 2);
  CHECK(cands.size() <= grid.values.size());
  // The largest lambda gives the empty structure.
  bool has_empty = false;
  for (std::size_t k = 0; k < cands.size(); ++k) {
    if (cands.structures[k].r() == 0) {
      has_empty = true;
      CHECK(cands.generating_lambda[k].back() == grid.lambda_max);
    }
    for (std::size_t m = k + 1; m < cands.size(); ++m) {
      CHECK_FALSE(equivalent(cands.structures[k], cands.structures[m]));
    }
  }
  CHECK(has_empty);
  // Ordered by the smallest generating lambda.
  for (std::size_t k = 1; k < cands.size(); ++k) {
    CHECK(cands.generating_lambda[k].front() > cands.generating_lambda[k - 1].front());
  }

  PmfOptions<double> threaded;
  threaded.threads = 3;
  const auto again = extract_candidates(data, grid, threaded);
  REQUIRE(again.size() == cands.size());
  for (std::size_t k = 0; k < cands.size(); ++k) CHECK(again.structures[k] == cands.structures[k]);

  PmfOptions<double> restarts;
  restarts.restarts = 3;
  restarts.seed = 5;
  const auto wider = extract_candidates(data, grid, restarts);
  for (const auto& s : cands.structures) {
    bool found = false;
    for (const auto& t : wider.structures) found = found || equivalent(s, t);
    CHECK(found);
  }
}

TEST_CASE("case 1 candidates contain the true structure") {
  const auto sim = gen_case1(1, 2024);
  const auto data = center_and_scale(sim.raw);
  const auto cands = extract_candidates(data, make_grid(data));
  bool found = false;
  for (const auto& s : cands.structures) found = found || equivalent(s, sim.truth.structure);
  CHECK(found);
}
