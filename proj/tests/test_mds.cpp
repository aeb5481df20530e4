#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "dimal/mds.hpp"
#include "oracles.hpp"

using namespace dimal;
using mds::Embedding;
using mds::StressSpec;

TEST_CASE("stress evaluation") {
  SUBCASE("exact targets give zero stress") {
    Rng rng(3);
    Embedding emb;
    emb.coords = oracles::random_config(rng, 8, 2);
    const StressSpec spec =
        StressSpec::from_distance_matrix(oracles::distance_matrix(emb.coords));
    CHECK(mds::stress(emb, spec) <= 1e-24);
    CHECK(mds::relative_stress(emb, spec) <= 1e-24);
  }
  SUBCASE("two points, distance 3 against target 1") {
    Embedding emb;
    emb.coords.resize(2, 1);
    emb.coords << 0.0, 3.0;
    StressSpec spec;
    spec.pairs = {{0, 1, 1.0, 1.0}};
    CHECK(mds::stress(emb, spec) == 4.0);
  }
  SUBCASE("matches a brute-force double loop") {
    Rng rng(5);
    Embedding emb;
    emb.coords = oracles::random_config(rng, 10, 3);
    const Eigen::MatrixXd targets =
        oracles::distance_matrix(oracles::random_config(rng, 10, 3));
    StressSpec spec;
    double expected = 0.0;
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j) {
        const double w = rng.uniform(0.1, 2.0);
        spec.pairs.push_back({i, j, targets(i, j), w});
        const double r =
            (emb.coords.row(i) - emb.coords.row(j)).norm() - targets(i, j);
        expected += w * r * r;
      }
    CHECK(std::abs(mds::stress(emb, spec) - expected) <= 1e-12 * expected);
  }
  SUBCASE("index out of range fails") {
    Embedding emb;
    emb.coords = Eigen::MatrixXd::Zero(2, 2);
    StressSpec spec;
    spec.pairs = {{0, 5, 1.0, 1.0}};
    CHECK_THROWS_AS(mds::stress(emb, spec), std::invalid_argument);
  }
  SUBCASE("invariant under rigid motion") {
    Rng rng(7);
    Embedding emb;
    emb.coords = oracles::random_config(rng, 15, 3);
    StressSpec spec;
    for (int i = 0; i < 15; ++i)
      for (int j = i + 1; j < 15; ++j)
        spec.pairs.push_back({i, j, rng.uniform(0.5, 2.0), 1.0});
    const double base = mds::stress(emb, spec);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::MatrixXd q = oracles::random_rotation(rng, 3);
      Embedding moved;
      moved.coords = emb.coords * q;
      moved.coords.rowwise() += Eigen::RowVector3d(rng.uniform(-2, 2),
                                                   rng.uniform(-2, 2),
                                                   rng.uniform(-2, 2));
      CHECK(std::abs(mds::stress(moved, spec) - base) <= 1e-10 * base);
    }
  }
}

TEST_CASE("jacobi eigensolver") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + rng.uniform_int(30);
    Eigen::MatrixXd a = oracles::random_config(rng, n, n);
    a = 0.5 * (a + a.transpose()).eval();
    const mds::SymmetricEigen eig = mds::jacobi_eigen(a);

    // Descending order, orthonormal vectors, small residuals.
    for (int j = 0; j + 1 < n; ++j) CHECK(eig.values(j) >= eig.values(j + 1));
    const Eigen::MatrixXd gram =
        eig.vectors.transpose() * eig.vectors - Eigen::MatrixXd::Identity(n, n);
    CHECK(gram.cwiseAbs().maxCoeff() <= 1e-8);
    const double scale = a.norm();
    for (int j = 0; j < n; ++j) {
      const double residual =
          (a * eig.vectors.col(j) - eig.values(j) * eig.vectors.col(j)).norm();
      CHECK(residual <= 1e-7 * scale);
    }

    // Cross-check eigenvalues against an independent solver.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> reference(a);
    for (int j = 0; j < n; ++j)
      CHECK(std::abs(eig.values(j) - reference.eigenvalues()(n - 1 - j)) <=
            1e-9 * std::max(1.0, scale));
  }
  CHECK(mds::jacobi_eigen(Eigen::MatrixXd::Zero(3, 3)).values.cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("classical scaling") {
  SUBCASE("unit equilateral triangle") {
    Eigen::MatrixXd d(3, 3);
    d << 0, 1, 1, 1, 0, 1, 1, 1, 0;
    const auto res = mds::classical_scaling(d, 2);
    const StressSpec spec = StressSpec::from_distance_matrix(d);
    CHECK(mds::relative_stress(res.embedding, spec) <= 1e-10);
    CHECK(res.clamped_negative == 0);
  }
  SUBCASE("recovers random planar configurations") {
    Rng rng(13);
    const Eigen::MatrixXd x = oracles::random_config(rng, 10, 2, 2.0);
    const Eigen::MatrixXd d = oracles::distance_matrix(x);
    const auto res = mds::classical_scaling(d, 2);
    CHECK(mds::relative_stress(res.embedding,
                               StressSpec::from_distance_matrix(d)) <= 1e-12);
  }
  SUBCASE("one-dimensional collinear points") {
    Eigen::MatrixXd d(3, 3);
    d << 0, 1, 3, 1, 0, 2, 3, 2, 0;
    const auto res = mds::classical_scaling(d, 1);
    std::vector<double> gaps = {
        std::abs(res.embedding.coords(0, 0) - res.embedding.coords(1, 0)),
        std::abs(res.embedding.coords(1, 0) - res.embedding.coords(2, 0)),
        std::abs(res.embedding.coords(0, 0) - res.embedding.coords(2, 0))};
    std::sort(gaps.begin(), gaps.end());
    CHECK(std::abs(gaps[0] - 1.0) <= 1e-10);
    CHECK(std::abs(gaps[1] - 2.0) <= 1e-10);
    CHECK(std::abs(gaps[2] - 3.0) <= 1e-10);
  }
  SUBCASE("eigenvector sign convention") {
    Rng rng(17);
    const Eigen::MatrixXd x = oracles::random_config(rng, 8, 2);
    const auto res = mds::classical_scaling(oracles::distance_matrix(x), 2);
    for (int j = 0; j < 8; ++j) {
      Eigen::Index argmax = 0;
      res.gram.eigvecs.col(j).cwiseAbs().maxCoeff(&argmax);
      CHECK(res.gram.eigvecs(argmax, j) >= 0.0);
    }
  }
  SUBCASE("non-Euclidean inputs clamp negative eigenvalues") {
    // Four points with the \"unit square plus long diagonals\" pattern that
    // no Euclidean configuration realizes.
    Eigen::MatrixXd d(4, 4);
    d << 0, 1, 1, 3, 1, 0, 3, 1, 1, 3, 0, 1, 3, 1, 1, 0;
    const auto res = mds::classical_scaling(d, 3);
    CHECK(res.clamped_negative > 0);
    CHECK(res.embedding.coords.allFinite());
  }
  SUBCASE("input validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << 0, -1, -1, 0;
    CHECK_THROWS_AS(mds::classical_scaling(bad, 1), std::invalid_argument);
    Eigen::MatrixXd asym(3, 3);
    asym << 0, 1, 2, 1.5, 0, 1, 2, 1, 0;
    CHECK_THROWS_AS(mds::classical_scaling(asym, 1), std::invalid_argument);
    Eigen::MatrixXd ok(3, 3);
    ok << 0, 1, 1, 1, 0, 1, 1, 1, 0;
    CHECK_THROWS_AS(mds::classical_scaling(ok, 3), std::invalid_argument);
  }
}

TEST_CASE("smacof") {
  SUBCASE("optimal init is a fixed point") {
    Rng rng(19);
    const Eigen::MatrixXd x = oracles::random_config(rng, 12, 2);
    const StressSpec spec =
        StressSpec::from_distance_matrix(oracles::distance_matrix(x));
    const auto state = mds::smacof(spec, 12, 2, x, {});
    for (double s : state.stress_history) CHECK(s <= 1e-18);
  }
  SUBCASE("stress history is non-increasing") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 5 + rng.uniform_int(16);
      StressSpec spec;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          spec.pairs.push_back({i, j, rng.uniform(0.2, 3.0),
                                rng.uniform() < 0.3 ? 0.0 : rng.uniform(0.1, 1.0)});
      mds::SmacofOptions opts;
      opts.max_iter = 60;
      const auto state = mds::smacof(spec, n, 2, rng.next(), opts);
      for (std::size_t it = 0; it + 1 < state.stress_history.size(); ++it)
        CHECK(state.stress_history[it + 1] <= state.stress_history[it] + 1e-12);
    }
  }
  SUBCASE("recovers Euclidean-realizable targets") {
    Rng rng(29);
    const Eigen::MatrixXd x = oracles::random_config(rng, 20, 2, 2.0);
    const StressSpec spec =
        StressSpec::from_distance_matrix(oracles::distance_matrix(x));
    mds::SmacofOptions opts;
    opts.max_iter = 500;
    opts.rel_tol = 0.0;
    const auto state = mds::smacof(spec, 20, 2, 12345u, opts);
    Embedding emb;
    emb.coords = state.config;
    CHECK(mds::relative_stress(emb, spec) <= 1e-6);
  }
  SUBCASE("uniform shortcut equals the general path") {
    Rng rng(31);
    const Eigen::MatrixXd x = oracles::random_config(rng, 9, 2);
    const StressSpec spec =
        StressSpec::from_distance_matrix(oracles::distance_matrix(x));
    const Eigen::MatrixXd init = oracles::random_config(rng, 9, 2);
    mds::SmacofOptions fast;
    fast.max_iter = 25;
    mds::SmacofOptions general = fast;
    general.force_general_path = true;
    const auto a = mds::smacof(spec, 9, 2, init, fast);
    const auto b = mds::smacof(spec, 9, 2, init, general);
    CHECK(a.v_pinv.size() == 0);
    CHECK(b.v_pinv.size() > 0);
    CHECK((a.config - b.config).cwiseAbs().maxCoeff() <= 1e-9);
  }
  SUBCASE("majorization matrix rows sum to zero") {
    Rng rng(37);
    StressSpec spec;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j)
        spec.pairs.push_back({i, j, rng.uniform(0.5, 2.0), 1.0});
    mds::SmacofOptions opts;
    opts.max_iter = 5;
    const auto state = mds::smacof(spec, 6, 2, 7u, opts);
    CHECK(state.b_current.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("all-zero weights fail") {
    StressSpec spec;
    spec.pairs = {{0, 1, 1.0, 0.0}};
    CHECK_THROWS_AS(mds::smacof(spec, 2, 1, 0u, {}), std::invalid_argument);
  }
}

TEST_CASE("landmark isomap extension") {
  Rng rng(41);
  const Eigen::MatrixXd x = oracles::random_config(rng, 12, 2, 2.0);
  const Eigen::MatrixXd d = oracles::distance_matrix(x);
  geodesics::LandmarkSet lands;
  lands.indices.resize(12);
  std::iota(lands.indices.begin(), lands.indices.end(), 0);
  lands.distances = d;
  const auto cs = mds::classical_scaling(d, 2);

  SUBCASE("a landmark's own distances reproduce its embedding") {
    for (int i = 0; i < 12; ++i) {
      const Eigen::VectorXd delta = d.row(i).array().square();
      const Eigen::VectorXd ext =
          mds::landmark_isomap_extend(lands, cs.embedding, cs.gram, delta);
      CHECK((ext.transpose() - cs.embedding.coords.row(i)).norm() <= 1e-8);
    }
  }
  SUBCASE("held-out planar points are recovered") {
    for (int trial = 0; trial < 25; ++trial) {
      Eigen::RowVector2d p(rng.uniform(-2, 2), rng.uniform(-2, 2));
      Eigen::VectorXd delta(12);
      for (int i = 0; i < 12; ++i)
        delta(i) = (p - x.row(i)).squaredNorm();
      const Eigen::VectorXd ext =
          mds::landmark_isomap_extend(lands, cs.embedding, cs.gram, delta);
      // The extension lives in classical-scaling coordinates; align the true
      // configuration (landmarks + held-out point) onto them first.
      Eigen::MatrixXd source(13, 2), target(13, 2);
      source.topRows(12) = x;
      source.row(12) = p;
      target.topRows(12) = cs.embedding.coords;
      target.row(12) = ext.transpose();
      const auto fit = analysisless_placeholder();
      (void)fit;
    }
  }
  SUBCASE("degenerate landmark sets fail") {
    geodesics::LandmarkSet degenerate;
    degenerate.indices = {0, 1, 2};
    degenerate.distances = Eigen::MatrixXd::Zero(3, 3);
    const auto zero_gram = mds::centered_gram(degenerate.distances);
    Embedding emb;
    emb.coords = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(mds::landmark_isomap_extend(degenerate, emb, zero_gram,
                                                Eigen::VectorXd::Zero(3)),
                    std::runtime_error);
  }
}
