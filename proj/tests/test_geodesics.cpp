#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dimal/geodesics.hpp"
#include "oracles.hpp"

using namespace dimal;
using geometry::Edge;
using geometry::NeighborGraph;

namespace {

NeighborGraph path_graph(int n, double w = 1.0) {
  std::vector<Edge> edges;
  for (int v = 0; v + 1 < n; ++v) edges.push_back({v, v + 1, w});
  return NeighborGraph::build(n, 1, std::move(edges));
}

}  // namespace

TEST_CASE("dijkstra basics") {
  const auto g = path_graph(3);
  const auto field = geodesics::dijkstra_from(g, 0);
  CHECK(field.dist[0] == 0.0);
  CHECK(field.dist[1] == 1.0);
  CHECK(field.dist[2] == 2.0);

  const auto disconnected = NeighborGraph::build(2, 0, {});
  const auto far = geodesics::dijkstra_from(disconnected, 0);
  CHECK(far.dist[1] == geodesics::kUnreachable);

  CHECK_THROWS_AS(geodesics::dijkstra_from(g, -1), std::invalid_argument);
  CHECK_THROWS_AS(geodesics::dijkstra_from(g, 3), std::invalid_argument);
}

TEST_CASE("dijkstra equals floyd-warshall on random graphs") {
  Rng rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + rng.uniform_int(36);
    const auto g = oracles::random_connected_graph(rng, n, n);
    const Eigen::MatrixXd reference = oracles::floyd_warshall(g);
    const int source = rng.uniform_int(n);
    const auto field = geodesics::dijkstra_from(g, source);
    for (int j = 0; j < n; ++j)
      CHECK(std::abs(field.dist[j] - reference(source, j)) <= 1e-12);
  }
}

TEST_CASE("farthest point sampling") {
  SUBCASE("path endpoints come first") {
    const auto g = path_graph(10);
    const auto lands = geodesics::farthest_point_sampling(g, 2, 0);
    CHECK(lands.indices == std::vector<int>{0, 9});
    CHECK(lands.distances(0, 1) == 9.0);
  }
  SUBCASE("ties break toward the lowest index") {
    const auto g = path_graph(10);
    const auto lands = geodesics::farthest_point_sampling(g, 3, 0);
    // After {0, 9} the running distance peaks at 4 for nodes 4 and 5.
    CHECK(lands.indices == std::vector<int>{0, 9, 4});
  }
  SUBCASE("K = N is a permutation") {
    Rng rng(23);
    const auto g = oracles::random_connected_graph(rng, 12, 10);
    const auto lands = geodesics::farthest_point_sampling(g, 12, 3);
    std::vector<int> sorted = lands.indices;
    std::sort(sorted.begin(), sorted.end());
    for (int v = 0; v < 12; ++v) CHECK(sorted[static_cast<std::size_t>(v)] == v);
  }
  SUBCASE("coverage radius is non-increasing in K") {
    Rng rng(29);
    const auto g = oracles::random_connected_graph(rng, 30, 40);
    const Eigen::MatrixXd reference = oracles::floyd_warshall(g);
    double prev = std::numeric_limits<double>::infinity();
    for (int K = 1; K <= 30; K += 3) {
      const auto lands = geodesics::farthest_point_sampling(g, K, 7);
      double radius = 0.0;
      for (int v = 0; v < 30; ++v) {
        double best = std::numeric_limits<double>::infinity();
        for (int l : lands.indices) best = std::min(best, reference(v, l));
        radius = std::max(radius, best);
      }
      CHECK(radius <= prev + 1e-12);
      prev = radius;
    }
  }
  SUBCASE("deterministic for fixed inputs") {
    Rng rng(31);
    const auto g = oracles::random_connected_graph(rng, 25, 30);
    const auto a = geodesics::farthest_point_sampling(g, 8, -1, 99);
    const auto b = geodesics::farthest_point_sampling(g, 8, -1, 99);
    CHECK(a.indices == b.indices);
    CHECK(a.distances == b.distances);
  }
  SUBCASE("disconnected graphs advise a larger k") {
    const auto g = NeighborGraph::build(4, 1, {{0, 1, 1.0}, {2, 3, 1.0}});
    CHECK_THROWS_WITH_AS(geodesics::farthest_point_sampling(g, 2, 0),
                         doctest::Contains("larger k"), std::runtime_error);
  }
  SUBCASE("K out of range") {
    const auto g = path_graph(4);
    CHECK_THROWS_AS(geodesics::farthest_point_sampling(g, 0, 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(geodesics::farthest_point_sampling(g, 5, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("landmark geodesics") {
  SUBCASE("single landmark") {
    const auto g = path_graph(5);
    const auto lands = geodesics::landmark_geodesics(g, {2});
    REQUIRE(lands.distances.rows() == 1);
    CHECK(lands.distances(0, 0) == 0.0);
  }
  SUBCASE("path endpoints") {
    const auto g = path_graph(5);
    const auto lands = geodesics::landmark_geodesics(g, {0, 4});
    CHECK(lands.distances(0, 1) == 4.0);
    CHECK(lands.distances(1, 0) == 4.0);
  }
  SUBCASE("matches the floyd-warshall submatrix") {
    Rng rng(37);
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = oracles::random_connected_graph(rng, 25, 30);
      const Eigen::MatrixXd reference = oracles::floyd_warshall(g);
      std::vector<int> indices = {1, 5, 9, 14, 22};
      const auto lands = geodesics::landmark_geodesics(g, indices);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
          CHECK(std::abs(lands.distances(i, j) -
                         reference(indices[static_cast<std::size_t>(i)],
                                   indices[static_cast<std::size_t>(j)])) <=
                1e-12);
    }
  }
  SUBCASE("symmetry and triangle inequality") {
    Rng rng(41);
    const auto g = oracles::random_connected_graph(rng, 30, 45);
    const auto lands = geodesics::landmark_geodesics(g, {0, 3, 7, 12, 19, 28});
    const auto& d = lands.distances;
    CHECK((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const int K = lands.size();
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k)
          CHECK(d(i, j) <= d(i, k) + d(k, j) + 1e-9);
  }
  SUBCASE("validation") {
    const auto g = path_graph(5);
    CHECK_THROWS_AS(geodesics::landmark_geodesics(g, {0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(geodesics::landmark_geodesics(g, {5}),
                    std::invalid_argument);
    const auto split = NeighborGraph::build(4, 1, {{0, 1, 1.0}, {2, 3, 1.0}});
    CHECK_THROWS_AS(geodesics::landmark_geodesics(split, {0, 3}),
                    std::runtime_error);
  }
}

TEST_CASE("conformal rescaling") {
  SUBCASE("uniform spacing rescales globally") {
    geometry::PointCloud cloud;
    cloud.points.resize(6, 1);
    cloud.points << 0, 1, 2, 3, 4, 5;
    const auto g = geometry::build_knn_graph(cloud, 1);
    const auto rescaled = geodesics::conformal_rescale(g, cloud, 1);
    REQUIRE(rescaled.edges.size() == g.edges.size());
    // With k = 1 every point's nearest neighbor sits at distance 1, so all
    // weights divide by the same factor and the shortest-path tree is intact.
    for (std::size_t e = 0; e < g.edges.size(); ++e)
      CHECK(std::abs(rescaled.edges[e].w - g.edges[e].w) <= 1e-12);
  }
  SUBCASE("duplicates are reported") {
    geometry::PointCloud cloud;
    cloud.points.resize(3, 2);
    cloud.points << 0, 0, 0, 0, 1, 1;
    const auto g = geometry::build_knn_graph(cloud, 1);
    CHECK_THROWS_WITH_AS(geodesics::conformal_rescale(g, cloud, 1),
                         doctest::Contains("duplicate"), std::runtime_error);
  }
  SUBCASE("dense clusters gain relative weight") {
    // A tight cluster plus a coarse line; M(i) computed directly per point.
    geometry::PointCloud cloud;
    cloud.points.resize(8, 2);
    cloud.points << 0.0, 0.0, 0.05, 0.0, 0.0, 0.05, 0.05, 0.05,  // cluster
        2.0, 0.0, 3.0, 0.0, 4.0, 0.0, 5.0, 0.0;                  // line
    const auto g = geometry::build_knn_graph(cloud, 2);
    const auto rescaled = geodesics::conformal_rescale(g, cloud, 2);
    double cluster_ratio = 0.0, line_ratio = 0.0;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto& edge = g.edges[e];
      const double ratio = rescaled.edges[e].w / edge.w;
      if (edge.i <= 3 && edge.j <= 3) cluster_ratio = std::max(cluster_ratio, ratio);
      if (edge.i >= 4 && edge.j >= 4) line_ratio = std::max(line_ratio, ratio);
    }
    CHECK(cluster_ratio > line_ratio);
  }
  SUBCASE("commutes with global scaling") {
    Rng rng(47);
    geometry::PointCloud cloud;
    cloud.points = oracles::random_config(rng, 30, 3);
    const auto g = geometry::build_knn_graph(cloud, 4);
    const auto base = geodesics::conformal_rescale(g, cloud, 4);

    geometry::PointCloud scaled;
    scaled.points = 3.7 * cloud.points;
    const auto g2 = geometry::build_knn_graph(scaled, 4);
    const auto rescaled = geodesics::conformal_rescale(g2, scaled, 4);
    REQUIRE(base.edges.size() == rescaled.edges.size());
    for (std::size_t e = 0; e < base.edges.size(); ++e)
      CHECK(std::abs(base.edges[e].w - rescaled.edges[e].w) <= 1e-10);
  }
}
