#include "dimal/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_set>

#include "dimal/parallel.hpp"
#include "dimal/random.hpp"

namespace dimal::geodesics {

using geometry::NeighborGraph;
using geometry::PointCloud;

GeodesicField dijkstra_from(const NeighborGraph& graph, int source) {
  const int n = graph.num_nodes;
  if (source < 0 || source >= n)
    throw std::invalid_argument("dijkstra_from: source out of range");

  GeodesicField field;
  field.source = source;
  field.dist = Eigen::VectorXd::Constant(n, kUnreachable);
  field.dist[source] = 0.0;

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > field.dist[v]) continue;  // stale entry
    for (int e = graph.offsets[v]; e < graph.offsets[v + 1]; ++e) {
      const int u = graph.targets[e];
      const double cand = d + graph.weights[e];
      if (cand < field.dist[u]) {
        field.dist[u] = cand;
        heap.emplace(cand, u);
      }
    }
  }
  return field;
}

Eigen::MatrixXd geodesics_from(const NeighborGraph& graph,
                               const std::vector<int>& sources) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(sources.size()),
                       graph.num_nodes);
  parallel_for(static_cast<std::int64_t>(sources.size()),
               [&](std::int64_t b, std::int64_t e) {
                 for (std::int64_t s = b; s < e; ++s)
                   rows.row(s) =
                       dijkstra_from(graph, sources[static_cast<std::size_t>(s)])
                           .dist.transpose();
               });
  return rows;
}

namespace {

Eigen::MatrixXd symmetric_landmark_matrix(const Eigen::MatrixXd& rows,
                                          const std::vector<int>& indices,
                                          const char* who) {
  const int K = static_cast<int>(indices.size());
  Eigen::MatrixXd d(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) d(i, j) = rows(i, indices[static_cast<std::size_t>(j)]);
  for (int i = 0; i < K; ++i) {
    if (!std::isfinite(d.row(i).maxCoeff()))
      throw std::runtime_error(std::string(who) +
                               ": landmark pair unreachable; the graph is "
                               "disconnected (try a larger k)");
    d(i, i) = 0.0;
  }
  // Identical on undirected graphs up to roundoff; averaging pins symmetry.
  return 0.5 * (d + d.transpose());
}

}  // namespace

LandmarkSet farthest_point_sampling(const NeighborGraph& graph, int K,
                                    int initial, std::uint64_t seed) {
  const int n = graph.num_nodes;
  if (K < 1 || K > n)
    throw std::invalid_argument(
        "farthest_point_sampling: K must satisfy 1 <= K <= N");
  if (initial >= n)
    throw std::invalid_argument("farthest_point_sampling: initial out of range");
  if (initial < 0) initial = Rng(seed).uniform_int(n);

  LandmarkSet lands;
  lands.indices.reserve(static_cast<std::size_t>(K));
  Eigen::MatrixXd rows(K, n);

  lands.indices.push_back(initial);
  rows.row(0) = dijkstra_from(graph, initial).dist.transpose();
  if (!std::isfinite(rows.row(0).maxCoeff()))
    throw std::runtime_error(
        "farthest_point_sampling: graph is disconnected (try a larger k)");

  Eigen::VectorXd min_dist = rows.row(0).transpose();
  for (int step = 1; step < K; ++step) {
    int best = 0;
    double best_d = min_dist[0];
    for (int v = 1; v < n; ++v)
      if (min_dist[v] > best_d) {  // strict: ties keep the lowest index
        best_d = min_dist[v];
        best = v;
      }
    lands.indices.push_back(best);
    rows.row(step) = dijkstra_from(graph, best).dist.transpose();
    min_dist = min_dist.cwiseMin(rows.row(step).transpose());
  }

  lands.distances =
      symmetric_landmark_matrix(rows, lands.indices, "farthest_point_sampling");
  return lands;
}

LandmarkSet landmark_geodesics(const NeighborGraph& graph,
                               const std::vector<int>& indices) {
  std::unordered_set<int> seen;
  for (int idx : indices) {
    if (idx < 0 || idx >= graph.num_nodes)
      throw std::invalid_argument("landmark_geodesics: index out of range");
    if (!seen.insert(idx).second)
      throw std::invalid_argument("landmark_geodesics: duplicate landmark index");
  }
  if (indices.empty())
    throw std::invalid_argument("landmark_geodesics: empty landmark list");

  LandmarkSet lands;
  lands.indices = indices;
  const Eigen::MatrixXd rows = geodesics_from(graph, indices);
  lands.distances =
      symmetric_landmark_matrix(rows, lands.indices, "landmark_geodesics");
  return lands;
}

geometry::NeighborGraph conformal_rescale(const NeighborGraph& graph,
                                          const PointCloud& cloud, int k) {
  const int n = static_cast<int>(cloud.size());
  if (n != graph.num_nodes)
    throw std::invalid_argument(
        "conformal_rescale: cloud and graph sizes differ");
  if (k < 1 || k >= n)
    throw std::invalid_argument("conformal_rescale: k must satisfy 1 <= k < N");

  // M(i) = mean Euclidean distance from point i to its k nearest neighbors.
  const Eigen::MatrixXd& x = cloud.points;
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::VectorXd scale(n);
  parallel_for(
      n,
      [&](std::int64_t b, std::int64_t e) {
        std::vector<double> d2(static_cast<std::size_t>(n));
        for (std::int64_t i = b; i < e; ++i) {
          Eigen::Map<Eigen::VectorXd> d2v(d2.data(), n);
          d2v = sq.array() + sq(i) - 2.0 * (x * x.row(i).transpose()).array();
          d2[static_cast<std::size_t>(i)] = kUnreachable;  // exclude self
          std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
          double mean = 0.0;
          for (int s = 0; s < k; ++s)
            mean += std::sqrt(std::max(0.0, d2[static_cast<std::size_t>(s)]));
          scale(i) = mean / k;
        }
      },
      64);

  for (int i = 0; i < n; ++i)
    if (scale(i) <= 0.0)
      throw std::runtime_error(
          "conformal_rescale: point " + std::to_string(i) +
          " has zero mean neighbor distance (duplicate points)");

  std::vector<geometry::Edge> edges = graph.edges;
  for (auto& e : edges) e.w /= std::sqrt(scale(e.i) * scale(e.j));
  return NeighborGraph::build(graph.num_nodes, graph.k, std::move(edges));
}

}  // namespace dimal::geodesics
