#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <vector>

#include "dimal/geometry.hpp"

namespace dimal::geodesics {

/// Distinguished value for unreachable nodes. Checked before any arithmetic;
/// never propagated into a landmark distance matrix.
constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Single-source shortest-path distances over a NeighborGraph.
struct GeodesicField {
  int source = 0;
  Eigen::VectorXd dist;
};

/// K landmark indices in selection order plus their pairwise geodesic
/// distance matrix (symmetric, zero diagonal, graph metric).
struct LandmarkSet {
  std::vector<int> indices;
  Eigen::MatrixXd distances;

  int size() const { return static_cast<int>(indices.size()); }
};

/// Exact Dijkstra from one source; unreachable nodes carry kUnreachable.
GeodesicField dijkstra_from(const geometry::NeighborGraph& graph, int source);

/// One Dijkstra per source, rows in source order (parallel across sources).
Eigen::MatrixXd geodesics_from(const geometry::NeighborGraph& graph,
                               const std::vector<int>& sources);

/// Greedy farthest-point sampling: repeatedly selects the node maximizing the
/// running minimum distance to the selected set, ties broken by lowest index.
/// initial < 0 picks the start node from seed. Returns the landmarks in
/// selection order together with their pairwise geodesic matrix.
LandmarkSet farthest_point_sampling(const geometry::NeighborGraph& graph, int K,
                                    int initial = -1, std::uint64_t seed = 0);

/// Pairwise geodesics between explicit landmark indices; symmetry enforced by
/// averaging the (i,j) and (j,i) Dijkstra results. Throws if any pair is
/// unreachable.
LandmarkSet landmark_geodesics(const geometry::NeighborGraph& graph,
                               const std::vector<int>& indices);

/// C-Isomap conformal rescaling: every edge weight w(i,j) is replaced by
/// w(i,j) / sqrt(M(i) M(j)) with M(i) the mean Euclidean distance from point
/// i to its k nearest neighbors. Throws when some M(i) is zero (duplicates).
geometry::NeighborGraph conformal_rescale(const geometry::NeighborGraph& graph,
                                          const geometry::PointCloud& cloud,
                                          int k);

}  // namespace dimal::geodesics
