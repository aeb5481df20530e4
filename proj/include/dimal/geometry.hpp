#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dimal::geometry {

/// N samples in ambient dimension M, one row per sample. meta carries
/// per-point ground-truth parameters (e.g. the articulation pair) and is
/// empty (N x 0) when the source has none.
struct PointCloud {
  Eigen::MatrixXd points;
  Eigen::MatrixXd meta;
  std::vector<std::string> meta_names;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index ambient_dim() const { return points.cols(); }
  bool has_meta() const { return meta.cols() > 0; }
};

/// Articulation parameters of one horizon image plus raster geometry.
/// The image is I(u,v) = 1 iff v <= alpha1*sin(omega1*u) + alpha2*sin(omega2*u),
/// sampled at pixel centers with u in [0, 2pi), v in [-2, 2], and flattened
/// row-major with rows ordered by increasing v.
struct HorizonParams {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double omega1 = 2.0;
  double omega2 = 7.0;
  int width = 50;
  int height = 50;
};

/// Axis-aligned rectangle of articulation amplitudes.
struct Rect {
  double a1_lo = 0.0;
  double a1_hi = 1.0;
  double a2_lo = 0.0;
  double a2_hi = 1.0;
};

struct Edge {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

/// Sparse weighted undirected graph over samples. Edges are stored once in
/// canonical (i < j) order; the CSR arrays view the symmetrized edge set.
struct NeighborGraph {
  int num_nodes = 0;
  int k = 0;
  std::vector<Edge> edges;

  std::vector<int> offsets;  // num_nodes + 1
  std::vector<int> targets;
  std::vector<double> weights;

  /// Canonicalizes, deduplicates and validates the edge list, then builds
  /// the CSR adjacency. Throws std::invalid_argument on bad edges.
  static NeighborGraph build(int num_nodes, int k, std::vector<Edge> edges);

  bool connected() const;
  std::size_t degree(int node) const {
    return static_cast<std::size_t>(offsets[node + 1] - offsets[node]);
  }
};

// Dataset generators. All are deterministic in (inputs, seed); two calls with
// identical arguments produce bit-identical clouds.

/// Standard S-curve: t ~ U[-3pi/2, 3pi/2], y ~ U[0, 2],
/// point = (sin t, y, sign(t)(cos t - 1)). meta columns (t, y).
PointCloud gen_s_curve(int n, std::uint64_t seed);

/// Helical ribbon: t ~ U[0, 4pi], s ~ U[0, 1],
/// point = (cos t, sin t, 0.4 t + s). meta columns (t, s). The surface is
/// developable and flattens to a parallelogram.
PointCloud gen_helical_ribbon(int n, std::uint64_t seed);

/// Swiss roll: t ~ U[3pi/2, 9pi/2], y ~ U[0, 20],
/// point = (t cos t, y, t sin t). meta columns (t, y).
PointCloud gen_swiss_roll(int n, std::uint64_t seed);

/// Renders the binary image described by hp, flattened row-major, values
/// exactly 0 or 1.
Eigen::VectorXd horizon_image(const HorizonParams& hp);

/// Renders a width x height binary image from per-column horizon heights
/// psi (size width). Shared rasterization core of horizon_image; exposed so
/// the pointwise monotonicity of the indicator can be checked directly.
Eigen::VectorXd render_horizon_columns(const std::vector<double>& psi,
                                       int width, int height);

/// n horizon images with (alpha1, alpha2) drawn uniformly from alpha_range;
/// raster geometry and frequencies come from hp. meta columns (alpha1, alpha2).
PointCloud gen_horizon_dataset(int n, const HorizonParams& hp,
                               const Rect& alpha_range, std::uint64_t seed);

/// Conformal fishbowl: (a, b) uniform on the unit disk mapped through the
/// inverse stereographic projection onto the unit sphere (lower bowl,
/// z in [-1, 0]); keeps points with z <= rim_fraction - 1, i.e. the lower
/// rim_fraction of the bowl height. Sampling density grows toward the rim.
/// meta columns (a, b).
PointCloud gen_fishbowl(int n, double rim_fraction, std::uint64_t seed);

/// Loads every PNG in path (sorted by filename) as one flattened row with
/// pixel values scaled to [0, 1]. grayscale collapses color inputs to one
/// channel; otherwise RGB planes are stored planar (c, h, w). All images
/// must share identical dimensions.
PointCloud load_image_directory(const std::filesystem::path& path,
                                bool grayscale = true);

/// Exact k-nearest-neighbor graph under the Euclidean metric, symmetrized by
/// union. Edge weights are the exact pairwise distances.
NeighborGraph build_knn_graph(const PointCloud& cloud, int k);

/// Writes points as CSV plus, when meta is present, a JSON sidecar
/// `<path>.meta.json` with columns and rows.
void save_point_cloud(const std::filesystem::path& csv_path,
                      const PointCloud& cloud);

}  // namespace dimal::geometry
