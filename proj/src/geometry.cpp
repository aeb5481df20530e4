#include "dimal/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dimal/csv.hpp"
#include "dimal/parallel.hpp"
#include "dimal/random.hpp"

namespace dimal::geometry {

namespace {
constexpr double kPi = std::numbers::pi;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace

NeighborGraph NeighborGraph::build(int num_nodes, int k,
                                   std::vector<Edge> edges) {
  require(num_nodes >= 0, "NeighborGraph: negative node count");
  for (auto& e : edges) {
    require(e.i >= 0 && e.i < num_nodes && e.j >= 0 && e.j < num_nodes,
            "NeighborGraph: edge endpoint out of range");
    require(e.i != e.j, "NeighborGraph: self-loop");
    require(std::isfinite(e.w) && e.w >= 0.0,
            "NeighborGraph: edge weight must be finite and non-negative");
    if (e.i > e.j) std::swap(e.i, e.j);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) {
                            return a.i == b.i && a.j == b.j;
                          }),
              edges.end());

  NeighborGraph g;
  g.num_nodes = num_nodes;
  g.k = k;
  g.edges = std::move(edges);

  std::vector<int> deg(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const auto& e : g.edges) {
    ++deg[static_cast<std::size_t>(e.i) + 1];
    ++deg[static_cast<std::size_t>(e.j) + 1];
  }
  g.offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (int v = 0; v < num_nodes; ++v)
    g.offsets[static_cast<std::size_t>(v) + 1] =
        g.offsets[v] + deg[static_cast<std::size_t>(v) + 1];
  g.targets.resize(g.offsets.back());
  g.weights.resize(g.offsets.back());
  std::vector<int> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (const auto& e : g.edges) {
    g.targets[cursor[e.i]] = e.j;
    g.weights[cursor[e.i]++] = e.w;
    g.targets[cursor[e.j]] = e.i;
    g.weights[cursor[e.j]++] = e.w;
  }
  return g;
}

bool NeighborGraph::connected() const {
  if (num_nodes <= 1) return true;
  std::vector<char> seen(num_nodes, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (int e = offsets[v]; e < offsets[v + 1]; ++e) {
      int u = targets[e];
      if (!seen[u]) {
        seen[u] = 1;
        ++visited;
        frontier.push(u);
      }
    }
  }
  return visited == num_nodes;
}

PointCloud gen_s_curve(int n, std::uint64_t seed) {
  require(n >= 0, "gen_s_curve: n must be >= 0");
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.meta.resize(n, 2);
  cloud.meta_names = {"t", "y"};
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(-1.5 * kPi, 1.5 * kPi);
    const double y = rng.uniform(0.0, 2.0);
    cloud.points(i, 0) = std::sin(t);
    cloud.points(i, 1) = y;
    cloud.points(i, 2) = (t < 0.0 ? -1.0 : 1.0) * (std::cos(t) - 1.0);
    cloud.meta(i, 0) = t;
    cloud.meta(i, 1) = y;
  }
  return cloud;
}

PointCloud gen_helical_ribbon(int n, std::uint64_t seed) {
  require(n >= 0, "gen_helical_ribbon: n must be >= 0");
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.meta.resize(n, 2);
  cloud.meta_names = {"t", "s"};
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(0.0, 4.0 * kPi);
    const double s = rng.uniform(0.0, 1.0);
    cloud.points(i, 0) = std::cos(t);
    cloud.points(i, 1) = std::sin(t);
    cloud.points(i, 2) = 0.4 * t + s;
    cloud.meta(i, 0) = t;
    cloud.meta(i, 1) = s;
  }
  return cloud;
}

PointCloud gen_swiss_roll(int n, std::uint64_t seed) {
  require(n >= 0, "gen_swiss_roll: n must be >= 0");
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.meta.resize(n, 2);
  cloud.meta_names = {"t", "y"};
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform(1.5 * kPi, 4.5 * kPi);
    const double y = rng.uniform(0.0, 20.0);
    cloud.points(i, 0) = t * std::cos(t);
    cloud.points(i, 1) = y;
    cloud.points(i, 2) = t * std::sin(t);
    cloud.meta(i, 0) = t;
    cloud.meta(i, 1) = y;
  }
  return cloud;
}

Eigen::VectorXd render_horizon_columns(const std::vector<double>& psi,
                                       int width, int height) {
  require(width >= 2 && height >= 2, "horizon raster must be at least 2x2");
  require(static_cast<int>(psi.size()) == width,
          "render_horizon_columns: psi size must equal width");
  Eigen::VectorXd img(static_cast<Eigen::Index>(width) * height);
  for (int row = 0; row < height; ++row) {
    const double v = -2.0 + 4.0 * (row + 0.5) / height;
    for (int col = 0; col < width; ++col)
      img(static_cast<Eigen::Index>(row) * width + col) =
          v <= psi[static_cast<std::size_t>(col)] ? 1.0 : 0.0;
  }
  return img;
}

Eigen::VectorXd horizon_image(const HorizonParams& hp) {
  require(hp.alpha1 >= 0.0 && hp.alpha2 >= 0.0,
          "horizon_image: amplitudes must be non-negative");
  require(hp.omega1 != hp.omega2, "horizon_image: omega1 must differ from omega2");
  std::vector<double> psi(static_cast<std::size_t>(hp.width));
  for (int col = 0; col < hp.width; ++col) {
    const double u = 2.0 * kPi * (col + 0.5) / hp.width;
    psi[static_cast<std::size_t>(col)] =
        hp.alpha1 * std::sin(hp.omega1 * u) + hp.alpha2 * std::sin(hp.omega2 * u);
  }
  return render_horizon_columns(psi, hp.width, hp.height);
}

PointCloud gen_horizon_dataset(int n, const HorizonParams& hp,
                               const Rect& alpha_range, std::uint64_t seed) {
  require(n >= 0, "gen_horizon_dataset: n must be >= 0");
  require(hp.omega1 != hp.omega2,
          "gen_horizon_dataset: omega1 must differ from omega2");
  require(std::isfinite(alpha_range.a1_lo) && std::isfinite(alpha_range.a1_hi) &&
              std::isfinite(alpha_range.a2_lo) && std::isfinite(alpha_range.a2_hi),
          "gen_horizon_dataset: alpha_range must be finite");
  require(alpha_range.a1_lo <= alpha_range.a1_hi &&
              alpha_range.a2_lo <= alpha_range.a2_hi,
          "gen_horizon_dataset: alpha_range is empty");

  PointCloud cloud;
  cloud.points.resize(n, static_cast<Eigen::Index>(hp.width) * hp.height);
  cloud.meta.resize(n, 2);
  cloud.meta_names = {"alpha1", "alpha2"};
  Rng rng(seed);
  HorizonParams sample = hp;
  for (int i = 0; i < n; ++i) {
    sample.alpha1 = rng.uniform(alpha_range.a1_lo, alpha_range.a1_hi);
    sample.alpha2 = rng.uniform(alpha_range.a2_lo, alpha_range.a2_hi);
    cloud.points.row(i) = horizon_image(sample).transpose();
    cloud.meta(i, 0) = sample.alpha1;
    cloud.meta(i, 1) = sample.alpha2;
  }
  return cloud;
}

PointCloud gen_fishbowl(int n, double rim_fraction, std::uint64_t seed) {
  require(n >= 0, "gen_fishbowl: n must be >= 0");
  require(rim_fraction > 0.0 && rim_fraction <= 1.0,
          "gen_fishbowl: rim_fraction must lie in (0, 1]");
  PointCloud cloud;
  cloud.points.resize(n, 3);
  cloud.meta.resize(n, 2);
  cloud.meta_names = {"a", "b"};
  Rng rng(seed);
  const double z_cut = rim_fraction - 1.0;
  for (int i = 0; i < n; ++i) {
    for (;;) {
      const double a = rng.uniform(-1.0, 1.0);
      const double b = rng.uniform(-1.0, 1.0);
      const double r2 = a * a + b * b;
      if (r2 > 1.0) continue;
      const double z = (r2 - 1.0) / (r2 + 1.0);
      if (z > z_cut) continue;
      cloud.points(i, 0) = 2.0 * a / (r2 + 1.0);
      cloud.points(i, 1) = 2.0 * b / (r2 + 1.0);
      cloud.points(i, 2) = z;
      cloud.meta(i, 0) = a;
      cloud.meta(i, 1) = b;
      break;
    }
  }
  return cloud;
}

NeighborGraph build_knn_graph(const PointCloud& cloud, int k) {
  const int n = static_cast<int>(cloud.size());
  require(n >= 2, "build_knn_graph: need at least 2 points");
  require(k >= 1 && k < n, "build_knn_graph: k must satisfy 1 <= k < N");

  const Eigen::MatrixXd& x = cloud.points;
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();

  // Per-row k nearest by squared distance, computed block-wise with one GEMM
  // per block; final weights are recomputed as exact norms per selected edge.
  std::vector<std::vector<int>> nearest(static_cast<std::size_t>(n));
  const int block = std::max(1, static_cast<int>((16u << 20) / sizeof(double) /
                                                 static_cast<unsigned>(n)));
  parallel_for(
      n,
      [&](std::int64_t b, std::int64_t e) {
        Eigen::MatrixXd d2;
        std::vector<int> order(static_cast<std::size_t>(n));
        for (std::int64_t r0 = b; r0 < e; r0 += block) {
          const std::int64_t r1 = std::min<std::int64_t>(e, r0 + block);
          const auto rows = x.middleRows(r0, r1 - r0);
          d2 = (-2.0 * rows * x.transpose()).rowwise() + sq.transpose();
          for (std::int64_t i = r0; i < r1; ++i) {
            d2.row(i - r0).array() += sq(i);
            for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
            const auto* row = d2.row(i - r0).data();
            // k+1 smallest; the point itself ranks first (distance ~0).
            std::partial_sort(order.begin(), order.begin() + k + 1, order.end(),
                              [&](int a, int c) {
                                const double da = row[a], dc = row[c];
                                return da != dc ? da < dc : a < c;
                              });
            auto& out = nearest[static_cast<std::size_t>(i)];
            out.reserve(static_cast<std::size_t>(k));
            for (int s = 0; s < k + 1 && static_cast<int>(out.size()) < k; ++s)
              if (order[static_cast<std::size_t>(s)] != static_cast<int>(i))
                out.push_back(order[static_cast<std::size_t>(s)]);
          }
        }
      },
      256);

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
  for (int i = 0; i < n; ++i)
    for (int j : nearest[static_cast<std::size_t>(i)]) {
      Edge e;
      e.i = std::min(i, j);
      e.j = std::max(i, j);
      e.w = (x.row(i) - x.row(j)).norm();
      edges.push_back(e);
    }
  return NeighborGraph::build(n, k, std::move(edges));
}

void save_point_cloud(const std::filesystem::path& csv_path,
                      const PointCloud& cloud) {
  io::write_csv(csv_path, cloud.points);
  if (cloud.has_meta()) {
    nlohmann::json side;
    side["columns"] = cloud.meta_names;
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < cloud.meta.rows(); ++i) {
      auto row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < cloud.meta.cols(); ++j)
        row.push_back(cloud.meta(i, j));
      rows.push_back(std::move(row));
    }
    side["rows"] = std::move(rows);
    std::filesystem::path meta_path = csv_path;
    meta_path += ".meta.json";
    std::ofstream out(meta_path);
    if (!out)
      throw std::runtime_error("cannot open for writing: " + meta_path.string());
    out << side.dump(2) << '\n';
  }
}

}  // namespace dimal::geometry
