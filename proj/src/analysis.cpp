#include "dimal/analysis.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "dimal/parallel.hpp"
#include "dimal/random.hpp"

namespace dimal::analysis {

using geodesics::LandmarkSet;
using geometry::NeighborGraph;
using geometry::PointCloud;

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct PairSums {
  double raw = 0.0;
  double normalizer = 0.0;
};

PairSums accumulate_source(const mds::Embedding& emb,
                           const Eigen::VectorXd& dist, int source,
                           const std::vector<int>* targets) {
  PairSums sums;
  const auto& x = emb.coords;
  if (targets) {
    for (int j : *targets) {
      const double d = dist[j];
      const double r = (x.row(source) - x.row(j)).norm() - d;
      sums.raw += r * r;
      sums.normalizer += d * d;
    }
  } else {
    for (int j = source + 1; j < static_cast<int>(x.rows()); ++j) {
      const double d = dist[j];
      const double r = (x.row(source) - x.row(j)).norm() - d;
      sums.raw += r * r;
      sums.normalizer += d * d;
    }
  }
  return sums;
}

}  // namespace

AccuracyFit order_of_accuracy(const std::vector<std::pair<int, double>>& runs) {
  require(runs.size() >= 3, "order_of_accuracy: need at least 3 runs");
  AccuracyFit fit;
  fit.samples = runs;
  const int n = static_cast<int>(runs.size());
  Eigen::VectorXd xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    require(runs[static_cast<std::size_t>(i)].first >= 1,
            "order_of_accuracy: K must be >= 1");
    require(runs[static_cast<std::size_t>(i)].second > 0.0,
            "order_of_accuracy: stress values must be positive");
    xs(i) = std::log(
        1.0 / std::sqrt(static_cast<double>(runs[static_cast<std::size_t>(i)].first)));
    ys(i) = std::log(runs[static_cast<std::size_t>(i)].second);
  }
  const double x_mean = xs.mean();
  const double y_mean = ys.mean();
  const double sxx = (xs.array() - x_mean).square().sum();
  require(sxx > 0.0, "order_of_accuracy: all K identical");
  const double sxy = ((xs.array() - x_mean) * (ys.array() - y_mean)).sum();
  fit.slope = sxy / sxx;
  fit.log_c = y_mean - fit.slope * x_mean;
  const double ss_tot = (ys.array() - y_mean).square().sum();
  const double ss_res =
      (ys.array() - (fit.log_c + fit.slope * xs.array())).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

StressResult stress_eval(const mds::Embedding& emb, const NeighborGraph& graph,
                         const StressEvalOptions& opts) {
  const int n = graph.num_nodes;
  require(emb.size() == n, "stress_eval: embedding size does not match graph");
  if (!graph.connected())
    throw std::runtime_error("stress_eval: graph is disconnected");

  const std::int64_t total_pairs =
      static_cast<std::int64_t>(n) * (n - 1) / 2;
  const bool all_pairs = opts.mode == StressMode::kAllPairs ||
                         opts.pair_count >= total_pairs;

  StressResult result;
  if (all_pairs) {
    result.pair_count = total_pairs;
    constexpr std::int64_t kChunk = 16;  // sources per chunk
    const std::int64_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<PairSums> partial(static_cast<std::size_t>(chunks));
    parallel_chunks(n, kChunk, [&](std::int64_t c, std::int64_t b, std::int64_t e) {
      PairSums acc;
      for (std::int64_t i = b; i < e; ++i) {
        const auto field = geodesics::dijkstra_from(graph, static_cast<int>(i));
        const PairSums s =
            accumulate_source(emb, field.dist, static_cast<int>(i), nullptr);
        acc.raw += s.raw;
        acc.normalizer += s.normalizer;
      }
      partial[static_cast<std::size_t>(c)] = acc;
    });
    for (const auto& p : partial) {
      result.raw += p.raw;
      result.normalizer += p.normalizer;
    }
  } else {
    require(opts.pair_count >= 1, "stress_eval: pair_count must be >= 1");
    // Seeded uniform subset of distinct pairs, grouped by source.
    Rng rng(opts.seed);
    std::unordered_set<std::int64_t> keys;
    keys.reserve(static_cast<std::size_t>(opts.pair_count) * 2);
    while (static_cast<std::int64_t>(keys.size()) < opts.pair_count) {
      const int i = rng.uniform_int(n);
      const int j = rng.uniform_int(n);
      if (i == j) continue;
      keys.insert(static_cast<std::int64_t>(std::min(i, j)) * n +
                  std::max(i, j));
    }
    std::vector<std::int64_t> sorted(keys.begin(), keys.end());
    std::sort(sorted.begin(), sorted.end());
    result.pair_count = static_cast<std::int64_t>(sorted.size());

    std::vector<int> sources;
    std::vector<std::vector<int>> targets;
    for (std::int64_t key : sorted) {
      const int i = static_cast<int>(key / n);
      const int j = static_cast<int>(key % n);
      if (sources.empty() || sources.back() != i) {
        sources.push_back(i);
        targets.emplace_back();
      }
      targets.back().push_back(j);
    }
    std::vector<PairSums> partial(sources.size());
    parallel_for(static_cast<std::int64_t>(sources.size()),
                 [&](std::int64_t b, std::int64_t e) {
                   for (std::int64_t s = b; s < e; ++s) {
                     const auto field = geodesics::dijkstra_from(
                         graph, sources[static_cast<std::size_t>(s)]);
                     partial[static_cast<std::size_t>(s)] = accumulate_source(
                         emb, field.dist, sources[static_cast<std::size_t>(s)],
                         &targets[static_cast<std::size_t>(s)]);
                   }
                 });
    for (const auto& p : partial) {
      result.raw += p.raw;
      result.normalizer += p.normalizer;
    }
  }
  result.relative = result.normalizer > 0.0
                        ? result.raw / result.normalizer
                        : (result.raw == 0.0
                               ? 0.0
                               : std::numeric_limits<double>::infinity());
  return result;
}

double full_stress(const mds::Embedding& emb, const NeighborGraph& graph,
                   const StressEvalOptions& opts) {
  return stress_eval(emb, graph, opts).relative;
}

nn::PairDataset landmark_pair_dataset(const PointCloud& cloud,
                                      const NeighborGraph& graph,
                                      const LandmarkSet& lands,
                                      bool hinge_labels) {
  const int K = lands.size();
  nn::PairDataset dataset;
  dataset.inputs.resize(K, cloud.ambient_dim());
  for (int i = 0; i < K; ++i)
    dataset.inputs.row(i) = cloud.points.row(lands.indices[static_cast<std::size_t>(i)]);

  std::unordered_set<std::int64_t> adjacency;
  if (hinge_labels) {
    adjacency.reserve(graph.edges.size() * 2);
    for (const auto& e : graph.edges)
      adjacency.insert(static_cast<std::int64_t>(e.i) * graph.num_nodes + e.j);
  }

  dataset.pairs.reserve(static_cast<std::size_t>(K) * (K - 1) / 2);
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      nn::PairRecord rec;
      rec.a = i;
      rec.b = j;
      rec.distance = lands.distances(i, j);
      if (hinge_labels) {
        const int gi = std::min(lands.indices[static_cast<std::size_t>(i)],
                                lands.indices[static_cast<std::size_t>(j)]);
        const int gj = std::max(lands.indices[static_cast<std::size_t>(i)],
                                lands.indices[static_cast<std::size_t>(j)]);
        rec.label = adjacency.count(static_cast<std::int64_t>(gi) *
                                    graph.num_nodes + gj)
                        ? 1
                        : 0;
      }
      dataset.pairs.push_back(rec);
    }
  return dataset;
}

namespace {

NeighborGraph build_pipeline_graph(const PointCloud& cloud,
                                   const PipelineOptions& opts,
                                   const char* who) {
  NeighborGraph graph = geometry::build_knn_graph(cloud, opts.k_nn);
  if (!graph.connected())
    throw std::runtime_error(std::string(who) +
                             ": kNN graph is disconnected; increase k");
  if (opts.conformal) {
    const int ck = opts.conformal_k > 0 ? opts.conformal_k : opts.k_nn;
    graph = geodesics::conformal_rescale(graph, cloud, ck);
  }
  return graph;
}

nlohmann::json training_report(const nn::TrainResult& train, std::size_t pairs) {
  nlohmann::json t;
  t["pairs"] = pairs;
  t["best_restart"] = train.best_restart;
  auto finals = nlohmann::json::array();
  auto failed = nlohmann::json::array();
  for (std::size_t r = 0; r < train.histories.size(); ++r) {
    finals.push_back(train.histories[r].empty() ? nullptr
                                                : nlohmann::json(train.histories[r].back()));
    failed.push_back(static_cast<bool>(train.failed[r]));
  }
  t["final_losses"] = std::move(finals);
  t["failed"] = std::move(failed);
  return t;
}

nlohmann::json stress_report(const StressResult& s, const StressEvalOptions& opts) {
  nlohmann::json j;
  j["relative"] = s.relative;
  j["raw"] = s.raw;
  j["pairs"] = s.pair_count;
  j["mode"] =
      opts.mode == StressMode::kAllPairs ? "all_pairs" : "sampled";
  return j;
}

}  // namespace

DimalRun run_dimal(const PointCloud& cloud, const PipelineOptions& opts) {
  Stopwatch total;
  Stopwatch phase;
  DimalRun run;
  run.report["phase_seconds"] = nlohmann::json::object();

  NeighborGraph graph = build_pipeline_graph(cloud, opts, "run_dimal");
  run.report["phase_seconds"]["knn_graph"] = phase.lap();

  run.landmarks = geodesics::farthest_point_sampling(
      graph, opts.num_landmarks, opts.initial_landmark, opts.seed);
  run.report["phase_seconds"]["sampling"] = phase.lap();

  const bool hinge = opts.training.loss == nn::LossKind::kHinge;
  nn::PairDataset dataset =
      landmark_pair_dataset(cloud, graph, run.landmarks, hinge);
  run.training = nn::train_siamese(opts.network, dataset, opts.training);
  run.params = run.training.best_params;
  run.report["phase_seconds"]["training"] = phase.lap();

  run.embedding.coords = nn::forward_all(run.params, opts.network, cloud.points);
  run.report["phase_seconds"]["inference"] = phase.lap();

  const StressResult stress = stress_eval(run.embedding, graph, opts.evaluation);
  run.report["phase_seconds"]["evaluation"] = phase.lap();

  run.report["n_points"] = cloud.size();
  run.report["ambient_dim"] = cloud.ambient_dim();
  run.report["graph"] = {{"k", opts.k_nn},
                         {"edges", graph.edges.size()},
                         {"conformal", opts.conformal}};
  run.report["landmarks"] = {{"count", run.landmarks.size()},
                             {"initial", run.landmarks.indices.front()},
                             {"indices", run.landmarks.indices}};
  run.report["training"] = training_report(run.training, dataset.pairs.size());
  run.report["stress"] = stress_report(stress, opts.evaluation);
  run.report["total_seconds"] = total.seconds();
  return run;
}

GeneralizationRun run_generalization(const PointCloud& train_cloud,
                                     const PointCloud& test_cloud,
                                     const PipelineOptions& opts) {
  require(train_cloud.ambient_dim() == test_cloud.ambient_dim(),
          "run_generalization: ambient dimensions differ");
  Stopwatch total;
  Stopwatch phase;
  GeneralizationRun run;
  run.report["phase_seconds"] = nlohmann::json::object();

  // Training side sees only train_cloud.
  NeighborGraph train_graph =
      build_pipeline_graph(train_cloud, opts, "run_generalization");
  run.landmarks = geodesics::farthest_point_sampling(
      train_graph, opts.num_landmarks, opts.initial_landmark, opts.seed);
  run.report["phase_seconds"]["train_graph_and_sampling"] = phase.lap();

  const bool hinge = opts.training.loss == nn::LossKind::kHinge;
  nn::PairDataset dataset =
      landmark_pair_dataset(train_cloud, train_graph, run.landmarks, hinge);
  nn::TrainResult train = nn::train_siamese(opts.network, dataset, opts.training);
  run.params = train.best_params;
  run.report["phase_seconds"]["training"] = phase.lap();

  run.dimal_test.coords =
      nn::forward_all(run.params, opts.network, test_cloud.points);
  run.report["phase_seconds"]["dimal_inference"] = phase.lap();

  // Landmark Isomap needs geodesics from unseen points to the landmarks; it
  // gets them through the union graph of both clouds (DIMAL deliberately
  // uses none).
  const int n_train = static_cast<int>(train_cloud.size());
  const int n_test = static_cast<int>(test_cloud.size());
  PointCloud union_cloud;
  union_cloud.points.resize(n_train + n_test, train_cloud.ambient_dim());
  union_cloud.points.topRows(n_train) = train_cloud.points;
  union_cloud.points.bottomRows(n_test) = test_cloud.points;
  NeighborGraph union_graph =
      build_pipeline_graph(union_cloud, opts, "run_generalization(union)");
  const Eigen::MatrixXd to_landmarks =
      geodesics::geodesics_from(union_graph, run.landmarks.indices);
  if (!to_landmarks.allFinite())
    throw std::runtime_error(
        "run_generalization: union graph leaves some test point unreachable");
  run.report["phase_seconds"]["union_geodesics"] = phase.lap();

  const int m = analyze(opts.network).output_dim;
  const mds::ClassicalScalingResult cs =
      mds::classical_scaling(run.landmarks.distances, m);
  run.liso_test.coords.resize(n_test, m);
  parallel_for(n_test, [&](std::int64_t b, std::int64_t e) {
    Eigen::VectorXd delta(run.landmarks.size());
    for (std::int64_t j = b; j < e; ++j) {
      delta = to_landmarks.col(n_train + j).array().square();
      run.liso_test.coords.row(j) =
          mds::landmark_isomap_extend(run.landmarks, cs.embedding, cs.gram, delta)
              .transpose();
    }
  });
  run.report["phase_seconds"]["liso_extension"] = phase.lap();

  // Both methods are scored against the test cloud's own geodesics.
  NeighborGraph test_graph =
      build_pipeline_graph(test_cloud, opts, "run_generalization(test)");
  const StressResult dimal_stress =
      stress_eval(run.dimal_test, test_graph, opts.evaluation);
  const StressResult liso_stress =
      stress_eval(run.liso_test, test_graph, opts.evaluation);
  run.report["phase_seconds"]["evaluation"] = phase.lap();

  run.report["train_n"] = n_train;
  run.report["test_n"] = n_test;
  run.report["landmarks"] = {{"count", run.landmarks.size()},
                             {"initial", run.landmarks.indices.front()},
                             {"indices", run.landmarks.indices}};
  run.report["training"] = training_report(train, dataset.pairs.size());
  run.report["methods"] = {
      {"dimal", stress_report(dimal_stress, opts.evaluation)},
      {"landmark_isomap", stress_report(liso_stress, opts.evaluation)}};
  run.report["total_seconds"] = total.seconds();
  return run;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kDimal: return "dimal";
    case Method::kClassicalFull: return "classical_full";
    case Method::kSmacofLandmarks: return "smacof_landmarks";
    case Method::kLandmarkIsomap: return "landmark_isomap";
  }
  throw std::logic_error("unreachable");
}

Method method_from_string(const std::string& name) {
  if (name == "dimal") return Method::kDimal;
  if (name == "classical_full") return Method::kClassicalFull;
  if (name == "smacof_landmarks") return Method::kSmacofLandmarks;
  if (name == "landmark_isomap") return Method::kLandmarkIsomap;
  throw std::invalid_argument("unknown method: '" + name + "'");
}

Comparison compare_methods(const PointCloud& cloud,
                           const std::vector<int>& landmark_counts,
                           const std::vector<Method>& methods,
                           const PipelineOptions& opts) {
  require(!landmark_counts.empty(), "compare_methods: empty K list");
  require(!methods.empty(), "compare_methods: empty method list");

  Comparison cmp;
  NeighborGraph graph = build_pipeline_graph(cloud, opts, "compare_methods");
  const int m = analyze(opts.network).output_dim;
  const int n = static_cast<int>(cloud.size());

  // classical_full ignores the landmark set; compute once on demand.
  std::optional<std::pair<double, double>> classical_cache;  // stress, seconds
  auto classical_full = [&]() {
    if (!classical_cache) {
      Stopwatch watch;
      std::vector<int> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      const Eigen::MatrixXd d_full = geodesics::geodesics_from(graph, all);
      const mds::ClassicalScalingResult cs =
          mds::classical_scaling(0.5 * (d_full + d_full.transpose()), m);
      const double stress = full_stress(cs.embedding, graph, opts.evaluation);
      classical_cache = {stress, watch.seconds()};
    }
    return *classical_cache;
  };

  for (int K : landmark_counts) {
    const LandmarkSet lands = geodesics::farthest_point_sampling(
        graph, K, opts.initial_landmark, opts.seed);
    for (Method method : methods) {
      Stopwatch watch;
      MethodRow row;
      row.method = to_string(method);
      row.num_landmarks = K;
      switch (method) {
        case Method::kDimal: {
          const bool hinge = opts.training.loss == nn::LossKind::kHinge;
          nn::PairDataset dataset =
              landmark_pair_dataset(cloud, graph, lands, hinge);
          nn::TrainResult train =
              nn::train_siamese(opts.network, dataset, opts.training);
          mds::Embedding emb;
          emb.coords =
              nn::forward_all(train.best_params, opts.network, cloud.points);
          row.relative_stress = full_stress(emb, graph, opts.evaluation);
          break;
        }
        case Method::kClassicalFull: {
          const auto [stress, seconds] = classical_full();
          row.relative_stress = stress;
          row.seconds = seconds;
          break;
        }
        case Method::kSmacofLandmarks: {
          const mds::StressSpec spec =
              mds::StressSpec::from_distance_matrix(lands.distances);
          const mds::SmacofState state = mds::smacof(spec, K, m, opts.seed);
          mds::Embedding emb;
          emb.coords = state.config;
          // No out-of-sample rule: stress covers landmark pairs only.
          row.relative_stress = mds::relative_stress(emb, spec);
          break;
        }
        case Method::kLandmarkIsomap: {
          const mds::ClassicalScalingResult cs =
              mds::classical_scaling(lands.distances, m);
          const Eigen::MatrixXd rows = geodesics::geodesics_from(graph, lands.indices);
          mds::Embedding emb;
          emb.coords.resize(n, m);
          parallel_for(n, [&](std::int64_t b, std::int64_t e) {
            Eigen::VectorXd delta(lands.size());
            for (std::int64_t p = b; p < e; ++p) {
              delta = rows.col(p).array().square();
              emb.coords.row(p) =
                  mds::landmark_isomap_extend(lands, cs.embedding, cs.gram, delta)
                      .transpose();
            }
          });
          row.relative_stress = full_stress(emb, graph, opts.evaluation);
          break;
        }
      }
      if (method != Method::kClassicalFull) row.seconds = watch.seconds();
      cmp.rows.push_back(row);
    }
  }

  auto table = nlohmann::json::array();
  for (const auto& row : cmp.rows)
    table.push_back({{"method", row.method},
                     {"K", row.num_landmarks},
                     {"relative_stress", row.relative_stress},
                     {"seconds", row.seconds}});
  cmp.report["table"] = std::move(table);
  cmp.report["n_points"] = n;
  cmp.report["notes"] = {
      {"smacof_landmarks", "stress over landmark pairs (no extension rule)"}};
  return cmp;
}

ProcrustesResult procrustes_similarity(const Eigen::MatrixXd& source,
                                       const Eigen::MatrixXd& target) {
  require(source.rows() == target.rows() && source.rows() > 0,
          "procrustes_similarity: row counts differ or empty");
  require(source.cols() == target.cols(),
          "procrustes_similarity: dimension mismatch");
  const Eigen::RowVectorXd src_mean = source.colwise().mean();
  const Eigen::RowVectorXd tgt_mean = target.colwise().mean();
  const Eigen::MatrixXd src_c = source.rowwise() - src_mean;
  const Eigen::MatrixXd tgt_c = target.rowwise() - tgt_mean;

  const Eigen::MatrixXd cross = src_c.transpose() * tgt_c;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rotation = svd.matrixU() * svd.matrixV().transpose();

  ProcrustesResult result;
  const double denom = src_c.squaredNorm();
  result.scale = denom > 0.0 ? svd.singularValues().sum() / denom : 0.0;
  result.aligned =
      (result.scale * src_c * rotation).rowwise() + tgt_mean;
  result.rms = std::sqrt((result.aligned - target).squaredNorm() /
                         static_cast<double>(target.rows()));
  return result;
}

}  // namespace dimal::analysis
