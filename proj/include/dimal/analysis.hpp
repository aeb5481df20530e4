#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dimal/geodesics.hpp"
#include "dimal/geometry.hpp"
#include "dimal/mds.hpp"
#include "dimal/neuralnet.hpp"

namespace dimal::analysis {

using Report = nlohmann::json;

/// Power-law fit E = C h^P with h = 1 / sqrt(K): least squares of
/// log E = log C + P log h over the given (K, E) samples.
struct AccuracyFit {
  std::vector<std::pair<int, double>> samples;
  double slope = 0.0;    // P
  double log_c = 0.0;    // log C
  double r_squared = 0.0;
};

AccuracyFit order_of_accuracy(const std::vector<std::pair<int, double>>& runs);

enum class StressMode { kAllPairs, kSampled };

struct StressEvalOptions {
  StressMode mode = StressMode::kSampled;
  std::int64_t pair_count = 200000;  // sampled mode only
  std::uint64_t seed = 0;
};

struct StressResult {
  double relative = 0.0;
  double raw = 0.0;
  double normalizer = 0.0;
  std::int64_t pair_count = 0;
};

/// Stress of an embedding against graph geodesics. All-pairs mode runs one
/// Dijkstra per source; sampled mode evaluates a seeded uniform subset of
/// distinct pairs (and falls back to all pairs when pair_count covers them).
StressResult stress_eval(const mds::Embedding& emb,
                         const geometry::NeighborGraph& graph,
                         const StressEvalOptions& opts = {});

/// Relative variant of stress_eval (the reported quantity).
double full_stress(const mds::Embedding& emb,
                   const geometry::NeighborGraph& graph,
                   const StressEvalOptions& opts = {});

/// Knobs shared by the experiment drivers; covers graph construction,
/// landmark sampling, the network, training, and stress evaluation.
struct PipelineOptions {
  int k_nn = 10;
  int num_landmarks = 100;
  int initial_landmark = -1;  // < 0: chosen from seed
  bool conformal = false;
  int conformal_k = 0;  // 0: use k_nn
  std::uint64_t seed = 0;
  nn::NetworkSpec network;
  nn::TrainConfig training;
  StressEvalOptions evaluation;
};

/// All-landmark-pair training set: inputs are the landmark rows of the cloud,
/// one record per unordered landmark pair carrying its geodesic distance.
/// With hinge_labels, a pair is labeled 1 iff its endpoints share a graph
/// edge (the kNN-adjacency reconstruction of the contrastive baseline).
nn::PairDataset landmark_pair_dataset(const geometry::PointCloud& cloud,
                                      const geometry::NeighborGraph& graph,
                                      const geodesics::LandmarkSet& lands,
                                      bool hinge_labels);

struct DimalRun {
  nn::NetworkParams params;
  mds::Embedding embedding;  // all N points
  geodesics::LandmarkSet landmarks;
  nn::TrainResult training;
  Report report;
};

/// The full pipeline: kNN graph (optionally conformally rescaled), farthest
/// point sampling, landmark geodesics, Siamese training on all landmark
/// pairs, and a forward pass of every point.
DimalRun run_dimal(const geometry::PointCloud& cloud,
                   const PipelineOptions& opts);

struct GeneralizationRun {
  nn::NetworkParams params;
  geodesics::LandmarkSet landmarks;
  mds::Embedding dimal_test;
  mds::Embedding liso_test;
  Report report;
};

/// Trains on train_cloud only, then embeds test_cloud two ways: a forward
/// pass (no extra geodesics) and the Landmark-Isomap extension, whose
/// test-to-landmark geodesics run through the union graph of both clouds.
/// Both embeddings are scored against the test cloud's own geodesics.
GeneralizationRun run_generalization(const geometry::PointCloud& train_cloud,
                                     const geometry::PointCloud& test_cloud,
                                     const PipelineOptions& opts);

enum class Method { kDimal, kClassicalFull, kSmacofLandmarks, kLandmarkIsomap };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct MethodRow {
  std::string method;
  int num_landmarks = 0;
  double relative_stress = 0.0;
  double seconds = 0.0;
};

struct Comparison {
  std::vector<MethodRow> rows;
  Report report;
};

/// Runs each requested method on the identical landmark set per K and
/// tabulates relative stress. classical_full embeds the all-pairs geodesic
/// matrix (landmark-independent, cached across Ks); smacof_landmarks has no
/// out-of-sample rule, so its stress covers landmark pairs only (flagged in
/// the report).
Comparison compare_methods(const geometry::PointCloud& cloud,
                           const std::vector<int>& landmark_counts,
                           const std::vector<Method>& methods,
                           const PipelineOptions& opts);

struct ProcrustesResult {
  double rms = 0.0;    // sqrt(mean squared residual) after alignment
  double scale = 1.0;
  Eigen::MatrixXd aligned;
};

/// Aligns source onto target by the best similarity transform
/// (translation + scaling + orthogonal map, reflections allowed).
ProcrustesResult procrustes_similarity(const Eigen::MatrixXd& source,
                                       const Eigen::MatrixXd& target);

}  // namespace dimal::analysis
