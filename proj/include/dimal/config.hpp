#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dimal/geometry.hpp"
#include "dimal/neuralnet.hpp"

namespace dimal::config {

/// Invalid configuration; what() carries the offending field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// One dataset block. The key set is the union over all generators; only the
/// fields relevant to the active generator are consulted.
struct DatasetConfig {
  std::string generator = "s_curve";  // s_curve | helical_ribbon | swiss_roll
                                      // | horizon | fishbowl | image_dir
  int n = 2000;
  double omega1 = 2.0;
  double omega2 = 7.0;
  int width = 50;
  int height = 50;
  geometry::Rect alpha_range;
  double rim_fraction = 1.0;
  std::string path;       // image_dir
  bool grayscale = true;  // image_dir
};

/// Declarative description of one experiment run; parses from a single JSON
/// document with unknown keys rejected. All defaults are explicit in
/// `config dump-defaults`.
struct RunConfig {
  std::string experiment = "dimal";  // dimal | compare | generalization
                                     // | order_of_accuracy
  std::string output_dir = "out";
  int threads = 0;  // 0 = machine parallelism

  DatasetConfig dataset;
  std::optional<DatasetConfig> test_dataset;  // generalization only

  // graph block
  int graph_k = 10;
  bool conformal = false;
  int conformal_k = 0;  // 0 = graph_k

  // sampling block; the seed drives dataset generation and landmark sampling
  int num_landmarks = 100;
  int initial_landmark = -1;
  std::uint64_t sampling_seed = 1;

  nn::NetworkSpec model;
  nn::TrainConfig training;

  // evaluation block
  std::string stress_mode = "sampled";  // sampled | all_pairs
  std::int64_t sample_pairs = 200000;
  std::vector<std::string> methods = {"dimal"};
  std::vector<int> k_sweep;

  static RunConfig defaults();
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Parses a config file; throws ConfigError with a line/field diagnostic.
RunConfig load_config(const std::string& path);

// Sub-seed derivation from sampling_seed (documented so runs can be
// reproduced piecewise).
std::uint64_t dataset_seed(const RunConfig& cfg);
std::uint64_t test_dataset_seed(const RunConfig& cfg);
std::uint64_t fps_seed(const RunConfig& cfg);
std::uint64_t evaluation_seed(const RunConfig& cfg);

/// Builds the dataset described by a block (generators are seeded; image
/// directories are loaded from disk).
geometry::PointCloud build_dataset(const DatasetConfig& dc, std::uint64_t seed);

}  // namespace dimal::config
