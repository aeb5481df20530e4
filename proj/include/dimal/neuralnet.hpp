#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace dimal::nn {

struct DenseSpec {
  int in = 0;
  int out = 0;
};

/// Valid (no-padding) 2D convolution over planar (c, h, w) inputs.
struct Conv2dSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec>;

/// Layered map F: R^M -> R^m. Every layer except the last is followed by a
/// PReLU activation, max(0,z) + a*min(0,z), with one learnable slope a per
/// activation layer; the final layer is linear.
struct NetworkSpec {
  std::vector<int> input_shape;  // {dim} or {channels, height, width}
  std::vector<LayerSpec> layers;

  static NetworkSpec mlp(int in, const std::vector<int>& hidden, int out);
};

struct TensorShape {
  int c = 1;
  int h = 1;
  int w = 1;
  std::int64_t flat() const {
    return static_cast<std::int64_t>(c) * h * w;
  }
};

struct LayerLayout {
  TensorShape in_shape;
  TensorShape out_shape;
  std::int64_t w_offset = 0;
  std::int64_t w_count = 0;
  std::int64_t b_offset = 0;
  std::int64_t b_count = 0;
  std::int64_t prelu_offset = -1;  // -1 on the final (linear) layer
};

struct NetworkLayout {
  TensorShape input;
  std::vector<LayerLayout> layers;
  std::int64_t total = 0;
  int output_dim = 0;
};

/// Validates layer chaining and computes parameter offsets; throws
/// std::invalid_argument on incompatible shapes.
NetworkLayout analyze(const NetworkSpec& spec);

std::int64_t param_count(const NetworkSpec& spec);

/// Flat parameter vector; the layout is defined by analyze(spec):
/// per layer weights then biases, followed by the layer's PReLU slope.
struct NetworkParams {
  std::vector<double> values;
};

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), zero biases,
/// PReLU slopes 0.25.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

enum class LossKind { kStress, kHinge };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Training pair: rows a and b of the shared input matrix, their target
/// geodesic distance, and the binary neighbor label used by the hinge loss.
struct PairRecord {
  int a = 0;
  int b = 0;
  double distance = 0.0;
  int label = 1;
};

struct PairDataset {
  Eigen::MatrixXd inputs;  // one row per distinct sample
  std::vector<PairRecord> pairs;
};

struct TrainConfig {
  int iterations = 1000;
  double learning_rate = 0.01;
  double beta1 = 0.95;
  double beta2 = 0.99;
  int restarts = 5;
  LossKind loss = LossKind::kStress;
  double margin = 1.0;  // hinge only
  std::uint64_t seed = 0;

  void validate() const;
};

/// Forward pass of a single input (must match the spec's input shape).
Eigen::VectorXd forward(const NetworkParams& params, const NetworkSpec& spec,
                        const Eigen::VectorXd& x);

/// Row-wise forward pass, parallel across rows. Each row goes through the
/// same single-sample path as forward(), so results never depend on which
/// rows are batched together.
Eigen::MatrixXd forward_all(const NetworkParams& params, const NetworkSpec& spec,
                            const Eigen::MatrixXd& rows);

struct PairGradResult {
  double loss = 0.0;
  NetworkParams grad;
};

/// Loss and analytic parameter gradient of one Siamese pair with shared
/// weights (both arms' contributions summed). Stress loss:
/// (||F(x1) - F(x2)|| - d)^2. Hinge loss: label * ||F1 - F2|| +
/// (1 - label) * max(0, margin - ||F1 - F2||). The norm's gradient is taken
/// as zero when the arm outputs are closer than 1e-9.
PairGradResult pair_loss_and_grad(const NetworkParams& params,
                                  const NetworkSpec& spec,
                                  const Eigen::VectorXd& x1,
                                  const Eigen::VectorXd& x2, double distance,
                                  int label, LossKind kind, double margin);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// Standard ADAM update with bias correction, eps = 1e-8; t is 1-based.
void adam_step(NetworkParams& params, const std::vector<double>& grad,
               AdamState& state, int t, const TrainConfig& cfg);

struct TrainResult {
  NetworkParams best_params;
  int best_restart = -1;
  /// Per restart: full-batch loss before every iteration plus the final loss
  /// after the last update (iterations + 1 entries when converged).
  std::vector<std::vector<double>> histories;
  std::vector<char> failed;  // divergence flags, matching histories
};

/// Full-batch Siamese training with cfg.restarts seeded initializations;
/// returns the restart with the lowest final training loss. Deterministic
/// given cfg.seed. Restarts whose loss leaves [0, 1e12] or turns non-finite
/// are marked failed and excluded; throws when every restart failed.
TrainResult train_siamese(const NetworkSpec& spec, const PairDataset& pairs,
                          const TrainConfig& cfg);

/// Central-difference validation of the analytic gradient over every
/// parameter coordinate (or a 256-coordinate random subset for nets with
/// more than 400 parameters). Returns the max relative error with
/// denominator max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const NetworkSpec& spec,
                               const Eigen::VectorXd& x1,
                               const Eigen::VectorXd& x2, double distance,
                               int label, LossKind kind, double margin,
                               double h, std::uint64_t seed);

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shared-parameter batch evaluator: forwards every distinct input once and
/// backpropagates accumulated pair gradients, which is algebraically the sum
/// of pair_loss_and_grad over all pairs. Used by train_siamese; exposed for
/// consistency tests.
class BatchEngine {
 public:
  BatchEngine(const NetworkSpec& spec, Eigen::MatrixXd inputs);

  const RowMajorMatrix& forward_batch(const NetworkParams& params);
  double loss_and_grad(const NetworkParams& params,
                       const std::vector<PairRecord>& pairs, LossKind kind,
                       double margin, std::vector<double>& grad);
  double loss_only(const NetworkParams& params,
                   const std::vector<PairRecord>& pairs, LossKind kind,
                   double margin);

  const NetworkLayout& layout() const { return layout_; }

 private:
  double pair_terms(const std::vector<PairRecord>& pairs, LossKind kind,
                    double margin, RowMajorMatrix* dout);

  NetworkSpec spec_;
  NetworkLayout layout_;
  Eigen::Index batch_ = 0;
  std::vector<RowMajorMatrix> acts_;  // acts_[l] = input of layer l; back() = output
  std::vector<RowMajorMatrix> pre_;   // pre-activations, per layer
  std::vector<RowMajorMatrix> im2col_;  // per layer; empty for dense layers
  RowMajorMatrix dout_;
};

// Model serialization: one JSON document holding the spec and the flat
// parameter vector.
nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const NetworkSpec& spec,
                const NetworkParams& params);
std::pair<NetworkSpec, NetworkParams> load_model(
    const std::filesystem::path& path);

}  // namespace dimal::nn
