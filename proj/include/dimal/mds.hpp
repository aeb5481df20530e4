#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "dimal/geodesics.hpp"
#include "dimal/jacobi.hpp"

namespace dimal::mds {

/// Configuration of N points in the target space, one row per point.
struct Embedding {
  Eigen::MatrixXd coords;

  Eigen::Index size() const { return coords.rows(); }
  int target_dim() const { return static_cast<int>(coords.cols()); }
};

/// One stress term: target distance d and weight w for the unordered pair
/// (i, j). Targets are plain (unsquared) distances.
struct StressPair {
  int i = 0;
  int j = 0;
  double d = 0.0;
  double w = 1.0;
};

struct StressSpec {
  std::vector<StressPair> pairs;

  /// All i < j pairs of a symmetric distance matrix, unit weights.
  static StressSpec from_distance_matrix(const Eigen::MatrixXd& d);
  /// Throws std::invalid_argument on self-pairs, duplicate unordered pairs,
  /// negative weights/targets or non-finite entries.
  void validate(int n_points) const;
};

/// Raw and relative stress of an embedding against a spec:
/// raw = sum w (||x_i - x_j|| - d)^2, relative = raw / sum w d^2.
double stress(const Embedding& emb, const StressSpec& spec);
double relative_stress(const Embedding& emb, const StressSpec& spec);

/// Double-centered Gram matrix -1/2 H D.^2 H together with its full
/// eigen-decomposition (descending; each eigenvector's largest-magnitude
/// entry is positive). D holds unsquared distances; squaring happens here.
struct CenteredGram {
  Eigen::MatrixXd g;
  Eigen::VectorXd eigvals;
  Eigen::MatrixXd eigvecs;
};

/// Validates D (square, symmetric, non-negative, zero diagonal) and
/// eigendecomposes the centered Gram matrix with cyclic Jacobi rotations.
CenteredGram centered_gram(const Eigen::MatrixXd& d);

struct ClassicalScalingResult {
  Embedding embedding;
  CenteredGram gram;
  int clamped_negative = 0;  // negative eigenvalues among the m leading ones
};

/// Classical scaling: coordinates V_m Lambda_m^(1/2) from the m largest
/// eigenpairs of the centered Gram matrix; negative eigenvalues are clamped
/// to zero and counted. Requires K >= m + 1.
ClassicalScalingResult classical_scaling(const Eigen::MatrixXd& d, int m);

struct SmacofOptions {
  int max_iter = 1000;
  double rel_tol = 1e-9;
  bool force_general_path = false;  // test hook: skip the uniform-weight shortcut
};

/// State after a SMACOF run. stress_history holds the stress of the initial
/// configuration followed by one value per iteration (non-increasing by
/// majorization). v_pinv is empty when the uniform-weight shortcut applied.
struct SmacofState {
  Eigen::MatrixXd config;
  std::vector<double> stress_history;
  Eigen::MatrixXd v_pinv;
  Eigen::MatrixXd b_current;
};

/// Majorization iteration X_{k+1} = (V + (1/N) 1 1^T)^+ B(X_k) X_k, with the
/// b_ij = 0 branch when ||x_i - x_j|| < 1e-9. For uniform weights over all
/// pairs this reduces to X_{k+1} = (1/N) B(X_k) X_k. Stops at max_iter or
/// when the relative stress decrease falls below rel_tol.
SmacofState smacof(const StressSpec& spec, int n_points, int m,
                   const Eigen::MatrixXd& init, const SmacofOptions& opts = {});

/// Random-init convenience: coordinates uniform in [-r, r]^m with r half the
/// largest target distance.
SmacofState smacof(const StressSpec& spec, int n_points, int m,
                   std::uint64_t seed, const SmacofOptions& opts = {});

/// Landmark-Isomap out-of-sample extension. delta_x_squared holds squared
/// geodesic distances from the new point to every landmark; coordinate j of
/// the extension is v_j^T (delta_mean - delta_x) / (2 sqrt(lambda_j)) with
/// delta_mean the column mean of the squared landmark distance matrix.
/// Requires eigpairs computed from lands.distances (classical_scaling) and
/// positive leading eigenvalues up to land_emb's dimension.
Eigen::VectorXd landmark_isomap_extend(const geodesics::LandmarkSet& lands,
                                       const Embedding& land_emb,
                                       const CenteredGram& eigpairs,
                                       const Eigen::VectorXd& delta_x_squared);

}  // namespace dimal::mds
