#include "dimal/mds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "dimal/parallel.hpp"
#include "dimal/random.hpp"

namespace dimal::mds {

namespace {

constexpr double kCoincidenceEps = 1e-9;  // b_ij = 0 branch threshold

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

struct StressTotals {
  double raw = 0.0;
  double normalizer = 0.0;
};

StressTotals stress_totals(const Embedding& emb, const StressSpec& spec) {
  const auto& x = emb.coords;
  const int n = static_cast<int>(x.rows());
  // Fixed chunking keeps the summation order independent of the thread count.
  constexpr std::int64_t kChunk = 8192;
  const std::int64_t num_pairs = static_cast<std::int64_t>(spec.pairs.size());
  const std::int64_t num_chunks = (num_pairs + kChunk - 1) / kChunk;
  std::vector<StressTotals> partial(static_cast<std::size_t>(num_chunks));
  parallel_chunks(num_pairs, kChunk,
                  [&](std::int64_t c, std::int64_t b, std::int64_t e) {
                    StressTotals acc;
                    for (std::int64_t p = b; p < e; ++p) {
                      const auto& pr = spec.pairs[static_cast<std::size_t>(p)];
                      if (pr.i < 0 || pr.i >= n || pr.j < 0 || pr.j >= n)
                        throw std::invalid_argument("stress: index out of range");
                      const double dist = (x.row(pr.i) - x.row(pr.j)).norm();
                      const double r = dist - pr.d;
                      acc.raw += pr.w * r * r;
                      acc.normalizer += pr.w * pr.d * pr.d;
                    }
                    partial[static_cast<std::size_t>(c)] = acc;
                  });
  StressTotals total;
  for (const auto& acc : partial) {
    total.raw += acc.raw;
    total.normalizer += acc.normalizer;
  }
  return total;
}

}  // namespace

StressSpec StressSpec::from_distance_matrix(const Eigen::MatrixXd& d) {
  require(d.rows() == d.cols(), "from_distance_matrix: matrix not square");
  StressSpec spec;
  const int n = static_cast<int>(d.rows());
  spec.pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      spec.pairs.push_back({i, j, d(i, j), 1.0});
  return spec;
}

void StressSpec::validate(int n_points) const {
  std::unordered_set<std::int64_t> seen;
  seen.reserve(pairs.size());
  for (const auto& p : pairs) {
    require(p.i >= 0 && p.i < n_points && p.j >= 0 && p.j < n_points,
            "StressSpec: index out of range");
    require(p.i != p.j, "StressSpec: self-pair");
    require(std::isfinite(p.d) && p.d >= 0.0, "StressSpec: bad target distance");
    require(std::isfinite(p.w) && p.w >= 0.0, "StressSpec: bad weight");
    const std::int64_t key =
        static_cast<std::int64_t>(std::min(p.i, p.j)) * n_points +
        std::max(p.i, p.j);
    require(seen.insert(key).second, "StressSpec: duplicate pair");
  }
}

double stress(const Embedding& emb, const StressSpec& spec) {
  return stress_totals(emb, spec).raw;
}

double relative_stress(const Embedding& emb, const StressSpec& spec) {
  const StressTotals t = stress_totals(emb, spec);
  if (t.normalizer == 0.0)
    return t.raw == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return t.raw / t.normalizer;
}

CenteredGram centered_gram(const Eigen::MatrixXd& d) {
  const Eigen::Index n = d.rows();
  require(n == d.cols(), "centered_gram: matrix not square");
  require(n >= 1, "centered_gram: empty matrix");
  const double scale = d.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    require(std::abs(d(i, i)) <= 1e-12 * std::max(1.0, scale),
            "centered_gram: nonzero diagonal");
    for (Eigen::Index j = 0; j < n; ++j) {
      require(std::isfinite(d(i, j)) && d(i, j) >= 0.0,
              "centered_gram: distances must be finite and non-negative");
      require(std::abs(d(i, j) - d(j, i)) <= 1e-9 * std::max(1.0, scale),
              "centered_gram: matrix not symmetric");
    }
  }

  const Eigen::MatrixXd sq = d.array().square().matrix();
  const Eigen::VectorXd row_mean = sq.rowwise().mean();
  const double grand_mean = row_mean.mean();

  CenteredGram cg;
  cg.g.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cg.g(i, j) = -0.5 * (sq(i, j) - row_mean(i) - row_mean(j) + grand_mean);
  cg.g = 0.5 * (cg.g + cg.g.transpose()).eval();  // pin exact symmetry

  SymmetricEigen eig = jacobi_eigen(cg.g);
  cg.eigvals = std::move(eig.values);
  cg.eigvecs = std::move(eig.vectors);
  // Sign convention: the largest-magnitude entry of each eigenvector is
  // positive (first occurrence wins on exact ties).
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index argmax = 0;
    cg.eigvecs.col(j).cwiseAbs().maxCoeff(&argmax);
    if (cg.eigvecs(argmax, j) < 0.0) cg.eigvecs.col(j) = -cg.eigvecs.col(j);
  }
  return cg;
}

ClassicalScalingResult classical_scaling(const Eigen::MatrixXd& d, int m) {
  require(m >= 1, "classical_scaling: target dimension must be >= 1");
  require(d.rows() >= m + 1, "classical_scaling: need at least m + 1 points");

  ClassicalScalingResult res;
  res.gram = centered_gram(d);
  const Eigen::Index n = d.rows();
  res.embedding.coords = Eigen::MatrixXd::Zero(n, m);
  for (int j = 0; j < m; ++j) {
    const double lambda = res.gram.eigvals(j);
    if (lambda > 0.0)
      res.embedding.coords.col(j) = std::sqrt(lambda) * res.gram.eigvecs.col(j);
    else if (lambda < 0.0)
      ++res.clamped_negative;
  }
  return res;
}

namespace {

/// B(X) entries per the stress majorization: b_ij = -w d / ||x_i - x_j|| off
/// the diagonal (zero for coincident points), diagonal is the negated row sum.
Eigen::MatrixXd majorization_b(const StressSpec& spec, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : spec.pairs) {
    const double dist = (x.row(p.i) - x.row(p.j)).norm();
    if (dist < kCoincidenceEps) continue;
    const double value = -p.w * p.d / dist;
    b(p.i, p.j) = value;
    b(p.j, p.i) = value;
    b(p.i, p.i) -= value;
    b(p.j, p.j) -= value;
  }
  return b;
}

bool uniform_complete_weights(const StressSpec& spec, int n, double* w_out) {
  if (spec.pairs.empty()) return false;
  const double w = spec.pairs.front().w;
  if (w <= 0.0) return false;
  if (static_cast<std::int64_t>(spec.pairs.size()) !=
      static_cast<std::int64_t>(n) * (n - 1) / 2)
    return false;
  for (const auto& p : spec.pairs)
    if (p.w != w) return false;
  *w_out = w;
  return true;
}

}  // namespace

SmacofState smacof(const StressSpec& spec, int n_points, int m,
                   const Eigen::MatrixXd& init, const SmacofOptions& opts) {
  require(n_points >= 2, "smacof: need at least 2 points");
  require(m >= 1, "smacof: target dimension must be >= 1");
  spec.validate(n_points);
  require(init.rows() == n_points && init.cols() == m,
          "smacof: init shape mismatch");
  require(init.allFinite(), "smacof: init must be finite");
  double weight_sum = 0.0;
  for (const auto& p : spec.pairs) weight_sum += p.w;
  if (weight_sum <= 0.0) throw std::invalid_argument("smacof: all-zero weights");

  SmacofState state;
  state.config = init;

  double uniform_w = 0.0;
  const bool uniform = !opts.force_general_path &&
                       uniform_complete_weights(spec, n_points, &uniform_w);
  if (!uniform) {
    // (V + (1/N) 1 1^T)^+ via the Jacobi eigensolver, computed once.
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n_points, n_points);
    for (const auto& p : spec.pairs) {
      v(p.i, p.j) -= p.w;
      v(p.j, p.i) -= p.w;
      v(p.i, p.i) += p.w;
      v(p.j, p.j) += p.w;
    }
    v.array() += 1.0 / n_points;
    SymmetricEigen eig = jacobi_eigen(v);
    const double cutoff = 1e-12 * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
    Eigen::VectorXd inv = eig.values;
    for (Eigen::Index i = 0; i < inv.size(); ++i)
      inv(i) = std::abs(inv(i)) > cutoff ? 1.0 / inv(i) : 0.0;
    state.v_pinv = eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
  }

  Embedding emb;
  emb.coords = state.config;
  double prev = stress(emb, spec);
  state.stress_history.push_back(prev);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    state.b_current = majorization_b(spec, state.config);
    if (uniform)
      state.config =
          (state.b_current * state.config) / (uniform_w * n_points);
    else
      state.config = state.v_pinv * (state.b_current * state.config);

    emb.coords = state.config;
    const double cur = stress(emb, spec);
    state.stress_history.push_back(cur);
    if (prev == 0.0 || (prev - cur) < opts.rel_tol * prev) break;
    prev = cur;
  }
  return state;
}

SmacofState smacof(const StressSpec& spec, int n_points, int m,
                   std::uint64_t seed, const SmacofOptions& opts) {
  double max_d = 0.0;
  for (const auto& p : spec.pairs) max_d = std::max(max_d, p.d);
  const double r = max_d > 0.0 ? 0.5 * max_d : 1.0;
  Rng rng(seed);
  Eigen::MatrixXd init(n_points, m);
  for (int i = 0; i < n_points; ++i)
    for (int j = 0; j < m; ++j) init(i, j) = rng.uniform(-r, r);
  return smacof(spec, n_points, m, init, opts);
}

Eigen::VectorXd landmark_isomap_extend(const geodesics::LandmarkSet& lands,
                                       const Embedding& land_emb,
                                       const CenteredGram& eigpairs,
                                       const Eigen::VectorXd& delta_x_squared) {
  const int K = lands.size();
  const int m = land_emb.target_dim();
  require(K >= 1 && land_emb.size() == K,
          "landmark_isomap_extend: landmark embedding size mismatch");
  require(eigpairs.eigvals.size() == K,
          "landmark_isomap_extend: eigenpairs do not match landmark set");
  require(delta_x_squared.size() == K,
          "landmark_isomap_extend: delta vector size mismatch");
  require(delta_x_squared.allFinite() && delta_x_squared.minCoeff() >= 0.0,
          "landmark_isomap_extend: squared distances must be finite and >= 0");
  for (int j = 0; j < m; ++j)
    if (!(eigpairs.eigvals(j) > 0.0))
      throw std::runtime_error(
          "landmark_isomap_extend: non-positive leading eigenvalue "
          "(degenerate landmark set)");

  const Eigen::MatrixXd sq = lands.distances.array().square().matrix();
  const Eigen::VectorXd delta_mean = sq.colwise().mean().transpose();
  const Eigen::VectorXd diff = delta_mean - delta_x_squared;
  Eigen::VectorXd out(m);
  for (int j = 0; j < m; ++j)
    out(j) = eigpairs.eigvecs.col(j).dot(diff) /
             (2.0 * std::sqrt(eigpairs.eigvals(j)));
  return out;
}

}  // namespace dimal::mds
