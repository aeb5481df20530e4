#include "dimal/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "dimal/parallel.hpp"
#include "dimal/random.hpp"

namespace dimal::nn {

namespace {

constexpr double kNormEps = 1e-9;       // coincident-output threshold
constexpr double kAdamEps = 1e-8;
constexpr double kDivergenceCap = 1e12;

using ConstMatMap = Eigen::Map<const RowMajorMatrix>;
using MatMap = Eigen::Map<RowMajorMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

int conv_extent(int in, int kernel, int stride) {
  return (in - kernel) / stride + 1;
}

/// Gathers valid-convolution patches of one planar (c, h, w) sample into
/// rows of a (out.h*out.w) x (in.c*k*k) block: row = output position,
/// column = (ic, ky, kx). dst must be row-major contiguous.
void im2col_one(const double* sample, const Conv2dSpec& conv,
                const TensorShape& in, const TensorShape& out, double* dst) {
  const int k = conv.kernel;
  const int stride = conv.stride;
  const std::int64_t ickk = static_cast<std::int64_t>(in.c) * k * k;
  const std::int64_t plane = static_cast<std::int64_t>(in.h) * in.w;
  for (int oy = 0; oy < out.h; ++oy)
    for (int ox = 0; ox < out.w; ++ox) {
      double* prow = dst + static_cast<std::int64_t>(oy * out.w + ox) * ickk;
      for (int ic = 0; ic < in.c; ++ic)
        for (int ky = 0; ky < k; ++ky) {
          const double* src =
              sample + ic * plane +
              static_cast<std::int64_t>(oy * stride + ky) * in.w + ox * stride;
          std::copy(src, src + k, prow + (static_cast<std::int64_t>(ic) * k + ky) * k);
        }
    }
}

}  // namespace

NetworkSpec NetworkSpec::mlp(int in, const std::vector<int>& hidden, int out) {
  NetworkSpec spec;
  spec.input_shape = {in};
  int cur = in;
  for (int h : hidden) {
    spec.layers.push_back(DenseSpec{cur, h});
    cur = h;
  }
  spec.layers.push_back(DenseSpec{cur, out});
  return spec;
}

NetworkLayout analyze(const NetworkSpec& spec) {
  NetworkLayout layout;
  if (spec.input_shape.size() == 1) {
    require(spec.input_shape[0] >= 1, "analyze: input dimension must be >= 1");
    layout.input = TensorShape{1, 1, spec.input_shape[0]};
  } else if (spec.input_shape.size() == 3) {
    for (int d : spec.input_shape)
      require(d >= 1, "analyze: input shape entries must be >= 1");
    layout.input =
        TensorShape{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
  } else {
    throw std::invalid_argument(
        "analyze: input_shape must have 1 (flat) or 3 (c,h,w) entries");
  }
  require(!spec.layers.empty(), "analyze: network needs at least one layer");

  TensorShape cur = layout.input;
  std::int64_t offset = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    LayerLayout ll;
    ll.in_shape = cur;
    if (const auto* dense = std::get_if<DenseSpec>(&spec.layers[l])) {
      require(dense->in >= 1 && dense->out >= 1,
              "analyze: dense layer extents must be >= 1");
      require(dense->in == cur.flat(),
              "analyze: dense layer " + std::to_string(l) + " expects input " +
                  std::to_string(dense->in) + " but gets " +
                  std::to_string(cur.flat()));
      ll.out_shape = TensorShape{1, 1, dense->out};
      ll.w_count = static_cast<std::int64_t>(dense->out) * dense->in;
      ll.b_count = dense->out;
    } else {
      const auto& conv = std::get<Conv2dSpec>(spec.layers[l]);
      require(conv.in_channels >= 1 && conv.out_channels >= 1 &&
                  conv.kernel >= 1 && conv.stride >= 1,
              "analyze: conv layer extents must be >= 1");
      require(conv.in_channels == cur.c,
              "analyze: conv layer " + std::to_string(l) + " expects " +
                  std::to_string(conv.in_channels) + " channels but gets " +
                  std::to_string(cur.c));
      require(cur.h >= conv.kernel && cur.w >= conv.kernel,
              "analyze: conv kernel larger than input at layer " +
                  std::to_string(l));
      ll.out_shape = TensorShape{conv.out_channels,
                                 conv_extent(cur.h, conv.kernel, conv.stride),
                                 conv_extent(cur.w, conv.kernel, conv.stride)};
      ll.w_count = static_cast<std::int64_t>(conv.out_channels) *
                   conv.in_channels * conv.kernel * conv.kernel;
      ll.b_count = conv.out_channels;
    }
    ll.w_offset = offset;
    offset += ll.w_count;
    ll.b_offset = offset;
    offset += ll.b_count;
    if (l + 1 < spec.layers.size()) {
      ll.prelu_offset = offset;
      offset += 1;
    }
    cur = ll.out_shape;
    layout.layers.push_back(ll);
  }
  layout.total = offset;
  layout.output_dim = static_cast<int>(cur.flat());
  return layout;
}

std::int64_t param_count(const NetworkSpec& spec) { return analyze(spec).total; }

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  const NetworkLayout layout = analyze(spec);
  NetworkParams params;
  params.values.assign(static_cast<std::size_t>(layout.total), 0.0);
  Rng rng(seed);
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& ll = layout.layers[l];
    double r;
    if (const auto* conv = std::get_if<Conv2dSpec>(&spec.layers[l])) {
      const double k2 = static_cast<double>(conv->kernel) * conv->kernel;
      r = std::sqrt(6.0 / (conv->in_channels * k2 + conv->out_channels * k2));
    } else {
      const auto& dense = std::get<DenseSpec>(spec.layers[l]);
      r = std::sqrt(6.0 / (dense.in + dense.out));
    }
    for (std::int64_t i = 0; i < ll.w_count; ++i)
      params.values[static_cast<std::size_t>(ll.w_offset + i)] =
          rng.uniform(-r, r);
    if (ll.prelu_offset >= 0)
      params.values[static_cast<std::size_t>(ll.prelu_offset)] = 0.25;
  }
  return params;
}

std::string to_string(LossKind kind) {
  return kind == LossKind::kStress ? "stress" : "hinge";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "stress") return LossKind::kStress;
  if (name == "hinge") return LossKind::kHinge;
  throw std::invalid_argument("unknown loss kind: '" + name +
                              "' (expected stress or hinge)");
}

void TrainConfig::validate() const {
  require(iterations >= 0, "TrainConfig: iterations must be >= 0");
  require(learning_rate > 0.0 && std::isfinite(learning_rate),
          "TrainConfig: learning_rate must be positive");
  require(beta1 > 0.0 && beta1 < 1.0, "TrainConfig: beta1 must lie in (0, 1)");
  require(beta2 > 0.0 && beta2 < 1.0, "TrainConfig: beta2 must lie in (0, 1)");
  require(restarts >= 1, "TrainConfig: restarts must be >= 1");
  require(std::isfinite(margin), "TrainConfig: margin must be finite");
}

// ---------------------------------------------------------------------------
// Single-sample path. Every inference call goes through here, so a sample's
// embedding never depends on which other rows happen to be batched with it.

namespace {

Eigen::VectorXd forward_one(const double* p, const NetworkSpec& spec,
                            const NetworkLayout& layout,
                            const Eigen::VectorXd& x) {
  Eigen::VectorXd cur = x;
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& ll = layout.layers[l];
    Eigen::VectorXd z(ll.out_shape.flat());
    if (const auto* dense = std::get_if<DenseSpec>(&spec.layers[l])) {
      ConstMatMap w(p + ll.w_offset, dense->out, dense->in);
      ConstVecMap b(p + ll.b_offset, dense->out);
      z.noalias() = w * cur;
      z += b;
    } else {
      const auto& conv = std::get<Conv2dSpec>(spec.layers[l]);
      const std::int64_t op =
          static_cast<std::int64_t>(ll.out_shape.h) * ll.out_shape.w;
      const std::int64_t ickk = static_cast<std::int64_t>(conv.in_channels) *
                                conv.kernel * conv.kernel;
      RowMajorMatrix patches(op, ickk);
      im2col_one(cur.data(), conv, ll.in_shape, ll.out_shape, patches.data());
      ConstMatMap w(p + ll.w_offset, conv.out_channels, ickk);
      Eigen::MatrixXd y = patches * w.transpose();  // op x oc
      for (int oc = 0; oc < conv.out_channels; ++oc)
        z.segment(oc * op, op) =
            y.col(oc).array() + p[ll.b_offset + oc];
    }
    if (ll.prelu_offset >= 0) {
      const double a = p[ll.prelu_offset];
      cur = z.cwiseMax(0.0) + a * z.cwiseMin(0.0);
    } else {
      cur = std::move(z);
    }
  }
  return cur;
}

}  // namespace

Eigen::VectorXd forward(const NetworkParams& params, const NetworkSpec& spec,
                        const Eigen::VectorXd& x) {
  const NetworkLayout layout = analyze(spec);
  require(static_cast<std::int64_t>(params.values.size()) == layout.total,
          "forward: parameter count mismatch");
  require(x.size() == layout.input.flat(),
          "forward: input size mismatch (expected " +
              std::to_string(layout.input.flat()) + ", got " +
              std::to_string(x.size()) + ")");
  return forward_one(params.values.data(), spec, layout, x);
}

Eigen::MatrixXd forward_all(const NetworkParams& params, const NetworkSpec& spec,
                            const Eigen::MatrixXd& rows) {
  const NetworkLayout layout = analyze(spec);
  require(static_cast<std::int64_t>(params.values.size()) == layout.total,
          "forward_all: parameter count mismatch");
  require(rows.cols() == layout.input.flat() || rows.rows() == 0,
          "forward_all: input width mismatch (expected " +
              std::to_string(layout.input.flat()) + ", got " +
              std::to_string(rows.cols()) + ")");
  Eigen::MatrixXd out(rows.rows(), layout.output_dim);
  parallel_for(rows.rows(), [&](std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i)
      out.row(i) =
          forward_one(params.values.data(), spec, layout, rows.row(i).transpose())
              .transpose();
  });
  return out;
}

// ---------------------------------------------------------------------------
// Batched engine used for training.

BatchEngine::BatchEngine(const NetworkSpec& spec, Eigen::MatrixXd inputs)
    : spec_(spec), layout_(analyze(spec)), batch_(inputs.rows()) {
  require(inputs.cols() == layout_.input.flat(),
          "BatchEngine: input width mismatch (expected " +
              std::to_string(layout_.input.flat()) + ", got " +
              std::to_string(inputs.cols()) + ")");
  require(batch_ >= 1, "BatchEngine: need at least one input row");

  const std::size_t n_layers = spec_.layers.size();
  acts_.resize(n_layers + 1);
  pre_.resize(n_layers);
  im2col_.resize(n_layers);
  acts_[0] = inputs;  // col-major -> row-major copy

  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& ll = layout_.layers[l];
    pre_[l].resize(batch_, ll.out_shape.flat());
    if (const auto* conv = std::get_if<Conv2dSpec>(&spec_.layers[l])) {
      const std::int64_t op =
          static_cast<std::int64_t>(ll.out_shape.h) * ll.out_shape.w;
      const std::int64_t ickk = static_cast<std::int64_t>(conv->in_channels) *
                                conv->kernel * conv->kernel;
      im2col_[l].resize(batch_ * op, ickk);
      if (l == 0) {  // first-layer patches depend only on the fixed inputs
        for (Eigen::Index b = 0; b < batch_; ++b)
          im2col_one(acts_[0].data() + b * acts_[0].cols(), *conv, ll.in_shape,
                     ll.out_shape, im2col_[0].data() + b * op * ickk);
      }
    }
    acts_[l + 1].resize(batch_, ll.out_shape.flat());
  }
}

const RowMajorMatrix& BatchEngine::forward_batch(const NetworkParams& params) {
  require(static_cast<std::int64_t>(params.values.size()) == layout_.total,
          "BatchEngine: parameter count mismatch");
  const double* p = params.values.data();
  for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
    const auto& ll = layout_.layers[l];
    if (const auto* dense = std::get_if<DenseSpec>(&spec_.layers[l])) {
      ConstMatMap w(p + ll.w_offset, dense->out, dense->in);
      ConstVecMap b(p + ll.b_offset, dense->out);
      pre_[l].noalias() = acts_[l] * w.transpose();
      pre_[l].rowwise() += b.transpose();
    } else {
      const auto& conv = std::get<Conv2dSpec>(spec_.layers[l]);
      const std::int64_t op =
          static_cast<std::int64_t>(ll.out_shape.h) * ll.out_shape.w;
      const std::int64_t ickk = static_cast<std::int64_t>(conv.in_channels) *
                                conv.kernel * conv.kernel;
      if (l != 0) {
        for (Eigen::Index b = 0; b < batch_; ++b)
          im2col_one(acts_[l].data() + b * acts_[l].cols(), conv, ll.in_shape,
                     ll.out_shape, im2col_[l].data() + b * op * ickk);
      }
      ConstMatMap w(p + ll.w_offset, conv.out_channels, ickk);
      Eigen::MatrixXd y_col = im2col_[l] * w.transpose();  // (B*op) x oc
      for (Eigen::Index b = 0; b < batch_; ++b)
        for (int oc = 0; oc < conv.out_channels; ++oc)
          pre_[l].row(b).segment(oc * op, op) =
              y_col.col(oc).segment(b * op, op).transpose().array() +
              p[ll.b_offset + oc];
    }
    if (ll.prelu_offset >= 0) {
      const double a = p[ll.prelu_offset];
      acts_[l + 1] = pre_[l].cwiseMax(0.0) + a * pre_[l].cwiseMin(0.0);
    } else {
      acts_[l + 1] = pre_[l];
    }
  }
  return acts_.back();
}

double BatchEngine::pair_terms(const std::vector<PairRecord>& pairs,
                               LossKind kind, double margin,
                               RowMajorMatrix* dout) {
  const RowMajorMatrix& out = acts_.back();
  const int m = layout_.output_dim;
  if (dout) dout->setZero(batch_, m);
  double loss = 0.0;
  Eigen::VectorXd delta(m);
  for (const auto& pr : pairs) {
    delta = (out.row(pr.a) - out.row(pr.b)).transpose();
    const double dist = delta.norm();
    double coef = 0.0;  // d(loss)/d(dist)
    if (kind == LossKind::kStress) {
      const double r = dist - pr.distance;
      loss += r * r;
      coef = 2.0 * r;
    } else if (pr.label == 1) {
      loss += dist;
      coef = 1.0;
    } else if (dist < margin) {
      loss += margin - dist;
      coef = -1.0;
    }
    if (dout && coef != 0.0 && dist >= kNormEps) {
      const double scale = coef / dist;
      dout->row(pr.a) += scale * delta.transpose();
      dout->row(pr.b) -= scale * delta.transpose();
    }
  }
  return loss;
}

double BatchEngine::loss_and_grad(const NetworkParams& params,
                                  const std::vector<PairRecord>& pairs,
                                  LossKind kind, double margin,
                                  std::vector<double>& grad) {
  forward_batch(params);
  const double loss = pair_terms(pairs, kind, margin, &dout_);

  grad.assign(static_cast<std::size_t>(layout_.total), 0.0);
  double* g = grad.data();
  const double* p = params.values.data();

  RowMajorMatrix d = dout_;
  for (std::size_t li = spec_.layers.size(); li-- > 0;) {
    const auto& ll = layout_.layers[li];
    if (ll.prelu_offset >= 0) {
      const double a = p[ll.prelu_offset];
      g[ll.prelu_offset] +=
          (d.array() * pre_[li].array().min(0.0)).sum();
      d = (d.array() *
           ((pre_[li].array() > 0.0).cast<double>() * (1.0 - a) + a))
              .matrix();
    }
    if (const auto* dense = std::get_if<DenseSpec>(&spec_.layers[li])) {
      MatMap dw(g + ll.w_offset, dense->out, dense->in);
      VecMap db(g + ll.b_offset, dense->out);
      dw.noalias() += d.transpose() * acts_[li];
      db += d.colwise().sum().transpose();
      if (li > 0) {
        ConstMatMap w(p + ll.w_offset, dense->out, dense->in);
        RowMajorMatrix dprev(batch_, ll.in_shape.flat());
        dprev.noalias() = d * w;
        d = std::move(dprev);
      }
    } else {
      const auto& conv = std::get<Conv2dSpec>(spec_.layers[li]);
      const std::int64_t op =
          static_cast<std::int64_t>(ll.out_shape.h) * ll.out_shape.w;
      const std::int64_t ickk = static_cast<std::int64_t>(conv.in_channels) *
                                conv.kernel * conv.kernel;
      Eigen::MatrixXd dy_col(batch_ * op, conv.out_channels);
      for (Eigen::Index b = 0; b < batch_; ++b)
        for (int oc = 0; oc < conv.out_channels; ++oc)
          dy_col.col(oc).segment(b * op, op) =
              d.row(b).segment(oc * op, op).transpose();
      MatMap dw(g + ll.w_offset, conv.out_channels, ickk);
      dw.noalias() += dy_col.transpose() * im2col_[li];
      for (int oc = 0; oc < conv.out_channels; ++oc)
        g[ll.b_offset + oc] += dy_col.col(oc).sum();
      if (li > 0) {
        ConstMatMap w(p + ll.w_offset, conv.out_channels, ickk);
        RowMajorMatrix dpatches(batch_ * op, ickk);
        dpatches.noalias() = dy_col * w;
        // col2im scatter-add (windows overlap when stride < kernel)
        RowMajorMatrix dprev = RowMajorMatrix::Zero(batch_, ll.in_shape.flat());
        const std::int64_t plane =
            static_cast<std::int64_t>(ll.in_shape.h) * ll.in_shape.w;
        for (Eigen::Index b = 0; b < batch_; ++b) {
          double* dst = dprev.data() + b * dprev.cols();
          for (int oy = 0; oy < ll.out_shape.h; ++oy)
            for (int ox = 0; ox < ll.out_shape.w; ++ox) {
              const double* src =
                  dpatches.data() +
                  (b * op + static_cast<std::int64_t>(oy) * ll.out_shape.w + ox) *
                      ickk;
              for (int ic = 0; ic < conv.in_channels; ++ic)
                for (int ky = 0; ky < conv.kernel; ++ky) {
                  double* drow = dst + ic * plane +
                                 static_cast<std::int64_t>(oy * conv.stride + ky) *
                                     ll.in_shape.w +
                                 static_cast<std::int64_t>(ox) * conv.stride;
                  const double* srow =
                      src + (static_cast<std::int64_t>(ic) * conv.kernel + ky) *
                                conv.kernel;
                  for (int kx = 0; kx < conv.kernel; ++kx) drow[kx] += srow[kx];
                }
            }
        }
        d = std::move(dprev);
      }
    }
  }
  return loss;
}

double BatchEngine::loss_only(const NetworkParams& params,
                              const std::vector<PairRecord>& pairs,
                              LossKind kind, double margin) {
  forward_batch(params);
  return pair_terms(pairs, kind, margin, nullptr);
}

// ---------------------------------------------------------------------------

PairGradResult pair_loss_and_grad(const NetworkParams& params,
                                  const NetworkSpec& spec,
                                  const Eigen::VectorXd& x1,
                                  const Eigen::VectorXd& x2, double distance,
                                  int label, LossKind kind, double margin) {
  require(x1.size() == x2.size(), "pair_loss_and_grad: arm input sizes differ");
  require(std::isfinite(distance) && distance >= 0.0,
          "pair_loss_and_grad: target distance must be finite and >= 0");
  require(label == 0 || label == 1, "pair_loss_and_grad: label must be 0 or 1");
  Eigen::MatrixXd inputs(2, x1.size());
  inputs.row(0) = x1.transpose();
  inputs.row(1) = x2.transpose();
  BatchEngine engine(spec, std::move(inputs));
  PairGradResult result;
  result.loss = engine.loss_and_grad(params, {{0, 1, distance, label}}, kind,
                                     margin, result.grad.values);
  return result;
}

void adam_step(NetworkParams& params, const std::vector<double>& grad,
               AdamState& state, int t, const TrainConfig& cfg) {
  require(t >= 1, "adam_step: t is 1-based");
  require(grad.size() == params.values.size(), "adam_step: size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.values.size(), 0.0);
    state.v.assign(params.values.size(), 0.0);
  }
  require(state.m.size() == params.values.size(), "adam_step: stale state");

  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params.values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

TrainResult train_siamese(const NetworkSpec& spec, const PairDataset& dataset,
                          const TrainConfig& cfg) {
  cfg.validate();
  require(!dataset.pairs.empty(), "train_siamese: empty pair dataset");
  const int rows = static_cast<int>(dataset.inputs.rows());
  for (const auto& pr : dataset.pairs) {
    require(pr.a >= 0 && pr.a < rows && pr.b >= 0 && pr.b < rows,
            "train_siamese: pair index out of range");
    require(pr.a != pr.b, "train_siamese: pair references one sample twice");
    require(std::isfinite(pr.distance) && pr.distance >= 0.0,
            "train_siamese: bad target distance");
    if (cfg.loss == LossKind::kHinge)
      require(pr.label == 0 || pr.label == 1,
              "train_siamese: hinge loss needs binary labels");
  }

  BatchEngine engine(spec, dataset.inputs);
  TrainResult result;
  result.histories.resize(static_cast<std::size_t>(cfg.restarts));
  result.failed.assign(static_cast<std::size_t>(cfg.restarts), 0);

  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> grad;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    NetworkParams params = init_params(spec, mix_seed(cfg.seed, restart));
    AdamState adam;
    auto& history = result.histories[static_cast<std::size_t>(restart)];
    history.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
    bool ok = true;
    for (int t = 1; t <= cfg.iterations; ++t) {
      const double loss =
          engine.loss_and_grad(params, dataset.pairs, cfg.loss, cfg.margin, grad);
      history.push_back(loss);
      if (!std::isfinite(loss) || loss > kDivergenceCap) {
        ok = false;
        break;
      }
      adam_step(params, grad, adam, t, cfg);
    }
    if (ok) {
      const double final_loss =
          engine.loss_only(params, dataset.pairs, cfg.loss, cfg.margin);
      history.push_back(final_loss);
      if (!std::isfinite(final_loss) || final_loss > kDivergenceCap) ok = false;
      if (ok && final_loss < best_loss) {
        best_loss = final_loss;
        result.best_params = std::move(params);
        result.best_restart = restart;
      }
    }
    result.failed[static_cast<std::size_t>(restart)] = ok ? 0 : 1;
  }
  if (result.best_restart < 0)
    throw std::runtime_error("train_siamese: every restart diverged");
  return result;
}

double finite_difference_check(const NetworkSpec& spec,
                               const Eigen::VectorXd& x1,
                               const Eigen::VectorXd& x2, double distance,
                               int label, LossKind kind, double margin,
                               double h, std::uint64_t seed) {
  require(h > 0.0, "finite_difference_check: h must be positive");
  NetworkParams params = init_params(spec, seed);
  Eigen::MatrixXd inputs(2, x1.size());
  inputs.row(0) = x1.transpose();
  inputs.row(1) = x2.transpose();
  BatchEngine engine(spec, std::move(inputs));
  const std::vector<PairRecord> pair = {{0, 1, distance, label}};

  std::vector<double> analytic;
  engine.loss_and_grad(params, pair, kind, margin, analytic);

  const std::int64_t total = static_cast<std::int64_t>(params.values.size());
  std::vector<std::int64_t> coords(static_cast<std::size_t>(total));
  std::iota(coords.begin(), coords.end(), 0);
  if (total > 400) {
    Rng rng(mix_seed(seed, 0xfd));
    for (std::size_t i = 0; i < coords.size(); ++i)
      std::swap(coords[i], coords[static_cast<std::size_t>(
                               i + rng.uniform_int(static_cast<int>(
                                       coords.size() - i)))]);
    coords.resize(256);
  }

  double max_rel = 0.0;
  for (std::int64_t c : coords) {
    const double saved = params.values[static_cast<std::size_t>(c)];
    params.values[static_cast<std::size_t>(c)] = saved + h;
    const double up = engine.loss_only(params, pair, kind, margin);
    params.values[static_cast<std::size_t>(c)] = saved - h;
    const double down = engine.loss_only(params, pair, kind, margin);
    params.values[static_cast<std::size_t>(c)] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double ana = analytic[static_cast<std::size_t>(c)];
    const double rel = std::abs(numeric - ana) /
                       std::max({std::abs(ana), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

void reject_unknown_keys(const nlohmann::json& obj,
                         const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["input_shape"] = spec.input_shape;
  auto layers = nlohmann::json::array();
  for (const auto& layer : spec.layers) {
    nlohmann::json lj;
    if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
      lj["type"] = "dense";
      lj["in"] = dense->in;
      lj["out"] = dense->out;
    } else {
      const auto& conv = std::get<Conv2dSpec>(layer);
      lj["type"] = "conv2d";
      lj["in_channels"] = conv.in_channels;
      lj["out_channels"] = conv.out_channels;
      lj["kernel"] = conv.kernel;
      lj["stride"] = conv.stride;
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"input_shape", "layers"}, "model");
  NetworkSpec spec;
  if (!j.contains("input_shape") || !j["input_shape"].is_array())
    throw std::invalid_argument("model: input_shape must be an array");
  spec.input_shape = j["input_shape"].get<std::vector<int>>();
  if (!j.contains("layers") || !j["layers"].is_array())
    throw std::invalid_argument("model: layers must be an array");
  for (const auto& lj : j["layers"]) {
    const std::string type = lj.value("type", "");
    if (type == "dense") {
      reject_unknown_keys(lj, {"type", "in", "out"}, "dense layer");
      spec.layers.push_back(DenseSpec{lj.at("in").get<int>(),
                                      lj.at("out").get<int>()});
    } else if (type == "conv2d") {
      reject_unknown_keys(lj, {"type", "in_channels", "out_channels", "kernel",
                               "stride"},
                          "conv2d layer");
      spec.layers.push_back(Conv2dSpec{lj.at("in_channels").get<int>(),
                                       lj.at("out_channels").get<int>(),
                                       lj.at("kernel").get<int>(),
                                       lj.at("stride").get<int>()});
    } else {
      throw std::invalid_argument("model: unknown layer type '" + type + "'");
    }
  }
  analyze(spec);  // shape validation
  return spec;
}

void save_model(const std::filesystem::path& path, const NetworkSpec& spec,
                const NetworkParams& params) {
  require(static_cast<std::int64_t>(params.values.size()) == param_count(spec),
          "save_model: parameter count mismatch");
  nlohmann::json j = spec_to_json(spec);
  j["params"] = params.values;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::pair<NetworkSpec, NetworkParams> load_model(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& err) {
    throw std::runtime_error("model " + path.string() + ": " + err.what());
  }
  reject_unknown_keys(j, {"input_shape", "layers", "params"}, "model");
  NetworkSpec spec = spec_from_json(
      nlohmann::json{{"input_shape", j.at("input_shape")}, {"layers", j.at("layers")}});
  NetworkParams params;
  params.values = j.at("params").get<std::vector<double>>();
  if (static_cast<std::int64_t>(params.values.size()) != param_count(spec))
    throw std::runtime_error("model " + path.string() +
                             ": parameter count mismatch");
  for (double v : params.values)
    if (!std::isfinite(v))
      throw std::runtime_error("model " + path.string() +
                               ": non-finite parameter");
  return {std::move(spec), std::move(params)};
}

}  // namespace dimal::nn
