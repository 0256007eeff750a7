// Training-side numerics (see train.hpp): exact reverse-mode adjoints for
// the wave update and the head, centered ridge normal equations, a central
// finite-difference harness, and the projected optimizer loop.
#include "biooss/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <utility>

#include "biooss/rng.hpp"

namespace biooss {

namespace {

// d/dx of x * Phi(x): Phi(x) + x * phi(x) with the standard normal pdf/cdf.
double gelu_derivative(double x) {
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * pdf;
}

// A named view into one trainable leaf's contiguous storage. Model and
// gradient collectors below emit leaves in the same fixed order, which the
// optimizer and the finite-difference harness rely on.
struct LeafRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};

void push_matrix_leaf(std::vector<LeafRef>& out, const std::string& name,
                      Eigen::MatrixXd& m) {
  out.push_back({name, m.data(), static_cast<std::size_t>(m.size())});
}

template <typename LayerLike>
void push_layer_leaves(std::vector<LeafRef>& out, const std::string& prefix,
                       LayerLike& layer, Field& c, Field& kp, Field& ko) {
  push_matrix_leaf(out, prefix + "input-map", layer.input_map);
  push_matrix_leaf(out, prefix + "wz", layer.wz);
  push_matrix_leaf(out, prefix + "wg", layer.wg);
  push_matrix_leaf(out, prefix + "readout-c", layer.readout_c);
  push_matrix_leaf(out, prefix + "readout-d", layer.readout_d);
  push_matrix_leaf(out, prefix + "glu-w1", layer.glu_w1);
  push_matrix_leaf(out, prefix + "glu-w2", layer.glu_w2);
  out.push_back({prefix + "c", c.a.data(), c.a.size()});
  out.push_back({prefix + "kp", kp.a.data(), kp.a.size()});
  out.push_back({prefix + "ko", ko.a.data(), ko.a.size()});
}

std::vector<LeafRef> model_leaves(ModelSpec& m) {
  std::vector<LeafRef> out;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    LayerSpec& layer = m.layers[l];
    push_layer_leaves(out, "layer" + std::to_string(l) + "/", layer,
                      layer.params.c, layer.params.kp, layer.params.ko);
  }
  push_matrix_leaf(out, "w-out", m.w_out);
  out.push_back({"b-out", m.b_out.data(),
                 static_cast<std::size_t>(m.b_out.size())});
  return out;
}

std::vector<LeafRef> gradient_leaves(GradientSet& g) {
  std::vector<LeafRef> out;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    LayerGradients& layer = g.layers[l];
    push_layer_leaves(out, "layer" + std::to_string(l) + "/", layer, layer.c,
                      layer.kp, layer.ko);
  }
  push_matrix_leaf(out, "w-out", g.w_out);
  out.push_back({"b-out", g.b_out.data(),
                 static_cast<std::size_t>(g.b_out.size())});
  return out;
}

double cross_entropy(const Eigen::VectorXd& logits, int label,
                     Eigen::VectorXd* dlogits) {
  // Stable log-sum-exp; the gradient is softmax minus the one-hot target.
  const double zmax = logits.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    sum += std::exp(logits[j] - zmax);
  }
  const double lse = zmax + std::log(sum);
  if (dlogits != nullptr) {
    dlogits->resize(logits.size());
    for (Eigen::Index j = 0; j < logits.size(); ++j) {
      (*dlogits)[j] = std::exp(logits[j] - lse) - (j == label ? 1.0 : 0.0);
    }
  }
  return lse - logits[label];
}

// Adjoint inputs for one layer; null pointers mean all-zero sequences.
struct LayerBackwardIo {
  const std::vector<Eigen::VectorXd>* x_prev = nullptr;   // gating anchor
  const std::vector<Eigen::VectorXd>* du_next = nullptr;  // d(output seq)
  const std::vector<Eigen::VectorXd>* dy_ext = nullptr;   // d(y seq), loss-side
  const std::vector<Eigen::VectorXd>* dx_post = nullptr;  // d(x seq), next layer
};

// Reverse accumulation through one layer. Head adjoints use exact local
// derivatives; the wave-update adjoint runs the transposed stencils backward
// in time. The starred intermediates are recovered from the cached
// post-damping state (p* = p_n / alpha, o* = o_n / beta), so nothing beyond
// the forward cache is stored.
void layer_backward(const LayerSpec& layer, const LayerCache& cache,
                    HeadMode head, const LayerBackwardIo& io,
                    LayerGradients& g, std::vector<Eigen::VectorXd>& du_in,
                    std::vector<Eigen::VectorXd>& dx_prev) {
  const std::size_t t = cache.x.size();
  const GridShape& shape = layer.shape;
  const int hw = shape.cells();
  const int sd = 3 * hw;
  const int m = layer.input_dim();
  const double dt = shape.dt;

  du_in.assign(t, Eigen::VectorXd::Zero(m));
  dx_prev.assign(t, Eigen::VectorXd::Zero(sd));
  std::vector<Eigen::VectorXd> dx_head(t);

  Field alpha(shape.h, shape.w);
  Field beta(shape.h, shape.w);
  for (std::size_t i = 0; i < alpha.a.size(); ++i) {
    alpha.a[i] = 1.0 / (1.0 + dt * layer.params.kp.a[i]);
    beta.a[i] = 1.0 / (1.0 + dt * layer.params.ko.a[i]);
  }

  // Head stage, step by step (no coupling across time inside the head).
  for (std::size_t n = 0; n < t; ++n) {
    Eigen::VectorXd du =
        io.du_next != nullptr ? (*io.du_next)[n] : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dy =
        io.dy_ext != nullptr ? (*io.dy_ext)[n] : Eigen::VectorXd::Zero(m);

    if (head == HeadMode::Full) {
      const Eigen::VectorXd& y = cache.y[n];
      // GLU residual u' = sigmoid(W1 y) . (W2 y) + u. The two projections
      // are cheap to recompute, so they are not cached.
      const Eigen::VectorXd a = layer.glu_w1 * y;
      const Eigen::VectorXd b = layer.glu_w2 * y;
      Eigen::VectorXd da(m);
      Eigen::VectorXd db(m);
      for (int i = 0; i < m; ++i) {
        const double s = sigmoid(a[i]);
        da[i] = du[i] * b[i] * s * (1.0 - s);
        db[i] = du[i] * s;
      }
      g.glu_w1.noalias() += da * y.transpose();
      g.glu_w2.noalias() += db * y.transpose();
      dy.noalias() += layer.glu_w1.transpose() * da;
      dy.noalias() += layer.glu_w2.transpose() * db;
      du_in[n] += du;  // residual skip

      Eigen::VectorXd dy_pre(m);
      for (int i = 0; i < m; ++i) {
        dy_pre[i] = dy[i] * gelu_derivative(cache.y_pre[n][i]);
      }
      g.readout_c.noalias() += dy_pre * cache.x_out[n].transpose();
      g.readout_d.noalias() += dy_pre * cache.u_in[n].transpose();
      du_in[n].noalias() += layer.readout_d.transpose() * dy_pre;
      const Eigen::VectorXd dx_out = layer.readout_c.transpose() * dy_pre;

      // Gating x_out = gate . tanh(Wz x) + (1 - gate) . x_prev.
      const Eigen::VectorXd& gate = cache.gate[n];
      const Eigen::VectorXd& zt = cache.zt[n];
      const Eigen::VectorXd x_prev = io.x_prev != nullptr
                                         ? (*io.x_prev)[n]
                                         : Eigen::VectorXd::Zero(sd);
      Eigen::VectorXd dzg(sd);
      Eigen::VectorXd dzz(sd);
      for (int i = 0; i < sd; ++i) {
        const double dxo = dx_out[i];
        dzg[i] = dxo * (zt[i] - x_prev[i]) * gate[i] * (1.0 - gate[i]);
        dzz[i] = dxo * gate[i] * (1.0 - zt[i] * zt[i]);
        dx_prev[n][i] = dxo * (1.0 - gate[i]);
      }
      g.wg.noalias() += dzg * cache.x[n].transpose();
      g.wz.noalias() += dzz * cache.x[n].transpose();
      dx_head[n] = layer.wg.transpose() * dzg + layer.wz.transpose() * dzz;
    } else {
      // Identity head: y = C x + D u and the output sequence is the input.
      du_in[n] += du;
      const Eigen::VectorXd& dy_pre = dy;
      g.readout_c.noalias() += dy_pre * cache.x[n].transpose();
      g.readout_d.noalias() += dy_pre * cache.u_in[n].transpose();
      du_in[n].noalias() += layer.readout_d.transpose() * dy_pre;
      dx_head[n] = layer.readout_c.transpose() * dy_pre;
    }
    if (io.dx_post != nullptr) {
      dx_head[n] += (*io.dx_post)[n];
    }
  }

  // Wave update, reversed in time. Running fields hold the adjoint of the
  // post-damping state at the current step before head contributions.
  Field dp(shape.h, shape.w);
  Field dox(shape.h, shape.w);
  Field doy(shape.h, shape.w);
  for (long n = static_cast<long>(t) - 1; n >= 0; --n) {
    const GridState& sn = cache.states[n];
    const std::size_t un = static_cast<std::size_t>(n);
    for (int i = 0; i < hw; ++i) {
      dp.a[i] += dx_head[un][i];
      dox.a[i] += dx_head[un][hw + i];
      doy.a[i] += dx_head[un][2 * hw + i];
    }

    // Damping stage p_n = alpha p*, o_n = beta o*. The damping-rate
    // adjoints follow from d(alpha)/d(kp) = -dt alpha^2 and p* alpha = p_n.
    Field dps(shape.h, shape.w);
    Field doxs(shape.h, shape.w);
    Field doys(shape.h, shape.w);
    for (int i = 0; i < hw; ++i) {
      g.kp.a[i] += -dt * alpha.a[i] * sn.p.a[i] * dp.a[i];
      g.ko.a[i] += -dt * beta.a[i] *
                   (sn.ox.a[i] * dox.a[i] + sn.oy.a[i] * doy.a[i]);
      dps.a[i] = alpha.a[i] * dp.a[i];
      doxs.a[i] = beta.a[i] * dox.a[i];
      doys.a[i] = beta.a[i] * doy.a[i];
    }

    // Recover the starred velocity and its divergence for the wave-speed
    // adjoint of p* = p_{n-1} - c^2 dt div(o*) + dt drive.
    Field oxs(shape.h, shape.w);
    Field oys(shape.h, shape.w);
    for (int i = 0; i < hw; ++i) {
      oxs.a[i] = sn.ox.a[i] / beta.a[i];
      oys.a[i] = sn.oy.a[i] / beta.a[i];
    }
    const Field div_star = divergence(oxs, oys, shape, layer.bc);

    Eigen::VectorXd ddrive(hw);
    Field ddiv(shape.h, shape.w);
    for (int i = 0; i < hw; ++i) {
      const double c = layer.params.c.a[i];
      g.c.a[i] += dps.a[i] * (-2.0 * c * dt * div_star.a[i]);
      ddrive[i] = dt * dps.a[i];
      ddiv.a[i] = -dt * c * c * dps.a[i];
    }
    g.input_map.noalias() += ddrive * cache.u_in[un].transpose();
    du_in[un].noalias() += layer.input_map.transpose() * ddrive;

    // Adjoint of the divergence: its transpose is the negative gradient.
    const auto [gxd, gyd] = gradient(ddiv, shape, layer.bc);
    for (int i = 0; i < hw; ++i) {
      doxs.a[i] -= gxd.a[i];
      doys.a[i] -= gyd.a[i];
    }

    // o* = o_{n-1} - dt grad(p_{n-1}); the gradient's transpose is the
    // negative divergence, so p_{n-1} gains +dt div(do*).
    const Field div_do = divergence(doxs, doys, shape, layer.bc);
    for (int i = 0; i < hw; ++i) {
      dp.a[i] = dps.a[i] + dt * div_do.a[i];
      dox.a[i] = doxs.a[i];
      doy.a[i] = doys.a[i];
    }
  }
}

// Per-item loss plus loss-side adjoints of the final layer's y sequence and
// of (w_out, b_out). Shared by the classification and regression branches.
double item_loss_and_seeds(const ModelSpec& model, const Batch& batch,
                           std::size_t item, const ForwardCache& cache,
                           const Eigen::VectorXd& logits,
                           std::vector<Eigen::VectorXd>& dy_ext,
                           GradientSet& grads) {
  const std::size_t t = batch.inputs[item].t_steps();
  const int m = model.layers.back().input_dim();
  dy_ext.assign(t, Eigen::VectorXd::Zero(m));
  if (batch.task == TaskKind::Classify) {
    Eigen::VectorXd dz;
    const double loss = cross_entropy(logits, batch.labels[item], &dz);
    grads.w_out.noalias() += dz * cache.pooled.transpose();
    grads.b_out += dz;
    const Eigen::VectorXd dpooled = model.w_out.transpose() * dz;
    if (model.pooling == Pooling::LastStep) {
      dy_ext[t - 1] = dpooled;
    } else {
      const double inv = 1.0 / static_cast<double>(t);
      for (std::size_t n = 0; n < t; ++n) {
        dy_ext[n] = inv * dpooled;
      }
    }
    return loss;
  }
  // Regress: squared error against per-step outputs, mean over time.
  const std::vector<Eigen::VectorXd>& y = cache.layers.back().y;
  const double inv = 1.0 / static_cast<double>(t);
  double loss = 0.0;
  for (std::size_t n = 0; n < t; ++n) {
    const Eigen::VectorXd out_n = model.w_out * y[n] + model.b_out;
    const Eigen::VectorXd r = out_n - batch.targets[item].values[n];
    loss += inv * r.squaredNorm();
    const Eigen::VectorXd dout = 2.0 * inv * r;
    grads.w_out.noalias() += dout * y[n].transpose();
    grads.b_out += dout;
    dy_ext[n] = model.w_out.transpose() * dout;
  }
  return loss;
}

}  // namespace

void Batch::validate(int input_dim, int output_dim) const {
  if (inputs.empty()) {
    throw DimensionError("batch must contain at least one sequence");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].validate();
    if (inputs[i].dim() != input_dim) {
      throw DimensionError("batch item " + std::to_string(i) + " has " +
                           std::to_string(inputs[i].dim()) +
                           " channels, expected " + std::to_string(input_dim));
    }
  }
  if (task == TaskKind::Classify) {
    if (labels.size() != inputs.size()) {
      throw DimensionError("label count " + std::to_string(labels.size()) +
                           " does not match input count " +
                           std::to_string(inputs.size()));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= output_dim) {
        throw DomainError("label " + std::to_string(labels[i]) + " at item " +
                          std::to_string(i) + " is outside [0, " +
                          std::to_string(output_dim) + ")");
      }
    }
  } else {
    if (targets.size() != inputs.size()) {
      throw DimensionError("target count " + std::to_string(targets.size()) +
                           " does not match input count " +
                           std::to_string(inputs.size()));
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
      targets[i].validate();
      if (targets[i].dim() != output_dim) {
        throw DimensionError("target " + std::to_string(i) + " has " +
                             std::to_string(targets[i].dim()) +
                             " channels, expected " +
                             std::to_string(output_dim));
      }
      if (targets[i].t_steps() != inputs[i].t_steps()) {
        throw DimensionError("target " + std::to_string(i) + " has " +
                             std::to_string(targets[i].t_steps()) +
                             " steps but its input has " +
                             std::to_string(inputs[i].t_steps()));
      }
    }
  }
}

namespace {

void zero_gradient_set(GradientSet& g) {
  for (LayerGradients& lg : g.layers) {
    lg.input_map.setZero();
    lg.wz.setZero();
    lg.wg.setZero();
    lg.readout_c.setZero();
    lg.readout_d.setZero();
    lg.glu_w1.setZero();
    lg.glu_w2.setZero();
    std::fill(lg.c.a.begin(), lg.c.a.end(), 0.0);
    std::fill(lg.kp.a.begin(), lg.kp.a.end(), 0.0);
    std::fill(lg.ko.a.begin(), lg.ko.a.end(), 0.0);
  }
  g.w_out.setZero();
  g.b_out.setZero();
}

void add_gradient_set(GradientSet& total, const GradientSet& item) {
  for (std::size_t l = 0; l < total.layers.size(); ++l) {
    LayerGradients& t = total.layers[l];
    const LayerGradients& s = item.layers[l];
    t.input_map += s.input_map;
    t.wz += s.wz;
    t.wg += s.wg;
    t.readout_c += s.readout_c;
    t.readout_d += s.readout_d;
    t.glu_w1 += s.glu_w1;
    t.glu_w2 += s.glu_w2;
    for (std::size_t i = 0; i < t.c.a.size(); ++i) {
      t.c.a[i] += s.c.a[i];
      t.kp.a[i] += s.kp.a[i];
      t.ko.a[i] += s.ko.a[i];
    }
  }
  total.w_out += item.w_out;
  total.b_out += item.b_out;
}

}  // namespace

GradientSet GradientSet::zeros_like(const ModelSpec& model) {
  GradientSet g;
  g.layers.reserve(model.layers.size());
  for (const LayerSpec& layer : model.layers) {
    LayerGradients lg;
    lg.input_map =
        Eigen::MatrixXd::Zero(layer.input_map.rows(), layer.input_map.cols());
    lg.wz = Eigen::MatrixXd::Zero(layer.wz.rows(), layer.wz.cols());
    lg.wg = Eigen::MatrixXd::Zero(layer.wg.rows(), layer.wg.cols());
    lg.readout_c =
        Eigen::MatrixXd::Zero(layer.readout_c.rows(), layer.readout_c.cols());
    lg.readout_d =
        Eigen::MatrixXd::Zero(layer.readout_d.rows(), layer.readout_d.cols());
    lg.glu_w1 =
        Eigen::MatrixXd::Zero(layer.glu_w1.rows(), layer.glu_w1.cols());
    lg.glu_w2 =
        Eigen::MatrixXd::Zero(layer.glu_w2.rows(), layer.glu_w2.cols());
    lg.c = Field(layer.shape.h, layer.shape.w);
    lg.kp = Field(layer.shape.h, layer.shape.w);
    lg.ko = Field(layer.shape.h, layer.shape.w);
    g.layers.push_back(std::move(lg));
  }
  g.w_out = Eigen::MatrixXd::Zero(model.w_out.rows(), model.w_out.cols());
  g.b_out = Eigen::VectorXd::Zero(model.b_out.size());
  return g;
}

double GradientSet::norm() const {
  double s = 0.0;
  for (const LayerGradients& lg : layers) {
    s += lg.input_map.squaredNorm() + lg.wz.squaredNorm() +
         lg.wg.squaredNorm() + lg.readout_c.squaredNorm() +
         lg.readout_d.squaredNorm() + lg.glu_w1.squaredNorm() +
         lg.glu_w2.squaredNorm();
    for (const Field* f : {&lg.c, &lg.kp, &lg.ko}) {
      for (double v : f->a) {
        s += v * v;
      }
    }
  }
  s += w_out.squaredNorm() + b_out.squaredNorm();
  return std::sqrt(s);
}

double batch_loss(const ModelSpec& model, const Batch& batch,
                  const LossOptions& opts) {
  model.validate();
  batch.validate(model.input_dim(), model.output_dim());
  const ForwardOptions fwd{EngineKind::Sequential, opts.head};
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.task == TaskKind::Classify) {
      const Eigen::VectorXd logits = forward_logits(model, batch.inputs[i], fwd);
      loss += cross_entropy(logits, batch.labels[i], nullptr);
    } else {
      const Sequence out = forward_outputs(model, batch.inputs[i], fwd);
      const double inv = 1.0 / static_cast<double>(out.t_steps());
      for (std::size_t n = 0; n < out.t_steps(); ++n) {
        loss += inv *
                (out.values[n] - batch.targets[i].values[n]).squaredNorm();
      }
    }
  }
  return loss;
}

LossAndGradients loss_and_gradients(const ModelSpec& model, const Batch& batch,
                                    const LossOptions& opts) {
  model.validate();
  batch.validate(model.input_dim(), model.output_dim());
  const ForwardOptions fwd{EngineKind::Sequential, opts.head};
  const long num_layers = static_cast<long>(model.layers.size());

  LossAndGradients result;
  result.grads = GradientSet::zeros_like(model);
  // Each item accumulates into a freshly zeroed scratch set that is then
  // added to the total, so an item's contribution is the same bit pattern
  // regardless of its position in the batch (sum-reduction contract).
  GradientSet scratch = GradientSet::zeros_like(model);
  for (std::size_t item = 0; item < batch.size(); ++item) {
    ForwardCache cache;
    const Eigen::VectorXd logits =
        forward_logits(model, batch.inputs[item], fwd, &cache);

    zero_gradient_set(scratch);
    std::vector<Eigen::VectorXd> dy_ext;
    result.loss += item_loss_and_seeds(model, batch, item, cache, logits,
                                       dy_ext, scratch);

    std::vector<Eigen::VectorXd> du_next;  // empty means all zero
    std::vector<Eigen::VectorXd> dx_post;
    for (long l = num_layers - 1; l >= 0; --l) {
      LayerBackwardIo io;
      io.x_prev = l > 0 ? &cache.layers[l - 1].x : nullptr;
      io.du_next = du_next.empty() ? nullptr : &du_next;
      io.dy_ext = l == num_layers - 1 ? &dy_ext : nullptr;
      io.dx_post = dx_post.empty() ? nullptr : &dx_post;
      std::vector<Eigen::VectorXd> du_in;
      std::vector<Eigen::VectorXd> dx_prev;
      layer_backward(model.layers[l], cache.layers[l], opts.head, io,
                     scratch.layers[l], du_in, dx_prev);
      du_next = std::move(du_in);
      dx_post = std::move(dx_prev);
    }
    add_gradient_set(result.grads, scratch);
  }

  if (!is_finite(result.loss)) {
    throw NumericError("non-finite training loss");
  }
  auto leaves = gradient_leaves(result.grads);
  for (const LeafRef& leaf : leaves) {
    for (std::size_t i = 0; i < leaf.size; ++i) {
      if (!is_finite(leaf.data[i])) {
        throw NumericError("non-finite gradient in " + leaf.name);
      }
    }
  }
  return result;
}

RidgeFit ridge_readout_fit(const Eigen::MatrixXd& features,
                           const Eigen::MatrixXd& targets, double reg) {
  if (features.rows() < 1) {
    throw DimensionError("ridge fit needs at least one row");
  }
  if (targets.rows() != features.rows()) {
    throw DimensionError("ridge fit got " + std::to_string(features.rows()) +
                         " feature rows but " + std::to_string(targets.rows()) +
                         " target rows");
  }
  if (!(reg > 0.0) || !is_finite(reg)) {
    throw DomainError("ridge regularizer must be positive, got " +
                      std::to_string(reg));
  }
  // Unpenalized intercept: center both sides, solve the ridge normal
  // equations on the centered data, then recover the intercept from the
  // column means. The W stationarity 2 X^T (X W + 1 b^T - Y) + 2 reg W = 0
  // holds exactly because the centered residual columns sum to zero.
  const Eigen::RowVectorXd xbar = features.colwise().mean();
  const Eigen::RowVectorXd ybar = targets.colwise().mean();
  const Eigen::MatrixXd xc = features.rowwise() - xbar;
  const Eigen::MatrixXd yc = targets.rowwise() - ybar;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += reg;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw NumericError("ridge normal equations are not solvable");
  }
  RidgeFit fit;
  fit.w = ldlt.solve(xc.transpose() * yc);
  fit.b = ybar.transpose() - fit.w.transpose() * xbar.transpose();
  if (!fit.w.allFinite() || !fit.b.allFinite()) {
    throw NumericError("ridge solution is not finite");
  }
  return fit;
}

Eigen::VectorXd energy_features(const ModelSpec& model, const Sequence& u) {
  ForwardCache cache;
  forward_logits(model, u, ForwardOptions{}, &cache);
  const std::vector<Eigen::VectorXd>& xs = cache.layers.back().x;
  Eigen::VectorXd feat = Eigen::VectorXd::Zero(xs.front().size());
  for (const Eigen::VectorXd& x : xs) {
    feat += x.cwiseProduct(x);
  }
  feat /= static_cast<double>(xs.size());
  return feat;
}

Eigen::MatrixXd one_hot_targets(const std::vector<int>& labels, int k) {
  if (labels.empty()) {
    throw DimensionError("one-hot encoding needs at least one label");
  }
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DomainError("label " + std::to_string(labels[i]) +
                        " is outside [0, " + std::to_string(k) + ")");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

std::map<std::string, double> finite_difference_check(
    const ModelSpec& model, const Batch& batch, double eps,
    const std::vector<std::string>& leaves, const FdOptions& opts) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw DomainError("finite-difference eps must lie in [1e-7, 1e-3], got " +
                      std::to_string(eps));
  }
  if (opts.coords_per_leaf < 1) {
    throw DomainError("coords_per_leaf must be at least 1");
  }
  const LossOptions lopts{opts.head};
  LossAndGradients base = loss_and_gradients(model, batch, lopts);

  ModelSpec work = model;
  for (LayerSpec& layer : work.layers) {
    // A wave-speed perturbation may cross the certification boundary by
    // eps; the dynamics stay numerically tame over a short run.
    layer.allow_unstable = true;
  }
  auto model_refs = model_leaves(work);
  auto grad_refs = gradient_leaves(base.grads);

  std::set<std::string> want(leaves.begin(), leaves.end());
  for (const std::string& name : want) {
    const bool known =
        std::any_of(model_refs.begin(), model_refs.end(),
                    [&](const LeafRef& r) { return r.name == name; });
    if (!known) {
      throw DomainError("unknown leaf name: " + name);
    }
  }

  Rng rng(opts.seed, "train/fd-coords");
  std::map<std::string, double> report;
  for (std::size_t leaf = 0; leaf < model_refs.size(); ++leaf) {
    const LeafRef& ref = model_refs[leaf];
    if (!want.empty() && want.count(ref.name) == 0) {
      continue;
    }
    const std::size_t n = ref.size;
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(opts.coords_per_leaf), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j =
          i + static_cast<std::size_t>(rng.uniform_index(n - i));
      std::swap(order[i], order[j]);
    }

    // The error is normalized by the largest gradient magnitude seen in the
    // leaf, not coordinate by coordinate: a central difference of an O(1)
    // loss carries an absolute noise floor near machine epsilon / eps, so
    // per-coordinate ratios are meaningless for entries far below the
    // leaf's own scale (the difference quotient, not the adjoint, loses
    // the significant digits there).
    double scale = 0.0;
    double worst_abs = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t i = order[c];
      const double v0 = ref.data[i];
      ref.data[i] = v0 + eps;
      const double lp = batch_loss(work, batch, lopts);
      ref.data[i] = v0 - eps;
      const double lm = batch_loss(work, batch, lopts);
      ref.data[i] = v0;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = grad_refs[leaf].data[i];
      scale = std::max({scale, std::abs(fd), std::abs(an)});
      worst_abs = std::max(worst_abs, std::abs(fd - an));
    }
    report[ref.name] = scale < 1e-12 ? 0.0 : worst_abs / scale;
  }
  return report;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !is_finite(lr)) {
    throw DomainError("learning rate must be finite and >= 0");
  }
  if (steps < 0) {
    throw DomainError("steps must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw DomainError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) {
    throw DomainError("adam_eps must be positive");
  }
  if (!(divergence_factor > 1.0)) {
    throw DomainError("divergence_factor must exceed 1");
  }
  if (batch_size < 0) {
    throw DomainError("batch_size must be >= 0 (0 means full batch)");
  }
}

TrainResult train_loop(const ModelSpec& model, const Batch& data,
                       const TrainConfig& config) {
  config.validate();
  model.validate();
  data.validate(model.input_dim(), model.output_dim());

  TrainResult result;
  result.model = model;
  GradientSet m1 = GradientSet::zeros_like(model);
  GradientSet m2 = GradientSet::zeros_like(model);
  auto params = model_leaves(result.model);
  auto mom1 = gradient_leaves(m1);
  auto mom2 = gradient_leaves(m2);

  std::set<std::string> mask(config.trainable.begin(), config.trainable.end());
  for (const std::string& name : mask) {
    const bool known = std::any_of(params.begin(), params.end(),
                                   [&](const LeafRef& r) {
                                     return r.name == name;
                                   });
    if (!known) {
      throw DomainError("unknown trainable leaf: " + name);
    }
  }

  Rng rng(config.seed, "train/minibatch");
  const std::size_t n_items = data.size();
  const LossOptions lopts{config.head};
  std::vector<double> losses;
  double first_loss = 0.0;
  double b1t = 1.0;
  double b2t = 1.0;

  for (int step = 0; step < config.steps; ++step) {
    const Batch* cur = &data;
    Batch sub;
    if (config.batch_size > 0 &&
        static_cast<std::size_t>(config.batch_size) < n_items) {
      // Sample batch_size distinct items via a partial shuffle.
      std::vector<std::size_t> order(n_items);
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t k = static_cast<std::size_t>(config.batch_size);
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.uniform_index(n_items - i));
        std::swap(order[i], order[j]);
      }
      sub.task = data.task;
      for (std::size_t i = 0; i < k; ++i) {
        sub.inputs.push_back(data.inputs[order[i]]);
        if (data.task == TaskKind::Classify) {
          sub.labels.push_back(data.labels[order[i]]);
        } else {
          sub.targets.push_back(data.targets[order[i]]);
        }
      }
      cur = &sub;
    }

    LossAndGradients lg = loss_and_gradients(result.model, *cur, lopts);
    losses.push_back(lg.loss);
    if (step == 0) {
      first_loss = std::abs(lg.loss);
    }
    if (!is_finite(lg.loss) ||
        std::abs(lg.loss) >
            config.divergence_factor * std::max(first_loss, 1e-300)) {
      throw TrainingDivergedError(
          "training diverged at step " + std::to_string(step) + " with loss " +
              std::to_string(lg.loss),
          losses);
    }
    const double grad_norm = lg.grads.norm();

    if (config.lr > 0.0) {
      auto grad_refs = gradient_leaves(lg.grads);
      if (config.optimizer == OptimizerKind::Adam) {
        b1t *= config.adam_beta1;
        b2t *= config.adam_beta2;
      }
      for (std::size_t leaf = 0; leaf < params.size(); ++leaf) {
        if (!mask.empty() && mask.count(params[leaf].name) == 0) {
          continue;
        }
        double* w = params[leaf].data;
        const double* gd = grad_refs[leaf].data;
        if (config.optimizer == OptimizerKind::Adam) {
          double* m = mom1[leaf].data;
          double* v = mom2[leaf].data;
          for (std::size_t i = 0; i < params[leaf].size; ++i) {
            m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * gd[i];
            v[i] = config.adam_beta2 * v[i] +
                   (1.0 - config.adam_beta2) * gd[i] * gd[i];
            const double mhat = m[i] / (1.0 - b1t);
            const double vhat = v[i] / (1.0 - b2t);
            w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.adam_eps);
          }
        } else {
          for (std::size_t i = 0; i < params[leaf].size; ++i) {
            w[i] -= config.lr * gd[i];
          }
        }
      }

      if (config.project_stability) {
        for (LayerSpec& layer : result.model.layers) {
          for (std::size_t i = 0; i < layer.params.kp.a.size(); ++i) {
            layer.params.kp.a[i] = std::max(layer.params.kp.a[i], 1e-6);
            layer.params.ko.a[i] = std::max(layer.params.ko.a[i], 1e-6);
          }
          // Clamp onto the closed generalized-CFL ball for the projected
          // damping, keeping wave speeds nonnegative.
          const Field bound = stability_bound(layer.params, layer.shape);
          for (std::size_t i = 0; i < layer.params.c.a.size(); ++i) {
            layer.params.c.a[i] =
                std::clamp(layer.params.c.a[i], 0.0, bound.a[i]);
          }
        }
      }
    }

    double max_eig = 0.0;
    for (const LayerSpec& layer : result.model.layers) {
      max_eig = std::max(
          max_eig,
          check_stability(layer.params, layer.shape).worst_eig_magnitude);
    }
    result.trace.push_back({step, lg.loss, grad_norm, max_eig});
  }
  return result;
}

double classification_accuracy(const ModelSpec& model, const Batch& batch,
                               const ForwardOptions& opts) {
  model.validate();
  batch.validate(model.input_dim(), model.output_dim());
  if (batch.task != TaskKind::Classify) {
    throw DomainError("accuracy needs a classification batch");
  }
  int correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Eigen::VectorXd logits = forward_logits(model, batch.inputs[i], opts);
    Eigen::Index argmax = 0;
    logits.maxCoeff(&argmax);
    if (static_cast<int>(argmax) == batch.labels[i]) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

void write_loss_trace(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "step,loss,grad_norm,max_eig_magnitude\n";
  char buf[128];
  for (const TraceRow& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.step,
                  row.loss, row.grad_norm, row.max_eig_magnitude);
    os << buf;
  }
}

}  // namespace biooss
