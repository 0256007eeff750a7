// Multi-layer forward pass, seeded initialization, and checkpoint IO
// (see model.hpp).
#include "biooss/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <utility>

#include "biooss/common.hpp"
#include "biooss/rng.hpp"
#include "biooss/scan.hpp"

namespace biooss {

namespace {

constexpr const char kCheckpointMagic[] = "biooss-ckpt-v1";
constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

void require_matrix_dims(const Eigen::MatrixXd& mat, int rows, int cols,
                         const char* label) {
  if (mat.rows() != rows || mat.cols() != cols) {
    throw DimensionError(std::string(label) + " must be " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(mat.rows()) + "x" +
                         std::to_string(mat.cols()));
  }
}

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = sigmoid(x[i]);
  }
  return out;
}

}  // namespace

void Sequence::validate() const {
  if (values.empty()) {
    throw DimensionError("sequence must have at least one time step");
  }
  const Eigen::Index m = values.front().size();
  if (m < 1) {
    throw DimensionError("sequence entries must have at least one channel");
  }
  for (std::size_t n = 0; n < values.size(); ++n) {
    if (values[n].size() != m) {
      throw DimensionError("ragged sequence: step " + std::to_string(n) +
                           " has " + std::to_string(values[n].size()) +
                           " channels, expected " + std::to_string(m));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!is_finite(values[n][i])) {
        throw NumericError("non-finite sequence entry",
                           static_cast<long>(n));
      }
    }
  }
}

void LayerSpec::validate() const {
  shape.validate();
  params.validate(shape);
  const int hw = shape.cells();
  const int sd = 3 * hw;
  const int m = static_cast<int>(input_map.cols());
  if (m < 1) {
    throw DimensionError("layer input dimension must be at least 1");
  }
  require_matrix_dims(input_map, hw, m, "input_map");
  require_matrix_dims(wz, sd, sd, "wz");
  require_matrix_dims(wg, sd, sd, "wg");
  require_matrix_dims(readout_c, m, sd, "readout_c");
  require_matrix_dims(readout_d, m, m, "readout_d");
  require_matrix_dims(glu_w1, m, m, "glu_w1");
  require_matrix_dims(glu_w2, m, m, "glu_w2");
  if (!allow_unstable) {
    const StabilityReport report = check_stability(params, shape);
    if (!report.ok()) {
      throw StabilityError(
          "layer wave speed violates the stability bound in " +
          std::to_string(report.violations.size()) +
          " cells (worst eigenvalue magnitude " +
          std::to_string(report.worst_eig_magnitude) +
          "); set allow_unstable to run anyway");
    }
  }
}

void ModelSpec::validate() const {
  if (layers.empty()) {
    throw DimensionError("model must have at least one layer");
  }
  const int m = layers.front().input_dim();
  const GridShape& shape = layers.front().shape;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (layers[l].input_dim() != m) {
      throw DimensionError("layer " + std::to_string(l) +
                           " input dimension " +
                           std::to_string(layers[l].input_dim()) +
                           " breaks the chain (expected " +
                           std::to_string(m) + ")");
    }
    if (!(layers[l].shape == shape)) {
      throw DimensionError(
          "layer " + std::to_string(l) +
          " grid shape differs from layer 0; the gated update anchors "
          "each layer on the previous layer's state and needs equal "
          "state dimensions");
    }
  }
  if (w_out.cols() != m) {
    throw DimensionError("w_out must have " + std::to_string(m) +
                         " columns, got " + std::to_string(w_out.cols()));
  }
  if (b_out.size() != w_out.rows()) {
    throw DimensionError("b_out length " + std::to_string(b_out.size()) +
                         " does not match w_out rows " +
                         std::to_string(w_out.rows()));
  }
}

double sigmoid(double x) {
  // Evaluate through the decaying exponential on both tails.
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

Eigen::VectorXd gelu(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out[i] = gelu(x[i]);
  }
  return out;
}

Eigen::VectorXd glu(const Eigen::VectorXd& y, const Eigen::MatrixXd& w1,
                    const Eigen::MatrixXd& w2) {
  if (w1.cols() != y.size() || w2.cols() != y.size() ||
      w1.rows() != w2.rows()) {
    throw DimensionError("glu weight dimensions do not match the input");
  }
  const Eigen::VectorXd a = sigmoid_vec(w1 * y);
  const Eigen::VectorXd b = w2 * y;
  return a.cwiseProduct(b);
}

Eigen::VectorXd gated_update(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& x_prev,
                             const Eigen::MatrixXd& wz,
                             const Eigen::MatrixXd& wg) {
  if (x_prev.size() != x.size() || wz.rows() != x.size() ||
      wz.cols() != x.size() || wg.rows() != x.size() ||
      wg.cols() != x.size()) {
    throw DimensionError("gated update dimensions do not match the state");
  }
  const Eigen::VectorXd g = sigmoid_vec(wg * x);
  const Eigen::VectorXd t = (wz * x).array().tanh();
  return g.cwiseProduct(t) +
         (Eigen::VectorXd::Ones(x.size()) - g).cwiseProduct(x_prev);
}

Sequence layer_forward(const LayerSpec& layer, const Sequence& u_seq,
                       const ForwardOptions& opts, LayerCache* cache,
                       const std::vector<Eigen::VectorXd>* x_prev_seq,
                       int layer_index) {
  layer.validate();
  u_seq.validate();
  if (u_seq.dim() != layer.input_dim()) {
    throw DimensionError("sequence has " + std::to_string(u_seq.dim()) +
                         " channels but layer " +
                         std::to_string(layer_index) + " expects " +
                         std::to_string(layer.input_dim()));
  }
  const std::size_t t = u_seq.t_steps();
  const int sd = layer.state_dim();
  if (x_prev_seq != nullptr &&
      x_prev_seq->size() != t) {
    throw DimensionError("previous-layer state sequence length " +
                         std::to_string(x_prev_seq->size()) +
                         " does not match the input length " +
                         std::to_string(t));
  }
  const std::string layer_label = "layer " + std::to_string(layer_index);

  // Wave propagation: project every input onto a pressure drive, then run
  // the grid either step by step or through the diagonalized scan path.
  std::vector<Field> drives;
  drives.reserve(t);
  for (std::size_t n = 0; n < t; ++n) {
    const Eigen::VectorXd d = layer.input_map * u_seq.values[n];
    Field f(layer.shape.h, layer.shape.w);
    for (std::size_t i = 0; i < f.a.size(); ++i) {
      f.a[i] = d[static_cast<Eigen::Index>(i)];
    }
    drives.push_back(std::move(f));
  }

  std::vector<GridState> states;
  if (opts.engine == EngineKind::Scan) {
    DiagonalizedSystem sys(layer.params, layer.shape, layer.bc);
    states = run_recurrence_scan(sys, GridState(layer.shape), drives);
  } else {
    states.reserve(t);
    GridState s(layer.shape);
    StepWorkspace ws(layer.shape);
    for (std::size_t n = 0; n < t; ++n) {
      step_in_place(s, layer.params, drives[n], layer.shape, layer.bc, ws);
      states.push_back(s);
    }
  }
  for (std::size_t n = 0; n < t; ++n) {
    const std::string label = layer_label + " wave state";
    require_finite(states[n].p.a, label.c_str(), static_cast<long>(n));
    require_finite(states[n].ox.a, label.c_str(), static_cast<long>(n));
    require_finite(states[n].oy.a, label.c_str(), static_cast<long>(n));
  }

  if (cache != nullptr) {
    *cache = LayerCache{};
    cache->states = states;
    cache->x.reserve(t);
    cache->x_out.reserve(t);
    cache->y_pre.reserve(t);
    cache->y.reserve(t);
    cache->u_in = u_seq.values;
    if (opts.head == HeadMode::Full) {
      cache->gate.reserve(t);
      cache->zt.reserve(t);
    }
  }

  Sequence out;
  out.dt_semantics = u_seq.dt_semantics;
  out.values.reserve(t);
  for (std::size_t n = 0; n < t; ++n) {
    const Eigen::VectorXd x = flatten_state(states[n]);
    const Eigen::VectorXd& u_n = u_seq.values[n];

    Eigen::VectorXd x_out;
    Eigen::VectorXd g;
    Eigen::VectorXd zt;
    if (opts.head == HeadMode::Full) {
      const Eigen::VectorXd x_prev = x_prev_seq != nullptr
                                         ? (*x_prev_seq)[n]
                                         : Eigen::VectorXd::Zero(sd);
      if (x_prev.size() != sd) {
        throw DimensionError("previous-layer state has wrong dimension");
      }
      g = sigmoid_vec(layer.wg * x);
      zt = (layer.wz * x).array().tanh();
      x_out = g.cwiseProduct(zt) +
              (Eigen::VectorXd::Ones(sd) - g).cwiseProduct(x_prev);
    } else {
      x_out = x;
    }

    Eigen::VectorXd y_pre = layer.readout_c * x_out + layer.readout_d * u_n;
    Eigen::VectorXd y = opts.head == HeadMode::Full ? gelu(y_pre) : y_pre;
    Eigen::VectorXd u_next =
        opts.head == HeadMode::Full
            ? Eigen::VectorXd(glu(y, layer.glu_w1, layer.glu_w2) + u_n)
            : u_n;
    for (Eigen::Index i = 0; i < u_next.size(); ++i) {
      if (!is_finite(u_next[i]) || !is_finite(y[i])) {
        throw NumericError("non-finite head output in " + layer_label,
                           static_cast<long>(n));
      }
    }

    if (cache != nullptr) {
      cache->x.push_back(x);
      cache->x_out.push_back(x_out);
      if (opts.head == HeadMode::Full) {
        cache->gate.push_back(std::move(g));
        cache->zt.push_back(std::move(zt));
      }
      cache->y_pre.push_back(std::move(y_pre));
      cache->y.push_back(y);
    }
    out.values.push_back(std::move(u_next));
  }
  return out;
}

namespace {

// Shared layer-chaining core: runs all layers, returns the final layer's
// post-GELU sequence (moved out of the cache).
std::vector<Eigen::VectorXd> run_layers(const ModelSpec& model,
                                        const Sequence& u,
                                        const ForwardOptions& opts,
                                        ForwardCache* cache) {
  model.validate();
  u.validate();
  if (u.dim() != model.input_dim()) {
    throw DimensionError("sequence has " + std::to_string(u.dim()) +
                         " channels but the model expects " +
                         std::to_string(model.input_dim()));
  }
  if (cache != nullptr) {
    cache->layers.assign(model.layers.size(), LayerCache{});
  }
  Sequence cur = u;
  std::vector<Eigen::VectorXd> prev_x;
  std::vector<Eigen::VectorXd> final_y;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    LayerCache local;
    LayerCache* lc = cache != nullptr ? &cache->layers[l] : &local;
    cur = layer_forward(model.layers[l], cur, opts, lc,
                        l == 0 ? nullptr : &prev_x, static_cast<int>(l));
    prev_x = lc->x;
    if (l + 1 == model.layers.size()) {
      final_y = lc->y;
    }
  }
  return final_y;
}

Eigen::VectorXd pool_sequence(const std::vector<Eigen::VectorXd>& y,
                              Pooling pooling) {
  if (pooling == Pooling::LastStep) {
    return y.back();
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(y.front().size());
  for (const Eigen::VectorXd& v : y) {
    mean += v;
  }
  return mean / static_cast<double>(y.size());
}

}  // namespace

Eigen::VectorXd forward_logits(const ModelSpec& model, const Sequence& u,
                               const ForwardOptions& opts,
                               ForwardCache* cache) {
  const std::vector<Eigen::VectorXd> y = run_layers(model, u, opts, cache);
  const Eigen::VectorXd pooled = pool_sequence(y, model.pooling);
  Eigen::VectorXd out = model.w_out * pooled + model.b_out;
  if (cache != nullptr) {
    cache->pooled = pooled;
    cache->output = out;
  }
  return out;
}

Sequence forward_outputs(const ModelSpec& model, const Sequence& u,
                         const ForwardOptions& opts) {
  const std::vector<Eigen::VectorXd> y = run_layers(model, u, opts, nullptr);
  Sequence out;
  out.dt_semantics = u.dt_semantics;
  out.values.reserve(y.size());
  for (const Eigen::VectorXd& v : y) {
    out.values.push_back(model.w_out * v + model.b_out);
  }
  return out;
}

namespace {

Eigen::MatrixXd random_matrix(std::uint64_t seed, const std::string& stream,
                              int rows, int cols, int fan_in) {
  Rng rng(seed, stream);
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      w(r, c) = rng.uniform(-s, s);
    }
  }
  return w;
}

PhysicalParams band_plan_params(const BandPlan& plan, const GridShape& shape) {
  if (plan.regions.empty()) {
    throw DomainError("band plan has no regions");
  }
  Field coverage(shape.h, shape.w, 0.0);
  PhysicalParams params(shape);
  for (const RegionBand& region : plan.regions) {
    if (region.i_begin < 0 || region.i_end > shape.h ||
        region.i_begin >= region.i_end || region.j_begin < 0 ||
        region.j_end > shape.w || region.j_begin >= region.j_end) {
      throw DomainError("band plan region exceeds the grid");
    }
    const BandInitResult init =
        init_for_band(region.f_lo, region.f_hi, plan.kp, plan.ko, shape.dt,
                      shape.dx, shape, plan.policy);
    for (int i = region.i_begin; i < region.i_end; ++i) {
      for (int j = region.j_begin; j < region.j_end; ++j) {
        coverage.at(i, j) += 1.0;
        params.c.at(i, j) = init.c;
        params.kp.at(i, j) = plan.kp;
        params.ko.at(i, j) = plan.ko;
      }
    }
  }
  for (int i = 0; i < shape.h; ++i) {
    for (int j = 0; j < shape.w; ++j) {
      if (coverage.at(i, j) != 1.0) {
        throw DomainError("band plan must cover every cell exactly once; "
                          "cell (" +
                          std::to_string(i) + ", " + std::to_string(j) +
                          ") is covered " +
                          std::to_string(static_cast<int>(coverage.at(i, j))) +
                          " times");
      }
    }
  }
  return params;
}

}  // namespace

ModelSpec init_model(std::uint64_t seed, const InitDims& dims,
                     const GridShape& shape,
                     const std::optional<BandPlan>& band_plan,
                     Pooling pooling) {
  shape.validate();
  if (dims.input_dim < 1 || dims.output_dim < 1 || dims.layers < 1) {
    throw DomainError("model dimensions must all be at least 1");
  }
  const int m = dims.input_dim;
  const int hw = shape.cells();
  const int sd = 3 * hw;

  ModelSpec model;
  model.pooling = pooling;
  for (int l = 0; l < dims.layers; ++l) {
    const std::string suffix = "/layer" + std::to_string(l);
    LayerSpec layer;
    layer.shape = shape;
    layer.bc = BoundaryCondition::Periodic;
    layer.input_map =
        random_matrix(seed, "init/input-map" + suffix, hw, m, m);
    layer.wz = random_matrix(seed, "init/wz" + suffix, sd, sd, sd);
    layer.wg = random_matrix(seed, "init/wg" + suffix, sd, sd, sd);
    layer.readout_c = random_matrix(seed, "init/readout-c" + suffix, m, sd, sd);
    layer.readout_d = random_matrix(seed, "init/readout-d" + suffix, m, m, m);
    layer.glu_w1 = random_matrix(seed, "init/glu-w1" + suffix, m, m, m);
    layer.glu_w2 = random_matrix(seed, "init/glu-w2" + suffix, m, m, m);

    if (band_plan.has_value()) {
      layer.params = band_plan_params(*band_plan, shape);
    } else {
      Rng rng(seed, "init/wave" + suffix);
      const double kp = rng.log_uniform(1e-3, 1.0);
      const double ko = rng.log_uniform(1e-3, 1.0);
      const double bound = stability_bound(kp, ko, shape.dt, shape.dx);
      // 1 - uniform01() lies in (0, 1], so c lands in (0, 0.9 * bound].
      const double c = 0.9 * bound * (1.0 - rng.uniform01());
      layer.params = PhysicalParams::uniform(shape, c, kp, ko);
    }
    model.layers.push_back(std::move(layer));
  }
  model.w_out = random_matrix(seed, "init/w-out", dims.output_dim, m, m);
  {
    Rng rng(seed, "init/b-out");
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    model.b_out.resize(dims.output_dim);
    for (int i = 0; i < dims.output_dim; ++i) {
      model.b_out[i] = rng.uniform(-s, s);
    }
  }
  model.validate();
  return model;
}

namespace {

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) {
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(b, 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v = 0;
  std::memcpy(&v, &d, sizeof(v));
  put_u64(os, v);
}

// Matrices serialize as (rows, cols, row-major data).
void put_matrix(std::ostream& os, const Eigen::MatrixXd& mat) {
  put_u64(os, static_cast<std::uint64_t>(mat.rows()));
  put_u64(os, static_cast<std::uint64_t>(mat.cols()));
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      put_f64(os, mat(r, c));
    }
  }
}

void put_vector(std::ostream& os, const Eigen::VectorXd& v) {
  put_u64(os, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    put_f64(os, v[i]);
  }
}

void put_field(std::ostream& os, const Field& f) {
  put_u64(os, static_cast<std::uint64_t>(f.h));
  put_u64(os, static_cast<std::uint64_t>(f.w));
  for (double x : f.a) {
    put_f64(os, x);
  }
}

std::uint64_t get_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) {
    throw ConfigError("truncated model checkpoint");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i]))
         << (8 * i);
  }
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t v = get_u64(is);
  double d = 0.0;
  std::memcpy(&d, &v, sizeof(d));
  return d;
}

// Rejects sizes that cannot belong to a sane checkpoint before allocating.
std::uint64_t checked_dim(std::uint64_t v, const char* label) {
  constexpr std::uint64_t kMaxDim = 1u << 24;
  if (v == 0 || v > kMaxDim) {
    throw ConfigError(std::string("model checkpoint has implausible ") +
                      label + " " + std::to_string(v));
  }
  return v;
}

Eigen::MatrixXd get_matrix(std::istream& is) {
  const auto rows = checked_dim(get_u64(is), "matrix rows");
  const auto cols = checked_dim(get_u64(is), "matrix cols");
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows),
                      static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < mat.rows(); ++r) {
    for (Eigen::Index c = 0; c < mat.cols(); ++c) {
      mat(r, c) = get_f64(is);
    }
  }
  return mat;
}

Eigen::VectorXd get_vector(std::istream& is) {
  const auto size = checked_dim(get_u64(is), "vector length");
  Eigen::VectorXd v(static_cast<Eigen::Index>(size));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = get_f64(is);
  }
  return v;
}

Field get_field(std::istream& is) {
  const auto h = checked_dim(get_u64(is), "field rows");
  const auto w = checked_dim(get_u64(is), "field cols");
  Field f(static_cast<int>(h), static_cast<int>(w));
  for (double& x : f.a) {
    x = get_f64(is);
  }
  return f;
}

}  // namespace

void save_checkpoint(const ModelSpec& model, const std::string& path) {
  model.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw ConfigError("cannot open checkpoint file for writing: " + path);
  }
  os.write(kCheckpointMagic, static_cast<std::streamsize>(kMagicLen));
  put_u64(os, model.layers.size());
  put_u64(os, static_cast<std::uint64_t>(model.pooling));
  put_matrix(os, model.w_out);
  put_vector(os, model.b_out);
  for (const LayerSpec& layer : model.layers) {
    put_u64(os, static_cast<std::uint64_t>(layer.shape.h));
    put_u64(os, static_cast<std::uint64_t>(layer.shape.w));
    put_f64(os, layer.shape.dx);
    put_f64(os, layer.shape.dt);
    put_u64(os, static_cast<std::uint64_t>(layer.bc));
    put_u64(os, layer.allow_unstable ? 1 : 0);
    put_matrix(os, layer.input_map);
    put_matrix(os, layer.wz);
    put_matrix(os, layer.wg);
    put_matrix(os, layer.readout_c);
    put_matrix(os, layer.readout_d);
    put_matrix(os, layer.glu_w1);
    put_matrix(os, layer.glu_w2);
    put_field(os, layer.params.c);
    put_field(os, layer.params.kp);
    put_field(os, layer.params.ko);
  }
  os.flush();
  if (!os) {
    throw ConfigError("failed writing checkpoint file: " + path);
  }
}

ModelSpec load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw ConfigError("cannot open checkpoint file: " + path);
  }
  char magic[kMagicLen];
  is.read(magic, static_cast<std::streamsize>(kMagicLen));
  if (!is || std::memcmp(magic, kCheckpointMagic, kMagicLen) != 0) {
    throw ConfigError("not a model checkpoint (bad magic): " + path);
  }
  const std::uint64_t n_layers = checked_dim(get_u64(is), "layer count");
  const std::uint64_t pooling = get_u64(is);
  if (pooling > 1) {
    throw ConfigError("model checkpoint has unknown pooling tag " +
                      std::to_string(pooling));
  }
  ModelSpec model;
  model.pooling = static_cast<Pooling>(pooling);
  model.w_out = get_matrix(is);
  model.b_out = get_vector(is);
  for (std::uint64_t l = 0; l < n_layers; ++l) {
    LayerSpec layer;
    layer.shape.h = static_cast<int>(checked_dim(get_u64(is), "grid rows"));
    layer.shape.w = static_cast<int>(checked_dim(get_u64(is), "grid cols"));
    layer.shape.dx = get_f64(is);
    layer.shape.dt = get_f64(is);
    const std::uint64_t bc = get_u64(is);
    if (bc > 1) {
      throw ConfigError("model checkpoint has unknown boundary tag " +
                        std::to_string(bc));
    }
    layer.bc = static_cast<BoundaryCondition>(bc);
    layer.allow_unstable = get_u64(is) != 0;
    layer.input_map = get_matrix(is);
    layer.wz = get_matrix(is);
    layer.wg = get_matrix(is);
    layer.readout_c = get_matrix(is);
    layer.readout_d = get_matrix(is);
    layer.glu_w1 = get_matrix(is);
    layer.glu_w2 = get_matrix(is);
    layer.params.c = get_field(is);
    layer.params.kp = get_field(is);
    layer.params.ko = get_field(is);
    model.layers.push_back(std::move(layer));
  }
  try {
    model.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("model checkpoint fails validation: ") +
                      e.what());
  }
  return model;
}

}  // namespace biooss
