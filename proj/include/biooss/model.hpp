// Multi-layer model around the damped-wave grid. Each layer projects its
// input sequence onto the pressure field, propagates the wave state over
// time, mixes the result with the previous layer's state through a gated
// residual update, and produces the next layer's input via a linear readout,
// GELU, and a GLU residual. A pooled affine map yields the final output.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biooss/grid.hpp"
#include "biooss/spectral.hpp"

namespace biooss {

// Interpretation of a sequence's step axis. A documentation tag carried
// alongside the data; the numerics never read it.
enum class DtSemantics { PhysicalSeconds, UnitlessIndex };

// T x m real sequence, stored one vector per time step.
struct Sequence {
  std::vector<Eigen::VectorXd> values;
  DtSemantics dt_semantics = DtSemantics::PhysicalSeconds;

  std::size_t t_steps() const { return values.size(); }
  int dim() const {
    return values.empty() ? 0 : static_cast<int>(values.front().size());
  }
  // Throws DimensionError when empty or ragged, NumericError on NaN/Inf.
  void validate() const;
};

enum class Pooling { LastStep, MeanOverTime };
enum class EngineKind { Sequential, Scan };

// Full runs the gated residual update, GELU, and GLU residual. Identity
// passes the wave state and the layer input through unchanged, leaving only
// the linear readout; the whole model is then linear in its inputs, which
// the engine-equivalence and gradient oracles rely on.
enum class HeadMode { Full, Identity };

// One layer's weights and wave parameters.
struct LayerSpec {
  Eigen::MatrixXd input_map;  // HW x m, drives the pressure field
  Eigen::MatrixXd wz;         // 3HW x 3HW, gated update candidate
  Eigen::MatrixXd wg;         // 3HW x 3HW, gate
  Eigen::MatrixXd readout_c;  // m x 3HW
  Eigen::MatrixXd readout_d;  // m x m, input skip term
  Eigen::MatrixXd glu_w1;     // m x m
  Eigen::MatrixXd glu_w2;     // m x m
  PhysicalParams params;
  GridShape shape;
  BoundaryCondition bc = BoundaryCondition::Periodic;
  // When false (the default), validate() rejects wave speeds that violate
  // the generalized CFL bound with StabilityError.
  bool allow_unstable = false;

  int input_dim() const { return static_cast<int>(input_map.cols()); }
  int state_dim() const { return 3 * shape.cells(); }
  void validate() const;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  Eigen::MatrixXd w_out;  // K x m
  Eigen::VectorXd b_out;  // K
  Pooling pooling = Pooling::MeanOverTime;

  int input_dim() const {
    return layers.empty() ? 0 : layers.front().input_dim();
  }
  int output_dim() const { return static_cast<int>(w_out.rows()); }
  void validate() const;
};

// Elementwise head primitives, exposed for oracle tests and the adjoints.
double sigmoid(double x);
double gelu(double x);  // exact Gaussian CDF form x * Phi(x)
Eigen::VectorXd gelu(const Eigen::VectorXd& x);

// sigmoid(w1 y) elementwise-times (w2 y).
Eigen::VectorXd glu(const Eigen::VectorXd& y, const Eigen::MatrixXd& w1,
                    const Eigen::MatrixXd& w2);

// sigmoid(wg x) (x) tanh(wz x) + (1 - sigmoid(wg x)) (x) x_prev. Every
// output component lies between its tanh(wz x) and x_prev components.
Eigen::VectorXd gated_update(const Eigen::VectorXd& x,
                             const Eigen::VectorXd& x_prev,
                             const Eigen::MatrixXd& wz,
                             const Eigen::MatrixXd& wg);

// Everything one layer computed, recorded per time step. The training
// adjoints replay these; the model loop reads x as the next layer's gating
// anchor and y of the final layer as the pooled output source.
struct LayerCache {
  std::vector<GridState> states;       // post-damping wave state
  std::vector<Eigen::VectorXd> x;      // the same state flattened (p,ox,oy)
  std::vector<Eigen::VectorXd> x_out;  // after the gated update
  std::vector<Eigen::VectorXd> gate;   // sigmoid(wg x)   (Full head only)
  std::vector<Eigen::VectorXd> zt;     // tanh(wz x)      (Full head only)
  std::vector<Eigen::VectorXd> y_pre;  // readout before GELU
  std::vector<Eigen::VectorXd> y;      // after GELU (== y_pre for Identity)
  std::vector<Eigen::VectorXd> u_in;   // the layer's input sequence
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::VectorXd pooled;  // pooled final-layer y
  Eigen::VectorXd output;  // w_out * pooled + b_out
};

struct ForwardOptions {
  EngineKind engine = EngineKind::Sequential;
  HeadMode head = HeadMode::Full;
};

// Runs one layer over the sequence and returns the next layer's input.
// x_prev_seq holds the previous layer's flattened post-damping states, one
// per time step; pass nullptr for the first layer (an all-zero anchor).
// The Scan engine requires Periodic boundaries and uniform parameters and
// propagates DomainError from the diagonalization otherwise. Non-finite
// values raise NumericError naming the layer and step.
Sequence layer_forward(const LayerSpec& layer, const Sequence& u_seq,
                       const ForwardOptions& opts = {},
                       LayerCache* cache = nullptr,
                       const std::vector<Eigen::VectorXd>* x_prev_seq = nullptr,
                       int layer_index = 0);

// Chains all layers, pools the final layer's post-GELU sequence (LastStep
// or MeanOverTime), and applies the affine output map.
Eigen::VectorXd forward_logits(const ModelSpec& model, const Sequence& u,
                               const ForwardOptions& opts = {},
                               ForwardCache* cache = nullptr);

// Per-step outputs w_out y_n + b_out of the final layer (forecasting form).
Sequence forward_outputs(const ModelSpec& model, const Sequence& u,
                         const ForwardOptions& opts = {});

// One rectangular region of the grid assigned a target frequency band,
// rows [i_begin, i_end) by columns [j_begin, j_end).
struct RegionBand {
  int i_begin = 0;
  int i_end = 0;
  int j_begin = 0;
  int j_end = 0;
  double f_lo = 0.0;
  double f_hi = 0.0;
};

// Frequency-targeted initialization layout: every grid cell must be covered
// by exactly one region; wave speed per region comes from init_for_band
// under the given damping and mode policy.
struct BandPlan {
  std::vector<RegionBand> regions;
  double kp = 1.0;
  double ko = 1.0;
  ModePolicy policy = ModePolicy::StencilEdge;
};

struct InitDims {
  int input_dim = 1;   // m
  int output_dim = 1;  // K
  int layers = 1;      // L
};

// Seeded initialization. Weight matrices draw uniform(-1/sqrt(fan_in),
// 1/sqrt(fan_in)) from per-leaf named streams. Without a band plan, each
// layer draws one damping pair log-uniform in [1e-3, 1] and one wave speed
// uniform in (0, 0.9 * CFL bound], broadcast across the grid; with a band
// plan, wave speeds come from init_for_band per region. The result is
// bit-identical for equal seeds and always passes the stability check.
ModelSpec init_model(std::uint64_t seed, const InitDims& dims,
                     const GridShape& shape,
                     const std::optional<BandPlan>& band_plan = std::nullopt,
                     Pooling pooling = Pooling::MeanOverTime);

// Binary checkpoint with magic "biooss-ckpt-v1", explicit shape headers,
// and little-endian 64-bit floats. load_checkpoint raises ConfigError on a
// malformed or truncated file.
void save_checkpoint(const ModelSpec& model, const std::string& path);
ModelSpec load_checkpoint(const std::string& path);

}  // namespace biooss
