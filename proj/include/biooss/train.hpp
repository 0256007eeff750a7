// Desk-scale learning on the wave model: closed-form ridge fitting of the
// output map, exact reverse-mode gradients for every trainable leaf (hand
// adjoints through the head and the time-domain difference stencils), a
// central-difference verification harness, and a small projected optimizer.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "biooss/model.hpp"

namespace biooss {

enum class TaskKind { Classify, Regress };

// One training set: input sequences plus either integer class labels
// (Classify) or per-step target sequences (Regress).
struct Batch {
  std::vector<Sequence> inputs;
  std::vector<int> labels;        // Classify: one per input, in [0, K)
  std::vector<Sequence> targets;  // Regress: one per input, K wide, same T
  TaskKind task = TaskKind::Classify;

  std::size_t size() const { return inputs.size(); }
  // Throws DimensionError on count/shape mismatches against a model with the
  // given input/output widths, DomainError on out-of-range labels.
  void validate(int input_dim, int output_dim) const;
};

// Gradients for one layer, shaped exactly like the LayerSpec leaves.
struct LayerGradients {
  Eigen::MatrixXd input_map;
  Eigen::MatrixXd wz;
  Eigen::MatrixXd wg;
  Eigen::MatrixXd readout_c;
  Eigen::MatrixXd readout_d;
  Eigen::MatrixXd glu_w1;
  Eigen::MatrixXd glu_w2;
  Field c;
  Field kp;
  Field ko;
};

struct GradientSet {
  std::vector<LayerGradients> layers;
  Eigen::MatrixXd w_out;
  Eigen::VectorXd b_out;

  static GradientSet zeros_like(const ModelSpec& model);
  // Euclidean norm over every entry of every leaf.
  double norm() const;
};

struct LossOptions {
  // Identity disables the nonlinear head in both passes, leaving the model
  // linear in its weights; the tight gradient-check tolerance relies on it.
  HeadMode head = HeadMode::Full;
};

struct LossAndGradients {
  double loss = 0.0;
  GradientSet grads;
};

// Loss over the batch without gradients (one sequential forward per item).
double batch_loss(const ModelSpec& model, const Batch& batch,
                  const LossOptions& opts = {});

// Loss and exact reverse-mode gradients. Classify is softmax cross-entropy
// on the pooled logits; Regress is squared error summed over output
// components, against the per-step outputs. Reductions: sum over batch
// items, mean over time. The forward pass uses the sequential engine so the
// backward pass retraces the exact arithmetic it differentiates; the adjoint
// of the wave update runs the transposed stencils backward in time
// (divergence and gradient are negative transposes of each other).
LossAndGradients loss_and_gradients(const ModelSpec& model, const Batch& batch,
                                    const LossOptions& opts = {});

// Ridge regression with an unpenalized intercept: minimizes
// |features W + 1 b^T - targets|^2 + reg |W|^2 via the centered normal
// equations and a symmetric LDLT solve. W is F x K over feature columns.
struct RidgeFit {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};
RidgeFit ridge_readout_fit(const Eigen::MatrixXd& features,
                           const Eigen::MatrixXd& targets, double reg);

// Time-mean of the final layer's squared wave state (per-cell energy, length
// 3 H W): the feature map for reservoir-style ridge classification.
Eigen::VectorXd energy_features(const ModelSpec& model, const Sequence& u);

// N x K one-hot matrix from integer labels in [0, k).
Eigen::MatrixXd one_hot_targets(const std::vector<int>& labels, int k);

struct FdOptions {
  HeadMode head = HeadMode::Full;
  int coords_per_leaf = 20;
  std::uint64_t seed = 0;
};

// Central finite differences of the batch loss against loss_and_gradients,
// on coords_per_leaf randomly sampled coordinates per leaf. Returns one
// relative error per leaf, keyed by name ("layer0/wz", ..., "w-out",
// "b-out"): the largest absolute discrepancy over the probed coordinates
// divided by the largest gradient magnitude seen in the leaf. The
// normalization is per leaf rather than per coordinate because the
// difference quotient of an O(1) loss has an absolute noise floor near
// machine epsilon / eps, which swamps coordinates far below the leaf's
// scale no matter how exact the adjoint is. `leaves` narrows the set
// (empty = all). eps must lie in [1e-7, 1e-3]. Perturbed copies run with
// the stability override set, since a wave-speed perturbation may cross
// the certification boundary by eps.
std::map<std::string, double> finite_difference_check(
    const ModelSpec& model, const Batch& batch, double eps,
    const std::vector<std::string>& leaves = {}, const FdOptions& opts = {});

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double lr = 1e-3;
  int steps = 100;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // After every update, damping rates are clamped to >= 1e-6 and wave speeds
  // onto the closed generalized-CFL ball for the updated damping.
  bool project_stability = true;
  // Abort when |loss| exceeds this multiple of the first step's |loss|.
  double divergence_factor = 1e6;
  int batch_size = 0;  // 0 = full batch every step; else sampled without
                       // replacement per step from the seeded stream
  // Leaf names to update (see finite_difference_check); empty = all.
  std::vector<std::string> trainable;
  HeadMode head = HeadMode::Full;

  void validate() const;
};

struct TraceRow {
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double max_eig_magnitude = 0.0;
};

struct TrainResult {
  ModelSpec model;
  std::vector<TraceRow> trace;
};

// Projected gradient training, bit-identical for equal (model, data, config).
// Each row of the trace holds the loss and gradient norm measured before
// that step's update and the stability report after its projection. Throws
// TrainingDivergedError (carrying the loss history) when the divergence
// guard trips or the loss turns non-finite.
TrainResult train_loop(const ModelSpec& model, const Batch& data,
                       const TrainConfig& config);

// Fraction of Classify items whose argmax logit matches the label.
double classification_accuracy(const ModelSpec& model, const Batch& batch,
                               const ForwardOptions& opts = {});

// CSV with header step,loss,grad_norm,max_eig_magnitude.
void write_loss_trace(std::ostream& os, const std::vector<TraceRow>& trace);

}  // namespace biooss
