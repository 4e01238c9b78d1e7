#pragma once

#include "tpc/types.hpp"

namespace tpc {

enum class Activation { relu, identity };
enum class Block { llf, csf };

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::relu;

  Eigen::Index in_width() const { return weights.cols(); }
  Eigen::Index out_width() const { return weights.rows(); }
};

/// Feed-forward classifier split into llf / csf feature blocks plus a
/// linear head whose row j is the weight group exclusive to class j.
struct SplitModel {
  std::vector<DenseLayer> llf;
  std::vector<DenseLayer> csf;
  DenseLayer head;  // identity activation, n_classes rows
  bool frozen_llf = false;
  bool frozen_csf = false;

  ClassId n_classes() const { return static_cast<ClassId>(head.out_width()); }
  Eigen::Index input_width() const;
};

/// Hidden layers use scaled-uniform fan-in init; head rows start at zero
/// (the reset state of a never-seen class).
SplitModel make_mlp(const std::vector<Eigen::Index>& llf_widths,
                    const std::vector<Eigen::Index>& csf_widths,
                    Eigen::Index input_dim, ClassId n_classes, Rng& rng);

struct ForwardCache {
  Matrix input;              // the batch itself
  std::vector<Matrix> pre;   // one per hidden layer (llf + csf)
  std::vector<Matrix> post;  // activations of the hidden layers
  Matrix logits;
  Matrix softmax;  // rows sum to 1
};

struct LayerGrad {
  Matrix d_weights;
  Vector d_bias;
};

struct Gradients {
  std::vector<LayerGrad> llf;  // empty when the block is frozen
  std::vector<LayerGrad> csf;
  LayerGrad head;
};

struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::vector<LayerGrad> vel_llf;
  std::vector<LayerGrad> vel_csf;
  LayerGrad vel_head;
};

OptimizerState make_optimizer(const SplitModel& model, double learning_rate,
                              double momentum);

ForwardCache forward(const SplitModel& model, const Matrix& batch);

/// Standard backprop. Frozen blocks still pass activation gradients through
/// but contribute no parameter gradients.
Gradients backward(const SplitModel& model, const ForwardCache& cache,
                   const Matrix& grad_logits);

/// Mean cross-entropy over the batch; grad_logits == (softmax - onehot)/n_mb.
std::pair<double, Matrix> softmax_ce_loss(const ForwardCache& cache,
                                          const Labels& labels);

void sgd_step(SplitModel& model, const Gradients& grads, OptimizerState& opt);

/// Zero head row j and its bias entry (Algorithm-style class reset).
void reset_head_group(SplitModel& model, ClassId j);

/// On unfreeze the block's velocity buffers are zeroed.
void set_block_frozen(SplitModel& model, OptimizerState& opt, Block block,
                      bool flag);

}  // namespace tpc
