#pragma once

#include "tpc/types.hpp"

namespace tpc {

/// Binary gate over the (n_mb x n_classes) logit-gradient tensor.
/// A zero entry blocks the correction for that (sample, class) pair.
using MaskMatrix = Matrix;

struct MaskContext {
  Labels batch_labels;
  ClassSet novel;               // classes never seen before this experience
  ClassSet experience_classes;  // all classes present in the experience
  double t = 0.5;               // phase-II tolerance threshold
};

/// Phase I: unmask only the novel-class columns, for every row.
MaskMatrix phase1_mask(const MaskContext& ctx, Eigen::Index n_mb,
                       Eigen::Index n_classes);

/// Phase II: block column k for row r iff k is outside the experience
/// classes and softmax(r,k) < t * softmax(r, label_r). Strict comparison;
/// equality leaves the correction unmasked.
MaskMatrix phase2_mask(const MaskContext& ctx, const Matrix& softmax);

Matrix apply_mask(const Matrix& grad_logits, const MaskMatrix& mask);

}  // namespace tpc
