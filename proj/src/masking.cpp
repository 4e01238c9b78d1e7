#include "tpc/masking.hpp"

#include "tpc/net.hpp"

namespace tpc {

MaskMatrix phase1_mask(const MaskContext& ctx, Eigen::Index n_mb,
                       Eigen::Index n_classes) {
  MaskMatrix mask = MaskMatrix::Zero(n_mb, n_classes);
  for (ClassId k : ctx.novel)
    if (k >= 0 && k < n_classes) mask.col(k).setOnes();
  return mask;
}

MaskMatrix phase2_mask(const MaskContext& ctx, const Matrix& softmax) {
  const Eigen::Index n_mb = softmax.rows();
  const Eigen::Index n_classes = softmax.cols();
  MaskMatrix mask = MaskMatrix::Ones(n_mb, n_classes);
  for (Eigen::Index r = 0; r < n_mb; ++r) {
    const ClassId y = ctx.batch_labels[static_cast<std::size_t>(r)];
    const double threshold = ctx.t * softmax(r, y);
    for (Eigen::Index k = 0; k < n_classes; ++k) {
      if (class_set_contains(ctx.experience_classes, static_cast<ClassId>(k)))
        continue;
      if (softmax(r, k) < threshold) mask(r, k) = 0.0;
    }
  }
  return mask;
}

Matrix apply_mask(const Matrix& grad_logits, const MaskMatrix& mask) {
  if (grad_logits.rows() != mask.rows() || grad_logits.cols() != mask.cols())
    throw ShapeError("apply_mask: shape mismatch");
  return grad_logits.cwiseProduct(mask);
}

}  // namespace tpc
