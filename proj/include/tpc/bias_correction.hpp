#pragma once

#include "tpc/net.hpp"

namespace tpc {

struct BcConfig {
  double s = 0.05;    // target std of each head weight group
  double w_bc = 5.0;  // weight of the BC term in the combined loss
  double eps = 1e-8;
};

struct GroupStats {
  std::vector<ClassId> classes;
  std::vector<double> mu;
  std::vector<double> sigma;  // population std
};

/// Per-group mean and population std over the row's weights. Head bias
/// entries belong to the group for reset purposes but are excluded here.
GroupStats group_stats(const DenseLayer& head, const ClassSet& active);

struct NormalizeStatus {
  std::vector<ClassId> skipped;  // rows with sigma == 0 left untouched
};

/// Rescale each active row to zero mean and std s. Rows outside the active
/// set are untouched.
NormalizeStatus explicit_normalize(DenseLayer& head, const ClassSet& active,
                                   const BcConfig& cfg);

/// KL-based class-bias loss over the active groups:
///   (1/(2A)) sum_j [ (mu_j/s)^2 + (sigma_j/s)^2 - log((sigma_j/s)^2 + eps) - 1 ]
double bc_loss(const DenseLayer& head, const ClassSet& active,
               const BcConfig& cfg);

/// Analytic gradient of bc_loss wrt the head weights. Inactive rows get
/// exactly zero. Derivative denominators use sigma^2 + eps*s^2 so the
/// gradient stays finite as sigma -> 0, mirroring the eps-guarded log.
Matrix bc_loss_grad(const DenseLayer& head, const ClassSet& active,
                    const BcConfig& cfg);

struct CombinedLoss {
  double total;
  Matrix grad_logits;  // CE part, to be masked and backpropagated
  Matrix grad_head;    // w_bc * BC part, added to head weight grads directly
};

CombinedLoss combined_loss(double ce, const Matrix& ce_grad_logits, double bc,
                           const Matrix& bc_grad_head, const BcConfig& cfg);

}  // namespace tpc
