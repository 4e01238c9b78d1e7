#include "tpc/bias_correction.hpp"

#include <cmath>

namespace tpc {

GroupStats group_stats(const DenseLayer& head, const ClassSet& active) {
  if (head.weights.cols() < 2)
    throw ShapeError("group_stats: head groups need at least 2 weights");
  GroupStats stats;
  const double n = static_cast<double>(head.weights.cols());
  for (ClassId j : active) {
    if (j < 0 || j >= head.weights.rows())
      throw LabelError("group_stats: class out of range");
    const auto row = head.weights.row(j);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().sum() / n;
    stats.classes.push_back(j);
    stats.mu.push_back(mu);
    stats.sigma.push_back(std::sqrt(var));
  }
  return stats;
}

NormalizeStatus explicit_normalize(DenseLayer& head, const ClassSet& active,
                                   const BcConfig& cfg) {
  if (active.empty())
    throw ConfigError("explicit_normalize: empty active set");
  NormalizeStatus status;
  const GroupStats stats = group_stats(head, active);
  for (std::size_t i = 0; i < stats.classes.size(); ++i) {
    const ClassId j = stats.classes[i];
    if (stats.sigma[i] == 0.0) {
      status.skipped.push_back(j);
      continue;
    }
    head.weights.row(j) =
        cfg.s * (head.weights.row(j).array() - stats.mu[i]) / stats.sigma[i];
  }
  return status;
}

double bc_loss(const DenseLayer& head, const ClassSet& active,
               const BcConfig& cfg) {
  if (active.empty()) throw ConfigError("bc_loss: empty active set");
  const GroupStats stats = group_stats(head, active);
  double sum = 0.0;
  const double s2 = cfg.s * cfg.s;
  for (std::size_t i = 0; i < stats.classes.size(); ++i) {
    const double mu_r = stats.mu[i] * stats.mu[i] / s2;
    const double sig_r = stats.sigma[i] * stats.sigma[i] / s2;
    sum += mu_r + sig_r - std::log(sig_r + cfg.eps) - 1.0;
  }
  return sum / (2.0 * static_cast<double>(active.size()));
}

Matrix bc_loss_grad(const DenseLayer& head, const ClassSet& active,
                    const BcConfig& cfg) {
  if (active.empty()) throw ConfigError("bc_loss_grad: empty active set");
  Matrix grad = Matrix::Zero(head.weights.rows(), head.weights.cols());
  const GroupStats stats = group_stats(head, active);
  const double n = static_cast<double>(head.weights.cols());
  const double s2 = cfg.s * cfg.s;
  const double scale = 1.0 / (2.0 * static_cast<double>(active.size()));
  for (std::size_t i = 0; i < stats.classes.size(); ++i) {
    const ClassId j = stats.classes[i];
    const double mu = stats.mu[i];
    const double var = stats.sigma[i] * stats.sigma[i];
    // d/dw of (mu/s)^2 is 2 mu/(n s^2); d/dw of the sigma terms is
    // (1/s^2 - 1/(var + eps s^2)) * 2 (w - mu)/n.
    const double mu_term = 2.0 * mu / (n * s2);
    const double var_coef = (1.0 / s2 - 1.0 / (var + cfg.eps * s2)) * 2.0 / n;
    grad.row(j) =
        scale *
        (mu_term + var_coef * (head.weights.row(j).array() - mu)).matrix();
  }
  return grad;
}

CombinedLoss combined_loss(double ce, const Matrix& ce_grad_logits, double bc,
                           const Matrix& bc_grad_head, const BcConfig& cfg) {
  CombinedLoss out;
  out.total = ce + cfg.w_bc * bc;
  out.grad_logits = ce_grad_logits;
  out.grad_head = cfg.w_bc * bc_grad_head;
  return out;
}

}  // namespace tpc
