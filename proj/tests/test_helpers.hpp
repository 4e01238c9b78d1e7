#pragma once

#include "tpc/net.hpp"

#include <functional>
#include <vector>

namespace tpc::testing {

// Pointers to every trainable scalar of a model, block-order stable.
inline std::vector<double*> parameter_view(SplitModel& model,
                                           bool include_frozen = true) {
  std::vector<double*> out;
  auto add_layer = [&](DenseLayer& l) {
    for (Eigen::Index i = 0; i < l.weights.size(); ++i)
      out.push_back(l.weights.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i)
      out.push_back(l.bias.data() + i);
  };
  if (include_frozen || !model.frozen_llf)
    for (auto& l : model.llf) add_layer(l);
  if (include_frozen || !model.frozen_csf)
    for (auto& l : model.csf) add_layer(l);
  add_layer(model.head);
  return out;
}

// Gradient values in the same order as parameter_view(include_frozen=false).
inline std::vector<double> gradient_view(const SplitModel& model,
                                         const Gradients& grads) {
  std::vector<double> out;
  auto add = [&](const LayerGrad& g) {
    for (Eigen::Index i = 0; i < g.d_weights.size(); ++i)
      out.push_back(g.d_weights(i));
    for (Eigen::Index i = 0; i < g.d_bias.size(); ++i)
      out.push_back(g.d_bias(i));
  };
  if (!model.frozen_llf)
    for (const auto& g : grads.llf) add(g);
  if (!model.frozen_csf)
    for (const auto& g : grads.csf) add(g);
  add(grads.head);
  return out;
}

// Central finite differences of a scalar loss over the model parameters.
inline std::vector<double> finite_diff(
    SplitModel& model, const std::function<double(const SplitModel&)>& loss,
    bool include_frozen = false, double step = 1e-5) {
  auto params = parameter_view(model, include_frozen);
  std::vector<double> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + step;
    const double up = loss(model);
    *params[i] = saved - step;
    const double down = loss(model);
    *params[i] = saved;
    out[i] = (up - down) / (2.0 * step);
  }
  return out;
}

inline double max_rel_error(const std::vector<double>& analytic,
                            const std::vector<double>& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom =
        std::max(1e-6, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline SplitModel random_model(Rng& rng, Eigen::Index input, ClassId classes,
                               const std::vector<Eigen::Index>& llf,
                               const std::vector<Eigen::Index>& csf,
                               double head_scale = 0.3) {
  SplitModel model = make_mlp(llf, csf, input, classes, rng);
  // Nonzero hidden biases keep pre-activations off the exact ReLU kink,
  // where finite differences and the subgradient legitimately disagree.
  std::normal_distribution<double> bias_gauss(0.0, 0.1);
  for (auto* block : {&model.llf, &model.csf})
    for (auto& layer : *block)
      layer.bias = Vector::NullaryExpr(layer.bias.size(),
                                       [&] { return bias_gauss(rng); });
  std::normal_distribution<double> gauss(0.0, head_scale);
  model.head.weights =
      Matrix::NullaryExpr(model.head.weights.rows(),
                          model.head.weights.cols(), [&] { return gauss(rng); });
  model.head.bias =
      Vector::NullaryExpr(model.head.bias.size(), [&] { return gauss(rng); });
  return model;
}

// Smallest |pre-activation| across all hidden units for a batch; gradient
// checks should skip models where this is within a few finite-diff steps
// of zero.
inline double min_kink_distance(const SplitModel& model, const Matrix& x) {
  const ForwardCache cache = forward(model, x);
  double dist = 1e300;
  for (const auto& pre : cache.pre)
    dist = std::min(dist, pre.cwiseAbs().minCoeff());
  return dist;
}

inline Matrix random_batch(Rng& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  return Matrix::NullaryExpr(n, d, [&] { return gauss(rng); });
}

inline Labels random_labels(Rng& rng, Eigen::Index n, ClassId classes) {
  std::uniform_int_distribution<ClassId> dist(0, classes - 1);
  Labels out(static_cast<std::size_t>(n));
  for (auto& y : out) y = dist(rng);
  return out;
}

}  // namespace tpc::testing
