#include "tpc/net.hpp"

#include <algorithm>
#include <cmath>

namespace tpc {

void class_set_insert(ClassSet& s, ClassId c) {
  auto it = std::lower_bound(s.begin(), s.end(), c);
  if (it == s.end() || *it != c) s.insert(it, c);
}

bool class_set_contains(const ClassSet& s, ClassId c) {
  return std::binary_search(s.begin(), s.end(), c);
}

ClassSet class_set_union(const ClassSet& a, const ClassSet& b) {
  ClassSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

Eigen::Index SplitModel::input_width() const {
  if (!llf.empty()) return llf.front().in_width();
  if (!csf.empty()) return csf.front().in_width();
  return head.in_width();
}

namespace {

DenseLayer make_hidden(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseLayer layer;
  layer.weights = Matrix::NullaryExpr(out, in, [&] { return dist(rng); });
  layer.bias = Vector::Zero(out);
  layer.activation = Activation::relu;
  return layer;
}

Matrix apply_activation(const Matrix& pre, Activation act) {
  if (act == Activation::relu) return pre.cwiseMax(0.0);
  return pre;
}

void run_block(const std::vector<DenseLayer>& block, ForwardCache& cache,
               const Matrix*& cur) {
  for (const auto& layer : block) {
    if (cur->cols() != layer.in_width())
      throw ShapeError("forward: layer input width mismatch");
    Matrix pre = (*cur * layer.weights.transpose()).rowwise() +
                 layer.bias.transpose();
    cache.post.push_back(apply_activation(pre, layer.activation));
    cache.pre.push_back(std::move(pre));
    cur = &cache.post.back();
  }
}

}  // namespace

SplitModel make_mlp(const std::vector<Eigen::Index>& llf_widths,
                    const std::vector<Eigen::Index>& csf_widths,
                    Eigen::Index input_dim, ClassId n_classes, Rng& rng) {
  SplitModel model;
  Eigen::Index in = input_dim;
  for (Eigen::Index w : llf_widths) {
    model.llf.push_back(make_hidden(in, w, rng));
    in = w;
  }
  for (Eigen::Index w : csf_widths) {
    model.csf.push_back(make_hidden(in, w, rng));
    in = w;
  }
  model.head.weights = Matrix::Zero(n_classes, in);
  model.head.bias = Vector::Zero(n_classes);
  model.head.activation = Activation::identity;
  return model;
}

OptimizerState make_optimizer(const SplitModel& model, double learning_rate,
                              double momentum) {
  OptimizerState opt;
  opt.learning_rate = learning_rate;
  opt.momentum = momentum;
  auto zeros_like = [](const DenseLayer& l) {
    return LayerGrad{Matrix::Zero(l.weights.rows(), l.weights.cols()),
                     Vector::Zero(l.bias.size())};
  };
  for (const auto& l : model.llf) opt.vel_llf.push_back(zeros_like(l));
  for (const auto& l : model.csf) opt.vel_csf.push_back(zeros_like(l));
  opt.vel_head = zeros_like(model.head);
  return opt;
}

ForwardCache forward(const SplitModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_width())
    throw ShapeError("forward: batch width does not match model input");
  ForwardCache cache;
  cache.input = batch;
  cache.pre.reserve(model.llf.size() + model.csf.size());
  cache.post.reserve(cache.pre.capacity());
  const Matrix* cur = &cache.input;
  run_block(model.llf, cache, cur);
  run_block(model.csf, cache, cur);
  cache.logits = (*cur * model.head.weights.transpose()).rowwise() +
                 model.head.bias.transpose();
  // row-max subtraction for stability
  Matrix shifted = cache.logits.colwise() - cache.logits.rowwise().maxCoeff();
  Matrix exps = shifted.array().exp();
  cache.softmax = exps.array().colwise() / exps.rowwise().sum().array();
  return cache;
}

Gradients backward(const SplitModel& model, const ForwardCache& cache,
                   const Matrix& grad_logits) {
  if (grad_logits.rows() != cache.logits.rows() ||
      grad_logits.cols() != cache.logits.cols())
    throw ShapeError("backward: grad_logits shape mismatch");

  Gradients grads;
  const std::size_t n_llf = model.llf.size();

  const Matrix& head_in =
      cache.post.empty() ? cache.input : cache.post.back();
  grads.head.d_weights = grad_logits.transpose() * head_in;
  grads.head.d_bias = grad_logits.colwise().sum();

  Matrix delta = grad_logits * model.head.weights;  // grad wrt head input

  const std::vector<DenseLayer>* blocks[2] = {&model.llf, &model.csf};
  const bool frozen[2] = {model.frozen_llf, model.frozen_csf};
  std::vector<LayerGrad>* outs[2] = {&grads.llf, &grads.csf};

  for (int b = 1; b >= 0; --b) {
    const auto& block = *blocks[b];
    const std::size_t base = (b == 1) ? n_llf : 0;
    if (!frozen[b]) outs[b]->resize(block.size());
    for (std::size_t k = block.size(); k-- > 0;) {
      const std::size_t i = base + k;
      const DenseLayer& layer = block[k];
      if (layer.activation == Activation::relu)
        delta = delta.cwiseProduct(
            (cache.pre[i].array() > 0.0).cast<double>().matrix());
      if (!frozen[b]) {
        (*outs[b])[k].d_weights =
            delta.transpose() * (i == 0 ? cache.input : cache.post[i - 1]);
        (*outs[b])[k].d_bias = delta.colwise().sum();
      }
      if (i > 0 || b > 0) delta = (delta * layer.weights).eval();
    }
  }
  return grads;
}

std::pair<double, Matrix> softmax_ce_loss(const ForwardCache& cache,
                                          const Labels& labels) {
  const Eigen::Index n = cache.softmax.rows();
  const Eigen::Index c = cache.softmax.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ShapeError("softmax_ce_loss: label count != batch size");
  double loss = 0.0;
  Matrix grad = cache.softmax;
  for (Eigen::Index r = 0; r < n; ++r) {
    const ClassId y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= c) throw LabelError("softmax_ce_loss: label out of range");
    loss -= std::log(std::max(cache.softmax(r, y), 1e-300));
    grad(r, y) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return {loss * inv_n, grad * inv_n};
}

namespace {

void step_block(std::vector<DenseLayer>& layers,
                const std::vector<LayerGrad>& grads,
                std::vector<LayerGrad>& vel, double lr, double momentum) {
  if (grads.empty()) return;  // frozen block
  for (std::size_t i = 0; i < layers.size(); ++i) {
    vel[i].d_weights = momentum * vel[i].d_weights + grads[i].d_weights;
    vel[i].d_bias = momentum * vel[i].d_bias + grads[i].d_bias;
    layers[i].weights -= lr * vel[i].d_weights;
    layers[i].bias -= lr * vel[i].d_bias;
  }
}

}  // namespace

void sgd_step(SplitModel& model, const Gradients& grads, OptimizerState& opt) {
  step_block(model.llf, grads.llf, opt.vel_llf, opt.learning_rate,
             opt.momentum);
  step_block(model.csf, grads.csf, opt.vel_csf, opt.learning_rate,
             opt.momentum);
  opt.vel_head.d_weights =
      opt.momentum * opt.vel_head.d_weights + grads.head.d_weights;
  opt.vel_head.d_bias = opt.momentum * opt.vel_head.d_bias + grads.head.d_bias;
  model.head.weights -= opt.learning_rate * opt.vel_head.d_weights;
  model.head.bias -= opt.learning_rate * opt.vel_head.d_bias;
}

void reset_head_group(SplitModel& model, ClassId j) {
  if (j < 0 || j >= model.n_classes())
    throw LabelError("reset_head_group: class out of range");
  model.head.weights.row(j).setZero();
  model.head.bias(j) = 0.0;
}

void set_block_frozen(SplitModel& model, OptimizerState& opt, Block block,
                      bool flag) {
  bool& target = (block == Block::llf) ? model.frozen_llf : model.frozen_csf;
  const bool was = target;
  target = flag;
  if (was && !flag) {
    auto& vel = (block == Block::llf) ? opt.vel_llf : opt.vel_csf;
    for (auto& v : vel) {
      v.d_weights.setZero();
      v.d_bias.setZero();
    }
  }
}

}  // namespace tpc
