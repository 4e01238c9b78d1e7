#include "tpc/strategies.hpp"

#include <chrono>
#include <cmath>

namespace tpc {

PhaseEpochs phase_schedule(const TpcConfig& cfg) {
  PhaseEpochs ep;
  auto side_epochs = [&](double frac) {
    if (frac <= 0.0) return 0;
    return std::max(
        1, static_cast<int>(std::llround(frac * cfg.epochs_total)));
  };
  ep.phase1 = side_epochs(cfg.phase1_frac);
  ep.phase3 = (cfg.use_replay && cfg.use_phase3) ? side_epochs(cfg.phase3_frac)
                                                 : 0;
  ep.phase2 = std::max(0, cfg.epochs_total - ep.phase1 - ep.phase3);
  return ep;
}

TrainerState make_trainer(const Dataset& ds, const TpcConfig& cfg,
                          std::uint64_t seed) {
  TrainerState state;
  state.rng.seed(seed);
  state.model = make_mlp(cfg.llf_widths, cfg.csf_widths, ds.dim(),
                         ds.n_classes, state.rng);
  state.opt = make_optimizer(state.model, cfg.lr, cfg.momentum);
  state.memory = ReplayMemory(cfg.replay_capacity);
  return state;
}

namespace {

enum class MaskPhase { none, phase1, phase2 };

void train_step(TrainerState& state, const LabeledBatch& mb,
                const TpcConfig& cfg, MaskPhase phase, const ClassSet& active,
                const MaskContext& base_ctx) {
  const ForwardCache cache = forward(state.model, mb.x);
  auto [ce, grad_logits] = softmax_ce_loss(cache, mb.y);
  (void)ce;

  if (cfg.use_masking && phase != MaskPhase::none) {
    MaskContext ctx = base_ctx;
    ctx.batch_labels = mb.y;
    const MaskMatrix mask =
        phase == MaskPhase::phase1
            ? phase1_mask(ctx, grad_logits.rows(), grad_logits.cols())
            : phase2_mask(ctx, cache.softmax);
    grad_logits = apply_mask(grad_logits, mask);
  }

  Gradients grads = backward(state.model, cache, grad_logits);

  // The BC term acts on head parameters directly; it does not flow through
  // the logit-gradient tensor and is never masked.
  if (cfg.use_bias_correction && !cfg.online_explicit_norm &&
      !active.empty()) {
    grads.head.d_weights +=
        cfg.bc.w_bc * bc_loss_grad(state.model.head, active, cfg.bc);
  }

  sgd_step(state.model, grads, state.opt);

  if (cfg.use_bias_correction && cfg.online_explicit_norm && !active.empty())
    explicit_normalize(state.model.head, active, cfg.bc);
}

void run_phase(TrainerState& state, const Experience& exp,
               const TpcConfig& cfg, MaskPhase phase, int epochs,
               const BatchPlan& plan, const ClassSet& active,
               const MaskContext& base_ctx) {
  if (epochs <= 0) return;
  MinibatchComposer composer(exp, cfg.use_replay ? &state.memory : nullptr,
                             plan);
  for (int e = 0; e < epochs; ++e) {
    composer.begin_epoch(state.rng);
    for (;;) {
      const LabeledBatch mb = composer.next(state.rng);
      if (mb.size() == 0) break;
      train_step(state, mb, cfg, phase, active, base_ctx);
    }
  }
}

}  // namespace

void tpc_train_experience(TrainerState& state, const Experience& exp,
                          const TpcConfig& cfg) {
  const int i = ++state.experience_count;
  if (exp.data.size() == 0) return;  // no-op

  if (cfg.reset_unknown_head)
    for (ClassId j = 0; j < state.model.n_classes(); ++j)
      if (!class_set_contains(state.known, j)) reset_head_group(state.model, j);

  auto [novel, rep] = split_labels(exp, state.known);
  (void)rep;
  const ClassSet active = class_set_union(state.known, exp.classes);

  set_block_frozen(state.model, state.opt, Block::llf,
                   cfg.freeze_features && i > 1);
  // No-replay variant: csf is tuned only in E1 and frozen for the whole of
  // every later experience; with replay it is frozen only during phase I.
  const bool csf_frozen_all =
      cfg.freeze_features && !cfg.use_replay && i > 1;
  const bool csf_frozen_p1 = cfg.freeze_features && i > 1;

  const BatchPlan plan = batch_ratio(
      exp.data.size(), cfg.use_replay ? cfg.replay_capacity : 0,
      cfg.minibatch);
  const PhaseEpochs ep = phase_schedule(cfg);

  MaskContext ctx;
  ctx.novel = novel;
  ctx.experience_classes = exp.classes;
  ctx.t = cfg.t;

  set_block_frozen(state.model, state.opt, Block::csf,
                   csf_frozen_p1 || csf_frozen_all);
  run_phase(state, exp, cfg, MaskPhase::phase1, ep.phase1, plan, active, ctx);

  set_block_frozen(state.model, state.opt, Block::csf, csf_frozen_all);
  run_phase(state, exp, cfg, MaskPhase::phase2, ep.phase2, plan, active, ctx);

  if (cfg.use_replay) state.memory.update(exp, state.rng);

  if (cfg.use_replay && cfg.use_phase3 && ep.phase3 > 0 &&
      !state.memory.empty()) {
    const Eigen::Index bs =
        cfg.phase3_batch > 0 ? cfg.phase3_batch : cfg.minibatch;
    const Eigen::Index iters =
        std::max<Eigen::Index>(1, state.memory.stored() / bs);
    for (int e = 0; e < ep.phase3; ++e)
      for (Eigen::Index it = 0; it < iters; ++it) {
        const LabeledBatch mb = state.memory.sample_batch(bs, state.rng);
        train_step(state, mb, cfg, MaskPhase::none, active, ctx);
      }
  }

  if (cfg.use_bias_correction)
    explicit_normalize(state.model.head, active, cfg.bc);

  state.known = active;
}

namespace {

TpcConfig stripped(const TpcConfig& cfg, bool with_replay) {
  TpcConfig c = cfg;
  c.use_replay = with_replay;
  c.use_phase3 = false;
  c.use_masking = false;
  c.use_bias_correction = false;
  c.reset_unknown_head = false;
  c.freeze_features = false;
  c.phase1_frac = 0.0;
  c.phase3_frac = 0.0;
  return c;
}

}  // namespace

void naive_train_experience(TrainerState& state, const Experience& exp,
                            const TpcConfig& cfg) {
  tpc_train_experience(state, exp, stripped(cfg, /*with_replay=*/false));
}

void replay_train_experience(TrainerState& state, const Experience& exp,
                             const TpcConfig& cfg) {
  tpc_train_experience(state, exp, stripped(cfg, /*with_replay=*/true));
}

// Mean-shift the learned group, then weighted average with the stored copy
// using w_past = sqrt(n_past / n_cur).
void cwr_consolidate(CwrState& cwr, const DenseLayer& trained_head,
                     const ClassSet& classes,
                     const std::map<ClassId, Eigen::Index>& n_cur) {
  for (ClassId j : classes) {
    const double mu = trained_head.weights.row(j).mean();
    const Matrix shifted = trained_head.weights.row(j).array() - mu;
    const auto past = cwr.n_past.count(j) ? cwr.n_past.at(j) : 0;
    const double w = std::sqrt(static_cast<double>(past) /
                               static_cast<double>(n_cur.at(j)));
    cwr.head_weights.row(j) =
        (w * cwr.head_weights.row(j) + shifted) / (w + 1.0);
    cwr.head_bias(j) =
        (w * cwr.head_bias(j) + trained_head.bias(j)) / (w + 1.0);
    cwr.n_past[j] = past + n_cur.at(j);
  }
}

void cwr_star_train_experience(TrainerState& state, CwrState& cwr,
                               const Experience& exp, const TpcConfig& cfg) {
  SplitModel& model = state.model;
  if (cwr.head_weights.size() == 0) {
    cwr.head_weights =
        Matrix::Zero(model.head.weights.rows(), model.head.weights.cols());
    cwr.head_bias = Vector::Zero(model.head.bias.size());
  }
  const int i = ++state.experience_count;
  if (exp.data.size() == 0) return;

  // Reset the head; load consolidated rows for the experience's classes.
  model.head.weights.setZero();
  model.head.bias.setZero();
  for (ClassId j : exp.classes) {
    model.head.weights.row(j) = cwr.head_weights.row(j);
    model.head.bias(j) = cwr.head_bias(j);
  }

  set_block_frozen(state.model, state.opt, Block::llf,
                   cfg.freeze_features && i > 1);

  const BatchPlan plan = batch_ratio(
      exp.data.size(), cfg.use_replay ? cfg.replay_capacity : 0,
      cfg.minibatch);
  MinibatchComposer composer(exp, cfg.use_replay ? &state.memory : nullptr,
                             plan);
  const ClassSet no_active;
  const MaskContext no_ctx;
  for (int e = 0; e < cfg.epochs_total; ++e) {
    composer.begin_epoch(state.rng);
    for (;;) {
      const LabeledBatch mb = composer.next(state.rng);
      if (mb.size() == 0) break;
      TpcConfig plain = cfg;
      plain.use_masking = false;
      plain.use_bias_correction = false;
      train_step(state, mb, plain, MaskPhase::none, no_active, no_ctx);
    }
  }

  std::map<ClassId, Eigen::Index> n_cur;
  for (ClassId y : exp.data.y) ++n_cur[y];
  cwr_consolidate(cwr, model.head, exp.classes, n_cur);

  if (cfg.use_replay) state.memory.update(exp, state.rng);

  // Deploy the consolidated head for evaluation.
  model.head.weights = cwr.head_weights;
  model.head.bias = cwr.head_bias;

  state.known = class_set_union(state.known, exp.classes);
}

JointResult joint_train(const Dataset& ds, const TpcConfig& cfg,
                        std::uint64_t seed) {
  TrainerState state = make_trainer(ds, cfg, seed);
  Experience all;
  all.index = 1;
  all.data = ds.train;
  for (ClassId y : ds.train.y) class_set_insert(all.classes, y);
  all.y_novel = all.classes;
  naive_train_experience(state, all, cfg);
  JointResult result;
  result.test_accuracy =
      evaluate(state.model, ds.test, all.classes, TestSetMode::fixed)
          .mean_class_accuracy;
  result.model = std::move(state.model);
  return result;
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "tpc") return Strategy::tpc;
  if (name == "naive") return Strategy::naive;
  if (name == "replay") return Strategy::replay;
  if (name == "cwr_star") return Strategy::cwr_star;
  if (name == "joint") return Strategy::joint;
  throw ConfigError("unknown strategy: " + name);
}

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::tpc: return "tpc";
    case Strategy::naive: return "naive";
    case Strategy::replay: return "replay";
    case Strategy::cwr_star: return "cwr_star";
    case Strategy::joint: return "joint";
  }
  return "?";
}

RunHistory run_stream(Strategy strategy, const ExperienceStream& stream,
                      const Dataset& ds, const TpcConfig& cfg,
                      const EvalPolicy& eval, std::uint64_t seed) {
  if (stream.experiences.empty())
    throw ConfigError("run_stream: empty stream");

  if (strategy == Strategy::joint) {
    ExperienceStream single;
    single.seed = stream.seed;
    Experience all;
    all.index = 1;
    all.data = ds.train;
    for (ClassId y : ds.train.y) class_set_insert(all.classes, y);
    all.y_novel = all.classes;
    single.experiences.push_back(std::move(all));
    return run_stream(Strategy::naive, single, ds, cfg, eval, seed);
  }

  TrainerState state = make_trainer(ds, cfg, seed);
  CwrState cwr;
  RunHistory history;
  history.seed = seed;
  history.strategy = strategy_name(strategy);

  const int n_e = static_cast<int>(stream.experiences.size());
  for (const Experience& exp : stream.experiences) {
    const auto start = std::chrono::steady_clock::now();
    switch (strategy) {
      case Strategy::tpc:
        tpc_train_experience(state, exp, cfg);
        break;
      case Strategy::naive:
        naive_train_experience(state, exp, cfg);
        break;
      case Strategy::replay:
        replay_train_experience(state, exp, cfg);
        break;
      case Strategy::cwr_star:
        cwr_star_train_experience(state, cwr, exp, cfg);
        break;
      case Strategy::joint:
        break;  // handled above
    }
    const auto stop = std::chrono::steady_clock::now();
    history.wall_clock_s.push_back(
        std::chrono::duration<double>(stop - start).count());

    // Track known classes for strategies whose training loop does not.
    state.known = class_set_union(state.known, exp.classes);

    const int i = exp.index;
    if (i == 1 || i == n_e || (eval.interval > 0 && i % eval.interval == 0)) {
      EvalRecord rec = evaluate(state.model, ds.test, state.known, eval.mode);
      rec.experience = i;
      history.records.push_back(std::move(rec));
    }
  }
  return history;
}

}  // namespace tpc
