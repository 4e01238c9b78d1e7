#pragma once

#include "tpc/bias_correction.hpp"
#include "tpc/masking.hpp"
#include "tpc/metrics.hpp"
#include "tpc/net.hpp"
#include "tpc/replay.hpp"
#include "tpc/scenario.hpp"

namespace tpc {

struct TpcConfig {
  int epochs_total = 8;
  double phase1_frac = 0.10;
  double phase3_frac = 0.10;
  BcConfig bc;
  double t = 0.5;                 // phase-II mask threshold
  Eigen::Index minibatch = 32;    // n_mbe + n_mbr
  double lr = 0.005;
  double momentum = 0.9;
  Eigen::Index replay_capacity = 200;
  std::vector<Eigen::Index> llf_widths{32};
  std::vector<Eigen::Index> csf_widths{32};

  bool use_replay = true;
  bool use_phase3 = true;
  bool use_masking = true;
  bool use_bias_correction = true;
  bool reset_unknown_head = true;
  bool freeze_features = true;  // llf after E1, csf per phase schedule
  // Explicit Eq.7 normalization after every optimizer step instead of the
  // BC loss term (ablation alternative).
  bool online_explicit_norm = false;
  Eigen::Index phase3_batch = 0;  // 0 => full minibatch size
};

struct PhaseEpochs {
  int phase1 = 0;
  int phase2 = 0;
  int phase3 = 0;
};

/// epochs_{1,3} = max(1, round(frac * total)) when the phase is enabled;
/// phase II takes the remainder.
PhaseEpochs phase_schedule(const TpcConfig& cfg);

struct TrainerState {
  SplitModel model;
  OptimizerState opt;
  ReplayMemory memory{0};
  ClassSet known;
  int experience_count = 0;
  Rng rng{0};
};

TrainerState make_trainer(const Dataset& ds, const TpcConfig& cfg,
                          std::uint64_t seed);

void tpc_train_experience(TrainerState& state, const Experience& exp,
                          const TpcConfig& cfg);

/// Plain CE + SGD: the TPC loop with every mechanism disabled, so the two
/// are trajectory-identical under one seed by construction.
void naive_train_experience(TrainerState& state, const Experience& exp,
                            const TpcConfig& cfg);

/// CE over composed experience+replay batches, reservoir updated at the end.
void replay_train_experience(TrainerState& state, const Experience& exp,
                             const TpcConfig& cfg);

struct CwrState {
  Matrix head_weights;  // consolidated copy
  Vector head_bias;
  std::map<ClassId, Eigen::Index> n_past;
};

/// Mean-shift the trained rows for `classes` and fold them into the
/// consolidated copy with weight w = sqrt(n_past / n_cur); updates n_past.
void cwr_consolidate(CwrState& cwr, const DenseLayer& trained_head,
                     const ClassSet& classes,
                     const std::map<ClassId, Eigen::Index>& n_cur);

void cwr_star_train_experience(TrainerState& state, CwrState& cwr,
                               const Experience& exp, const TpcConfig& cfg);

struct JointResult {
  SplitModel model;
  double test_accuracy = 0.0;  // mean-class accuracy on the test split
};

JointResult joint_train(const Dataset& ds, const TpcConfig& cfg,
                        std::uint64_t seed);

enum class Strategy { tpc, naive, replay, cwr_star, joint };

Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy s);

struct EvalPolicy {
  TestSetMode mode = TestSetMode::fixed;
  int interval = 1;  // evaluate at experiences 1, k*interval, and the last
};

RunHistory run_stream(Strategy strategy, const ExperienceStream& stream,
                      const Dataset& ds, const TpcConfig& cfg,
                      const EvalPolicy& eval, std::uint64_t seed);

}  // namespace tpc
